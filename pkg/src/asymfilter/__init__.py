"""Asymptotic-expansion filter for the perturbed linear observation model.

    dX = a X dt + b dV
    dY = (c X + eps X**j) dt + sigma dW

The filter expands E[X_t | Y] in powers of eps around the Kalman-Bucy
filter.  Each coefficient is a combination of iterated-integral "A-terms"
whose forward stochastic differential equations are derived symbolically
and integrated along the observation path.
"""

from .aterms import ATermSpec, ATermSystem, derive_closure, differentiate, integrate_system
from .baselines import conditional_path_moments, particle_filter
from .density import DensityApprox, HermiteSet, char_fn_coefficients, density_eval, hermite_poly
from .filtering import (
    ExpansionCoefficients,
    LinearFilterState,
    assemble,
    clip_coefficients,
    compute_coefficients,
    kalman_bucy,
)
from .harness import ExperimentConfig, RunSummary, integrated_squared_error, load_config, run_experiment
from .sde import ModelParams, SamplePath, TimeGrid, simulate_ensemble, simulate_path
from .wick import ATermCombo, WickPolynomial, decompose_j_term, isserlis_moment

__version__ = "0.1.0"

__all__ = [
    "ATermCombo", "ATermSpec", "ATermSystem", "DensityApprox", "ExpansionCoefficients",
    "ExperimentConfig", "HermiteSet", "LinearFilterState", "ModelParams", "RunSummary",
    "SamplePath", "TimeGrid", "WickPolynomial", "assemble", "char_fn_coefficients",
    "clip_coefficients", "compute_coefficients", "conditional_path_moments", "decompose_j_term",
    "density_eval", "derive_closure", "differentiate", "hermite_poly", "integrate_system",
    "integrated_squared_error", "isserlis_moment", "kalman_bucy", "load_config",
    "particle_filter", "run_experiment", "simulate_ensemble", "simulate_path",
]
