"""First-order expansion of the conditional density.

Under the reference measure X_t is Gaussian with mean mu and variance gamma.
Expanding the delta function at x in Hermite polynomials of Z_t = X_t - mu,

    E~[delta(X_t - x) U] = phi(x) sum_k E~[H_k(Z_t) U] H_k(x - mu) / (k! gamma^k),

and taking U the first-order weight int g(X_s)(dY - c X ds) / sigma^2 gives

    p(x) = phi(x; mu, gamma) [1 + eps sum_{k=1..4} c_k/k! H_k(x - mu; gamma) / gamma^k].

The k = 0 term cancels against the normalisation.  For k >= 5 the Hermite
polynomial is orthogonal to every polynomial of lower degree in the jointly
Gaussian path, so those coefficients vanish; with g(x) = x^3 the integrand
has degree four.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import trapezoid

from .aterms import compile_system, innovation_increments, integrate_compiled
from .filtering import LinearFilterState, _closure_for
from .poly import G, Poly
from .sde import ModelParams, SamplePath
from .tables import write_columns
from .wick import ATermCombo, functional_j_term

MAX_K = 4


def hermite_poly(k: int, x, gamma: float):
    """H_k(x; gamma) from H_0 = 1, H_1 = x, H_{k+1} = x H_k - k gamma H_{k-1}."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x
    if k == 0:
        return prev
    for i in range(1, k):
        prev, cur = cur, x * cur - i * gamma * prev
    return cur


def hermite_coefficients(k: int) -> dict:
    """H_k(z; gamma) as {power of z: polynomial in gamma}."""
    prev, cur = {0: Poly.const(1)}, {1: Poly.const(1)}
    if k == 0:
        return prev
    for i in range(1, k):
        nxt = {m + 1: v for m, v in cur.items()}
        for m, v in prev.items():
            nxt[m] = nxt.get(m, Poly()) - v * G * i
        prev, cur = cur, {m: v for m, v in nxt.items() if v}
    return cur


@lru_cache(maxsize=None)
def hermite_j_term(k: int, j: int) -> ATermCombo:
    """A-term decomposition of E~[H_k(Z_t) int g(X_s)(dY - c X ds)]."""
    return functional_j_term(hermite_coefficients(k), j, 1)


@dataclass
class HermiteSet:
    """Coefficients c_0..c_4 at one time, with the 1/sigma^2 weight included."""

    mu: float
    gamma: float
    coefs: np.ndarray
    t: float = float("nan")

    def __getitem__(self, k: int) -> float:
        if k < 0:
            raise IndexError(k)
        return float(self.coefs[k]) if k < len(self.coefs) else 0.0


@dataclass
class DensityApprox:
    mu: float
    gamma: float
    epsilon: float
    hermite: HermiteSet
    x: np.ndarray
    density: np.ndarray

    def gaussian(self) -> np.ndarray:
        return gaussian_pdf(self.x, self.mu, self.gamma)

    def mass(self) -> float:
        return float(trapezoid(self.density, self.x))

    def modes(self) -> np.ndarray:
        """Grid locations of strict local maxima."""
        d = self.density
        idx = np.nonzero((d[1:-1] > d[:-2]) & (d[1:-1] >= d[2:]))[0] + 1
        return self.x[idx]

    def to_csv(self, path) -> None:
        write_density_csv(path, self.x, self.density)


def gaussian_pdf(x, mu: float, gamma: float):
    return np.exp(-0.5 * (np.asarray(x) - mu) ** 2 / gamma) / np.sqrt(2 * np.pi * gamma)


def char_fn_coefficients(params: ModelParams, path: SamplePath, state: LinearFilterState,
                         t_index: int, scheme: str = "euler") -> HermiteSet:
    """Hermite coefficients of the density correction at grid index ``t_index``."""
    if state.c_eff != params.c:
        raise ValueError("the expansion is built around the Kalman-Bucy filter with gain c")
    if not 0 <= t_index < len(state.mu):
        raise ValueError("t_index outside the grid")
    combos = [hermite_j_term(k, params.j) for k in range(MAX_K + 1)]
    specs = sorted({s for cb in combos for s in cb.specs() if not s.is_unit})
    coefs = np.zeros(MAX_K + 1)
    mu_t, g_t = state.mu[t_index], state.gamma[t_index]
    if specs:
        system = _closure_for(tuple(specs))
        compiled = compile_system(system, params.a, params.c, params.sigma)
        dt = path.grid.dt
        n = t_index
        dI = innovation_increments(path.dy[:n], state.mu[: n + 1], params.c, dt)
        idx = [system.index[s] for s in specs]
        values, bad = integrate_compiled(compiled, state.mu[: n + 1], state.gamma[: n + 1], dI, dt, idx, scheme)
        if bad is not None:
            raise FloatingPointError(f"non-finite A-term value first at step {bad}")
        table = {s: v[-1] for s, v in zip(specs, values)}
    else:
        table = {}
    s2 = params.sigma ** 2
    for k, cb in enumerate(combos):
        total = 0.0
        for spec, coef in cb.items():
            w = coef.evaluate(a=params.a, c=params.c, s2=s2, mu=mu_t, g=g_t)
            total += w * (1.0 if spec.is_unit else table[spec])
        coefs[k] = total / s2
    return HermiteSet(float(mu_t), float(g_t), coefs, t_index * path.grid.dt)


def density_eval(hermite: HermiteSet, epsilon: float, x_grid=None, n_points: int = 1001,
                 width: float = 6.0) -> DensityApprox:
    """Evaluate the first-order density on ``x_grid`` (default mu +- 6 sqrt(gamma))."""
    mu, gamma = hermite.mu, hermite.gamma
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if x_grid is None:
        half = width * np.sqrt(gamma)
        x_grid = np.linspace(mu - half, mu + half, n_points)
    x = np.asarray(x_grid, dtype=float)
    z = x - mu
    corr = np.zeros_like(x)
    fact = 1.0
    for k in range(1, MAX_K + 1):
        fact *= k
        corr += hermite[k] / fact * hermite_poly(k, z, gamma) / gamma ** k
    dens = gaussian_pdf(x, mu, gamma) * (1.0 + epsilon * corr)
    return DensityApprox(mu, gamma, epsilon, hermite, x, dens)


def write_density_csv(path, x, density) -> None:
    write_columns(path, {"x": x, "density": density})
