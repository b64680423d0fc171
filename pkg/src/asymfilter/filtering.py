"""Kalman-Bucy baseline, expansion coefficients and the clipped filter."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .aterms import ATermSystem, compile_system, derive_closure, innovation_increments, integrate_compiled
from .sde import ModelParams, SamplePath
from .wick import ATermCombo, decompose_j_term

log = logging.getLogger(__name__)


@dataclass
class LinearFilterState:
    """Kalman-Bucy mean mu_{t;t} and variance gamma(t) on a path's grid."""

    mu: np.ndarray
    gamma: np.ndarray
    c_eff: float


def riccati(params: ModelParams, n_steps: int, dt: float, c_eff: float | None = None) -> np.ndarray:
    """Euler solution of d gamma/dt = -c^2 gamma^2 / sigma^2 + 2 a gamma + b^2, gamma(0) = 0."""
    c = params.c if c_eff is None else c_eff
    gamma = np.empty(n_steps + 1)
    gamma[0] = 0.0
    k2 = c * c / params.sigma ** 2
    for k in range(n_steps):
        g = gamma[k]
        gamma[k + 1] = g + (-k2 * g * g + 2.0 * params.a * g + params.b ** 2) * dt
    return gamma


def riccati_fixed_point(params: ModelParams, c_eff: float | None = None) -> float:
    """Positive root of -c^2 g^2 / sigma^2 + 2 a g + b^2 = 0.

    Written as b^2 / (sqrt(a^2 + c^2 b^2 / sigma^2) - a) to avoid cancellation
    for small gains; infinite when c = 0 and a >= 0.
    """
    c = params.c if c_eff is None else c_eff
    k2 = c * c / params.sigma ** 2
    den = np.sqrt(params.a ** 2 + k2 * params.b ** 2) - params.a
    if not den > 0:
        return np.inf
    with np.errstate(over="ignore"):
        return float(np.divide(params.b ** 2, den))


def kalman_bucy_batch(params: ModelParams, dy: np.ndarray, dt: float, c_eff: float | None = None):
    """Kalman-Bucy filter for a stack of observation increments (paths x steps)."""
    c = params.c if c_eff is None else c_eff
    dy = np.atleast_2d(dy)
    n_paths, n_steps = dy.shape
    gamma = riccati(params, n_steps, dt, c)
    gain = c * gamma / params.sigma ** 2
    mu = np.empty((n_paths, n_steps + 1))
    mu[:, 0] = 0.0
    for k in range(n_steps):
        m = mu[:, k]
        mu[:, k + 1] = m + params.a * m * dt + gain[k] * (dy[:, k] - c * m * dt)
    return mu, gamma


def kalman_bucy(params: ModelParams, path: SamplePath, c_eff: float | None = None) -> LinearFilterState:
    """Kalman-Bucy filter with observation gain ``c_eff`` (default ``params.c``).

    The expansion always uses the gain ``c``; ``c + eps`` gives the exact
    filter when g(x) = x.
    """
    c = params.c if c_eff is None else c_eff
    mu, gamma = kalman_bucy_batch(params, path.dy, path.grid.dt, c)
    return LinearFilterState(mu[0], gamma, c)


def compositions(total: int):
    """Ordered tuples of positive integers summing to ``total``."""
    if total == 0:
        yield ()
        return
    for first in range(1, total + 1):
        for rest in compositions(total - first):
            yield (first,) + rest


@dataclass
class ExpansionCoefficients:
    """Coefficients n_t^[0..N] and optionally their clipped versions."""

    order: int
    n_coef: np.ndarray
    clipped: np.ndarray | None = None
    r: float = np.inf
    first_nonfinite: int | None = None
    j_values: dict = field(default_factory=dict, repr=False)


class ExpansionEngine:
    """Closed A-term system for g(x) = x^j up to a given order.

    The closure is derived once per (j, order); numeric compilation happens
    per parameter set.
    """

    def __init__(self, j: int, order: int):
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        self.j = j
        self.order = order
        self.readouts = {}
        for k in range(1, order + 1):
            self.readouts[("X", k)] = decompose_j_term(1, j, k)
            self.readouts[("1", k)] = decompose_j_term(0, j, k)
        self._record = sorted({s for c in self.readouts.values() for s in c.specs() if not s.is_unit})
        self.system = _closure_for(tuple(self._record)) if self._record else None
        self._compiled = {}

    def _compile(self, params: ModelParams):
        key = (params.a, params.c, params.sigma)
        if key not in self._compiled:
            self._compiled[key] = compile_system(self.system, *key)
        return self._compiled[key]

    def j_values(self, params: ModelParams, path: SamplePath, state: LinearFilterState,
                 scheme: str = "euler") -> tuple:
        """J_t^k(X_t) and J_t^k(1) for k <= order (no sigma factors)."""
        mu, gamma = state.mu, state.gamma
        if len(mu) != len(path.y):
            raise ValueError("filter state and path are on different grids")
        out = {("X", 0): mu, ("1", 0): np.ones_like(mu)}
        bad = None
        if self.order:
            compiled = self._compile(params)
            idx = [self.system.index[s] for s in self._record]
            dI = innovation_increments(path.dy, mu, params.c, path.grid.dt)
            values, bad = integrate_compiled(compiled, mu, gamma, dI, path.grid.dt, idx, scheme)
            table = dict(zip(self._record, values))
            for key, combo in self.readouts.items():
                out[key] = _evaluate(combo, table, mu, gamma, params)
        return out, bad


@lru_cache(maxsize=None)
def _closure_for(seeds: tuple) -> ATermSystem:
    return derive_closure(seeds)


@lru_cache(maxsize=None)
def _engine(j: int, order: int) -> ExpansionEngine:
    return ExpansionEngine(j, order)


def _evaluate(combo: ATermCombo, table: dict, mu, gamma, params: ModelParams):
    total = np.zeros_like(mu)
    for spec, coef in combo.items():
        w = coef.evaluate(a=params.a, c=params.c, s2=params.sigma ** 2, mu=mu, g=gamma)
        total = total + w * (1.0 if spec.is_unit else table[spec])
    return total


def combine(jx: dict, j1: dict, n: int, sigma: float) -> np.ndarray:
    """n-th expansion coefficient from J_t^k(X_t) and J_t^k(1).

    sigma^(-2n) * sum_k sum_{compositions i of n-k} (-1)^len(i) J^k(X) prod J^i(1)
    """
    total = 0.0
    for k in range(n + 1):
        for comp in compositions(n - k):
            term = jx[k]
            for i in comp:
                term = term * j1[i]
            total = total + (-1) ** len(comp) * term
    return total / sigma ** (2 * n)


def compute_coefficients(params: ModelParams, path: SamplePath, state: LinearFilterState, order: int,
                         scheme: str = "euler") -> ExpansionCoefficients:
    """Expansion coefficients n_t^[0..order] along one path.

    ``scheme`` selects the integrator of the A-term system ("euler" or
    "milstein").
    """
    if state.c_eff != params.c:
        raise ValueError("the expansion is built around the Kalman-Bucy filter with gain c")
    engine = _engine(params.j, order)
    values, bad = engine.j_values(params, path, state, scheme)
    jx = {k: values[("X", k)] for k in range(order + 1)}
    j1 = {k: values[("1", k)] for k in range(order + 1)}
    coefs = np.empty((order + 1, len(state.mu)))
    coefs[0] = state.mu
    for n in range(1, order + 1):
        coefs[n] = combine(jx, j1, n, params.sigma)
    if bad is None and not np.all(np.isfinite(coefs)):
        bad = int(np.argmax(~np.all(np.isfinite(coefs), axis=0)))
    return ExpansionCoefficients(order, coefs, first_nonfinite=bad, j_values=values)


def assemble(coeffs: ExpansionCoefficients, epsilon: float, clipped: bool = False) -> np.ndarray:
    """Filters N^[0..N] (rows) as partial sums of n^[i] eps^i."""
    base = coeffs.clipped if clipped else coeffs.n_coef
    if base is None:
        raise ValueError("coefficients have not been clipped")
    powers = epsilon ** np.arange(coeffs.order + 1)
    return np.cumsum(base * powers[:, None], axis=0)


def clip_coefficients(coeffs: ExpansionCoefficients, epsilon: float, r: float) -> ExpansionCoefficients:
    """Cap |n^[i] eps^i| at r |n~^[i-1] eps^(i-1)|, keeping the sign."""
    if not r > 0:
        raise ValueError("r must be positive")
    n = coeffs.n_coef
    if np.isinf(r):
        return ExpansionCoefficients(coeffs.order, n, n.copy(), r, coeffs.first_nonfinite, coeffs.j_values)
    out = np.empty_like(n)
    out[0] = n[0]
    for i in range(1, coeffs.order + 1):
        term = n[i] * epsilon ** i
        cap = r * np.abs(out[i - 1] * epsilon ** (i - 1))
        mag = np.abs(term)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            capped = np.where(mag > cap, (cap / mag) * n[i], n[i])
        capped = np.where(n[i] == 0, 0.0, capped)
        out[i] = capped
    return ExpansionCoefficients(coeffs.order, n, out, r, coeffs.first_nonfinite, coeffs.j_values)
