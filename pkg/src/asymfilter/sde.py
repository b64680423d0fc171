"""Sample paths of the perturbed linear model.

    dX = a X dt + b dV,                    X_0 = 0
    dY = (c X + eps * X**j) dt + sigma dW,  Y_0 = 0

discretised with explicit Euler-Maruyama on a uniform grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float
    c: float
    sigma: float
    epsilon: float
    j: int = 3

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if int(self.j) != self.j or self.j < 0:
            raise ValueError("j must be a non-negative integer")

    def h(self, x):
        """Observation drift c x + eps x**j."""
        return self.c * x + self.epsilon * x ** self.j


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.dt >= self.t_end:
            raise ValueError("dt must be smaller than t_end")
        if abs(self.n_steps * self.dt - self.t_end) > 1e-9 * self.t_end:
            raise ValueError(f"t_end={self.t_end} is not a multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if not 0 <= k <= self.n_steps:
            raise ValueError(f"time {t} outside the grid")
        return k


@dataclass(frozen=True, eq=False)
class SamplePath:
    grid: TimeGrid
    x: np.ndarray
    y: np.ndarray
    seed: object = None

    def __post_init__(self):
        if len(self.x) != len(self.y) or len(self.x) != self.grid.n_steps + 1:
            raise ValueError("x and y must have n_steps + 1 points")

    @property
    def dy(self) -> np.ndarray:
        return np.diff(self.y)


def path_streams(seed) -> tuple:
    """Independent generators for the signal and observation noise of one path."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sig, obs = ss.spawn(2)
    return np.random.default_rng(sig), np.random.default_rng(obs)


def simulate_signal(params: ModelParams, grid: TimeGrid, rng) -> np.ndarray:
    n, dt = grid.n_steps, grid.dt
    xi = rng.standard_normal(n) * (params.b * np.sqrt(dt))
    # x[k+1] = (1 + a dt) x[k] + xi[k] as an AR(1) filter
    x = lfilter([1.0], [1.0, -(1.0 + params.a * dt)], xi)
    return np.concatenate(([0.0], x))


def observe(params: ModelParams, grid: TimeGrid, x: np.ndarray, rng) -> np.ndarray:
    """Observation path for a given signal; left-point drift."""
    n, dt = grid.n_steps, grid.dt
    eta = rng.standard_normal(n)
    dy = params.h(x[:-1]) * dt + params.sigma * np.sqrt(dt) * eta
    return np.concatenate(([0.0], np.cumsum(dy)))


def simulate_path(params: ModelParams, grid: TimeGrid, seed) -> SamplePath:
    """One Euler-Maruyama path; deterministic given ``seed``."""
    sig_rng, obs_rng = path_streams(seed)
    x = simulate_signal(params, grid, sig_rng)
    y = observe(params, grid, x, obs_rng)
    return SamplePath(grid, x, y, seed)


def path_seed(base_seed: int, k: int) -> np.random.SeedSequence:
    """Seed of path ``k`` in an ensemble; hashes (base_seed, k)."""
    return np.random.SeedSequence(int(base_seed), spawn_key=(int(k),))


def simulate_ensemble(params: ModelParams, grid: TimeGrid, n_paths: int, base_seed: int) -> list:
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    return [simulate_path(params, grid, path_seed(base_seed, k)) for k in range(n_paths)]
