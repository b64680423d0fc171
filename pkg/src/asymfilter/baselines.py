"""Independent reference filters.

* a bootstrap particle filter for the full nonlinear observation model;
* forward-filtering backward-sampling of the linear-Gaussian reference model,
  which draws whole signal paths from their conditional law given the
  observations and so gives Monte Carlo estimates of the J-terms directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .sde import ModelParams, SamplePath

log = logging.getLogger(__name__)


@dataclass
class ParticleCloud:
    positions: np.ndarray
    weights: np.ndarray
    resample_threshold: float = 0.5

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    def ess(self) -> float:
        return 1.0 / np.sum(self.weights ** 2)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.positions))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot(self.weights, (self.positions - m) ** 2))


def systematic_resample(weights: np.ndarray, rng) -> np.ndarray:
    """Indices drawn by systematic resampling."""
    n = len(weights)
    u = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, u, side="right")


@dataclass
class ParticleFilterResult:
    mean: np.ndarray
    ess: np.ndarray
    variance: np.ndarray
    n_resampled: int
    degenerate: bool
    snapshots: dict = field(default_factory=dict)

    def standard_error(self) -> np.ndarray:
        """Per-step Monte Carlo standard error sqrt(var / ESS)."""
        return np.sqrt(self.variance / self.ess)

    def histogram(self, t_index: int, bins):
        pos, w = self.snapshots[t_index]
        return np.histogram(pos, bins=bins, weights=w, density=True)


def particle_filter(params: ModelParams, path: SamplePath, n_particles: int, seed,
                    snapshot_times=(), resample_threshold: float = 0.5) -> ParticleFilterResult:
    """Bootstrap filter with Girsanov log-likelihood increments.

    At step k each particle is reweighted by
    exp((h(x) dY_k - h(x)^2 dt / 2) / sigma^2), then propagated by one
    Euler-Maruyama step of the signal.  ``mean[k]`` is the estimate given
    observations up to time k * dt.
    """
    if n_particles < 100:
        raise ValueError("n_particles must be at least 100")
    rng = np.random.default_rng(seed)
    grid = path.grid
    dt, n_steps = grid.dt, grid.n_steps
    dy = path.dy
    snap_idx = {grid.index(t) for t in snapshot_times}

    cloud = ParticleCloud(np.zeros(n_particles), np.full(n_particles, 1.0 / n_particles), resample_threshold)
    mean = np.zeros(n_steps + 1)
    var = np.zeros(n_steps + 1)
    ess = np.full(n_steps + 1, float(n_particles))
    snapshots = {}
    if 0 in snap_idx:
        snapshots[0] = (cloud.positions.copy(), cloud.weights.copy())
    logw = np.zeros(n_particles)
    inv_s2 = 1.0 / params.sigma ** 2
    growth = 1.0 + params.a * dt
    noise = params.b * np.sqrt(dt)
    n_resampled = 0
    low_streak = 0
    degenerate = False
    for k in range(n_steps):
        x = cloud.positions
        h = params.h(x)
        logw = logw + (h * dy[k] - 0.5 * h * h * dt) * inv_s2
        w = np.exp(logw - logw.max())
        w /= w.sum()
        cur_ess = 1.0 / np.sum(w * w)
        if cur_ess < 1e-3 * n_particles:
            low_streak += 1
            if low_streak > 10 and not degenerate:
                degenerate = True
                log.warning("particle filter degenerate: ESS %.1f at step %d", cur_ess, k)
        else:
            low_streak = 0
        if cur_ess < resample_threshold * n_particles:
            idx = systematic_resample(w, rng)
            x = x[idx]
            w = np.full(n_particles, 1.0 / n_particles)
            logw = np.zeros(n_particles)
            n_resampled += 1
        x = growth * x + noise * rng.standard_normal(n_particles)
        cloud = ParticleCloud(x, w, resample_threshold)
        mean[k + 1] = np.dot(w, x)
        var[k + 1] = np.dot(w, (x - mean[k + 1]) ** 2)
        ess[k + 1] = 1.0 / np.sum(w * w)
        if k + 1 in snap_idx:
            snapshots[k + 1] = (x.copy(), w.copy())
    return ParticleFilterResult(mean, ess, var, n_resampled, degenerate, snapshots)


# ---------------------------------------------------------------------------
# conditional path sampling for the linear reference model


@dataclass
class _ForwardPass:
    m_filt: np.ndarray
    p_filt: np.ndarray
    m_pred: np.ndarray
    p_pred: np.ndarray


def _forward(params: ModelParams, dy: np.ndarray, dt: float) -> _ForwardPass:
    """Discrete Kalman filter for x_{k+1} = (1 + a dt) x_k + N(0, b^2 dt),
    dy_k = c x_k dt + N(0, sigma^2 dt), x_0 = 0."""
    n = len(dy)
    phi = 1.0 + params.a * dt
    H, R, Q = params.c * dt, params.sigma ** 2 * dt, params.b ** 2 * dt
    m_pred = np.zeros(n + 1)
    p_pred = np.zeros(n + 1)
    m_filt = np.zeros(n)
    p_filt = np.zeros(n)
    for k in range(n):
        m, p = m_pred[k], p_pred[k]
        s = H * H * p + R
        gain = p * H / s
        m_filt[k] = m + gain * (dy[k] - H * m)
        p_filt[k] = p - gain * H * p
        m_pred[k + 1] = phi * m_filt[k]
        p_pred[k + 1] = phi * phi * p_filt[k] + Q
    return _ForwardPass(m_filt, p_filt, m_pred, p_pred)


def conditional_path_moments(params: ModelParams, path: SamplePath, t: float, n_samples: int,
                             seed, j: int | None = None,
                             batch: int = 20_000) -> dict:
    """Monte Carlo draws of functionals of X given Y on [0, t], linear model.

    Signal paths are sampled from the conditional law of the linear reference
    model (gain ``c``, no perturbation) by backward sampling.  For each draw
    we form

        x_t            the terminal state,
        I1 = sum_k g(x_k) (dY_k - c x_k dt),
        I2 = sum_{k<l} g(x_k) dlam_k g(x_l) dlam_l = (I1^2 - sum_k (g dlam)_k^2) / 2.

    Returns the raw per-sample arrays (length ``n_samples``) under keys
    ``"x"``, ``"I1"``, ``"I2"``.
    """
    j = params.j if j is None else j
    dt = path.grid.dt
    n = path.grid.index(t)
    dy = path.dy[:n]
    fwd = _forward(params, dy, dt)
    phi = 1.0 + params.a * dt
    rng = np.random.default_rng(seed)
    xs, i1s, i2s = [], [], []
    remaining = n_samples
    while remaining > 0:
        m = min(batch, remaining)
        remaining -= m
        x = fwd.m_pred[n] + np.sqrt(fwd.p_pred[n]) * rng.standard_normal(m)
        x_t = x.copy()
        i1 = np.zeros(m)
        sq = np.zeros(m)
        for k in range(n - 1, -1, -1):
            pf = fwd.p_filt[k]
            if pf > 0:
                jk = pf * phi / fwd.p_pred[k + 1]
                mean = fwd.m_filt[k] + jk * (x - phi * fwd.m_filt[k])
                var = max(pf - jk * phi * pf, 0.0)
                x = mean + np.sqrt(var) * rng.standard_normal(m)
            else:
                x = np.full(m, fwd.m_filt[k])
            term = x ** j * (dy[k] - params.c * x * dt)
            i1 += term
            sq += term * term
        xs.append(x_t)
        i1s.append(i1)
        i2s.append(0.5 * (i1 * i1 - sq))
    return {"x": np.concatenate(xs), "I1": np.concatenate(i1s), "I2": np.concatenate(i2s)}


def covariance_estimate(u: np.ndarray, v: np.ndarray) -> tuple:
    """Sample covariance of paired draws and its standard error."""
    prod = (u - u.mean()) * (v - v.mean())
    return float(prod.mean()), float(prod.std(ddof=1) / np.sqrt(len(u)))
