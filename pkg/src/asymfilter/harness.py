"""Experiment orchestration: ensembles, integrated squared errors, r-sweeps.

Configuration is a flat TOML file with dotted keys, e.g.::

    model.a = -0.4
    model.epsilon = 0.2
    grid.t_end = 100
    grid.dt = 0.01
    filter.order = 2
    sweep.r_values = [0.1, 0.2, 0.5, inf]
    ensemble.n_paths = 200

Every run is deterministic given the config; the CSV files it writes are
byte-identical across reruns and worker counts.
"""

from __future__ import annotations

import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import particle_filter
from .filtering import assemble, clip_coefficients, compute_coefficients, kalman_bucy
from .sde import ModelParams, SamplePath, TimeGrid, path_seed, simulate_path
from .tables import write_columns, write_csv

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

WORKERS_ENV = "ASYMFILTER_WORKERS"
TIMESERIES_COLUMNS = ("t", "X", "Y", "mu", "N1", "N2", "Ntilde1", "Ntilde2", "pf_mean")
SWEEP_VARIANTS = ("Ntilde1", "Ntilde2")

_KEYS = {
    "model.a": float, "model.b": float, "model.c": float, "model.sigma": float,
    "model.epsilon": float, "model.j": int,
    "grid.t_end": float, "grid.dt": float,
    "filter.order": int, "filter.r": float, "filter.scheme": str,
    "sweep.r_values": list,
    "ensemble.n_paths": int, "ensemble.base_seed": int,
    "oracle.n_particles": int, "oracle.seed": int,
    "density.t": float,
    "output.dir": str, "output.stem": str, "output.timeseries": str,
}


@dataclass(frozen=True)
class OracleConfig:
    n_particles: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams = ModelParams(a=-0.4, b=0.5, c=1.0, sigma=0.3, epsilon=0.2, j=3)
    grid: TimeGrid = TimeGrid(100.0, 0.01)
    order: int = 2
    r: float = 0.2
    r_values: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, math.inf)
    n_paths: int = 1
    base_seed: int = 0
    oracle: OracleConfig | None = None
    density_t: float = 10.0
    scheme: str = "euler"
    out_dir: str = "out"
    stem: str = "run"
    timeseries: str = "first"

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValueError("filter.order must be 0, 1 or 2")
        if self.n_paths < 1:
            raise ValueError("ensemble.n_paths must be at least 1")
        if not self.r > 0:
            raise ValueError("filter.r must be positive")
        if not self.r_values or any(not v > 0 for v in self.r_values):
            raise ValueError("sweep.r_values must be non-empty and positive")
        if self.timeseries not in ("none", "first", "all"):
            raise ValueError("output.timeseries must be none, first or all")
        if self.scheme not in ("euler", "milstein"):
            raise ValueError("filter.scheme must be euler or milstein")

    def with_overrides(self, seed=None, n_paths=None, out_dir=None) -> "ExperimentConfig":
        kw = {}
        if seed is not None:
            kw["base_seed"] = int(seed)
        if n_paths is not None:
            kw["n_paths"] = int(n_paths)
        if out_dir is not None:
            kw["out_dir"] = str(out_dir)
        return replace(self, **kw)

    def out_path(self, suffix: str) -> Path:
        return Path(self.out_dir) / f"{self.stem}_{suffix}.csv"


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    flat = _flatten(raw)
    unknown = sorted(set(flat) - set(_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    d = ExperimentConfig()
    get = lambda k, default: _KEYS[k](flat[k]) if k in flat else default  # noqa: E731
    model = ModelParams(
        a=get("model.a", d.model.a), b=get("model.b", d.model.b), c=get("model.c", d.model.c),
        sigma=get("model.sigma", d.model.sigma), epsilon=get("model.epsilon", d.model.epsilon),
        j=get("model.j", d.model.j),
    )
    grid = TimeGrid(get("grid.t_end", d.grid.t_end), get("grid.dt", d.grid.dt))
    oracle = None
    if flat.get("oracle.n_particles", 0):
        oracle = OracleConfig(int(flat["oracle.n_particles"]), int(flat.get("oracle.seed", 0)))
    r_values = tuple(float(v) for v in flat.get("sweep.r_values", d.r_values))
    return ExperimentConfig(
        model=model, grid=grid,
        order=get("filter.order", d.order), r=get("filter.r", d.r),
        scheme=get("filter.scheme", d.scheme), r_values=r_values,
        n_paths=get("ensemble.n_paths", d.n_paths), base_seed=get("ensemble.base_seed", d.base_seed),
        oracle=oracle, density_t=get("density.t", d.density_t),
        out_dir=get("output.dir", d.out_dir), stem=get("output.stem", d.stem),
        timeseries=get("output.timeseries", d.timeseries),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


def integrated_squared_error(x, f, dt: float) -> float:
    """Left Riemann sum of (x - f)^2 dt over the grid."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if x.shape != f.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {f.shape}")
    d = x[:-1] - f[:-1]
    return float(np.sum(d * d) * dt)


# ---------------------------------------------------------------------------
# per-path pipeline


@dataclass
class PathResult:
    index: int
    ise: dict
    sweep: dict
    first_nonfinite: int | None
    series: dict | None = None


def filter_path(cfg: ExperimentConfig, path: SamplePath, keep_series=False, r_values=()) -> PathResult:
    """Run every filter variant on one path and score it against X."""
    p, dt = cfg.model, path.grid.dt
    state = kalman_bucy(p, path)
    coeffs = compute_coefficients(p, path, state, cfg.order, cfg.scheme)
    filters = assemble(coeffs, p.epsilon)
    clipped = assemble(clip_coefficients(coeffs, p.epsilon, cfg.r), p.epsilon, clipped=True)
    series = {"t": path.grid.times, "X": path.x, "Y": path.y, "mu": state.mu}
    for n in range(1, cfg.order + 1):
        series[f"N{n}"] = filters[n]
    for n in range(1, cfg.order + 1):
        series[f"Ntilde{n}"] = clipped[n]
    if cfg.oracle is not None:
        pf = particle_filter(p, path, cfg.oracle.n_particles, np.random.SeedSequence(cfg.oracle.seed, spawn_key=(path_index(path),)))
        series["pf_mean"] = pf.mean
    if p.j == 1:
        series["kb_exact"] = kalman_bucy(p, path, c_eff=p.c + p.epsilon).mu
    ise = {k: integrated_squared_error(path.x, v, dt) for k, v in series.items() if k not in ("t", "X", "Y")}
    sweep = {}
    for r in r_values:
        cl = assemble(clip_coefficients(coeffs, p.epsilon, r), p.epsilon, clipped=True)
        for n in range(1, cfg.order + 1):
            sweep[(r, f"Ntilde{n}")] = integrated_squared_error(path.x, cl[n], dt)
    bad = coeffs.first_nonfinite
    if bad is None and not all(np.isfinite(v) for v in ise.values()):
        bad = -1
    return PathResult(-1, ise, sweep, bad, series if keep_series else None)


def path_index(path: SamplePath) -> int:
    seed = path.seed
    if isinstance(seed, np.random.SeedSequence) and seed.spawn_key:
        return int(seed.spawn_key[-1])
    return 0


def _run_one(args) -> PathResult:
    cfg, k, keep, r_values = args
    path = simulate_path(cfg.model, cfg.grid, path_seed(cfg.base_seed, k))
    res = filter_path(cfg, path, keep, r_values)
    res.index = k
    return res


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def map_paths(cfg: ExperimentConfig, keep_first=True, r_values=(), workers=None) -> list:
    """Process paths 0..n_paths-1; results come back in path order."""
    workers = worker_count() if workers is None else workers
    jobs = [
        (cfg, k, (cfg.timeseries == "all") or (keep_first and cfg.timeseries == "first" and k == 0), tuple(r_values))
        for k in range(cfg.n_paths)
    ]
    if workers == 1 or cfg.n_paths == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, jobs, chunksize=max(1, cfg.n_paths // (4 * workers))))


# ---------------------------------------------------------------------------
# summaries


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        return {"n": 0, "min": math.nan, "median": math.nan, "mean": math.nan, "max": math.nan}
    return {"n": len(v), "min": float(v.min()), "median": float(np.median(v)),
            "mean": float(v.mean()), "max": float(v.max())}


@dataclass
class RunSummary:
    """Per-path ISE values per variant plus summary rows.

    ``inclusive`` summarises every path (a non-finite ISE makes the
    statistics non-finite); ``exclusive`` drops paths whose value is not
    finite.  ``n_nonfinite`` counts paths with any non-finite trajectory.
    """

    variants: tuple
    per_path: dict
    inclusive: dict
    exclusive: dict
    n_nonfinite: int
    sweep: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    results: list = field(default_factory=list, repr=False)

    @classmethod
    def from_results(cls, results: list, timings=None) -> "RunSummary":
        variants = tuple(results[0].ise)
        per_path = {v: np.array([r.ise[v] for r in results]) for v in variants}
        inclusive = {v: summarize(x) for v, x in per_path.items()}
        exclusive = {v: summarize(x[np.isfinite(x)]) for v, x in per_path.items()}
        sweep = {}
        for key in results[0].sweep:
            vals = np.array([r.sweep[key] for r in results])
            vals = vals[np.isfinite(vals)]
            sweep[key] = float(vals.mean()) if len(vals) else math.nan
        n_bad = sum(r.first_nonfinite is not None for r in results)
        return cls(variants, per_path, inclusive, exclusive, n_bad, sweep, dict(timings or {}), results)

    def summary_rows(self):
        for scope, table in (("inclusive", self.inclusive), ("exclusive", self.exclusive)):
            for v in self.variants:
                s = table[v]
                yield (v, scope, s["n"], s["min"], s["median"], s["mean"], s["max"])

    def format(self) -> str:
        lines = [f"{'variant':<10} {'scope':<10} {'n':>5} {'min':>10} {'median':>10} {'mean':>10} {'max':>10}"]
        for v, scope, n, lo, med, mean, hi in self.summary_rows():
            lines.append(f"{v:<10} {scope:<10} {n:>5} {lo:>10.4g} {med:>10.4g} {mean:>10.4g} {hi:>10.4g}")
        if self.n_nonfinite:
            lines.append(f"non-finite paths: {self.n_nonfinite}")
        return "\n".join(lines)


def write_outputs(cfg: ExperimentConfig, summary: RunSummary, sweep=False) -> list:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for res in summary.results:
        if res.series is None:
            continue
        cols = {k: res.series[k] for k in (*TIMESERIES_COLUMNS, "kb_exact") if k in res.series}
        name = cfg.out_path("timeseries" if cfg.n_paths == 1 else f"timeseries_{res.index:04d}")
        write_columns(name, cols)
        written.append(name)
    name = cfg.out_path("stats")
    write_csv(name, ("path", *summary.variants),
              ((r.index, *(r.ise[v] for v in summary.variants)) for r in summary.results))
    written.append(name)
    name = cfg.out_path("summary")
    write_csv(name, ("variant", "scope", "n", "min", "median", "mean", "max"), summary.summary_rows())
    written.append(name)
    if sweep:
        name = cfg.out_path("sweep")
        write_csv(name, ("r", "variant", "mean_ISE"),
                  ((r, v, m) for (r, v), m in summary.sweep.items()))
        written.append(name)
    return written


def run_experiment(cfg: ExperimentConfig, sweep=False, write=True) -> RunSummary:
    """Simulate, filter and score ``cfg.n_paths`` paths; optionally write CSVs."""
    if cfg.n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    t0 = time.perf_counter()
    results = map_paths(cfg, r_values=cfg.r_values if sweep else ())
    timings = {"paths": time.perf_counter() - t0}
    summary = RunSummary.from_results(results, timings)
    for r in results:
        if r.first_nonfinite is not None:
            log.warning("path %d: non-finite trajectory (step %s)", r.index, r.first_nonfinite)
    if write:
        write_outputs(cfg, summary, sweep)
    return summary
