"""Command line entry point: ``asymfilter <command> [options]``.

Commands
    simulate   one sample path (t, X, Y)
    filter     Kalman-Bucy, expansion and clipped filters on one path
    ensemble   ISE statistics over many paths
    sweep-r    mean ISE of the clipped filters over sweep.r_values
    density    first-order conditional density at density.t
    compare    filters against the particle-filter oracle on one path

Exit status is 0 on success, 2 on invalid input and 3 when some path
produced non-finite values (outputs are still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .baselines import particle_filter
from .density import char_fn_coefficients, density_eval
from .filtering import kalman_bucy
from .harness import ExperimentConfig, OracleConfig
from .sde import path_seed, simulate_path
from .tables import write_columns

log = logging.getLogger("asymfilter")

EXIT_OK, EXIT_INPUT, EXIT_NONFINITE = 0, 2, 3


def _config(args) -> ExperimentConfig:
    cfg = harness.load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=args.seed, n_paths=args.paths, out_dir=args.out)


def _single(cfg: ExperimentConfig):
    return simulate_path(cfg.model, cfg.grid, path_seed(cfg.base_seed, 0))


def cmd_simulate(cfg, args) -> int:
    path = _single(cfg)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    name = cfg.out_path("path")
    write_columns(name, {"t": path.grid.times, "X": path.x, "Y": path.y})
    print(name)
    return EXIT_OK


def _report(cfg, summary, sweep=False) -> int:
    print(summary.format())
    if sweep:
        print(f"{'r':>6} {'variant':<8} {'mean_ISE':>10}")
        for (r, v), m in summary.sweep.items():
            print(f"{r:>6g} {v:<8} {m:>10.4g}")
    print(f"outputs in {cfg.out_dir}")
    return EXIT_NONFINITE if summary.n_nonfinite else EXIT_OK


def cmd_filter(cfg, args) -> int:
    cfg = replace(cfg, n_paths=1)
    return _report(cfg, harness.run_experiment(cfg))


def cmd_ensemble(cfg, args) -> int:
    return _report(cfg, harness.run_experiment(cfg))


def cmd_sweep(cfg, args) -> int:
    return _report(cfg, harness.run_experiment(cfg, sweep=True), sweep=True)


def cmd_compare(cfg, args) -> int:
    oracle = cfg.oracle or OracleConfig()
    cfg = replace(cfg, n_paths=1, oracle=oracle)
    return _report(cfg, harness.run_experiment(cfg))


def cmd_density(cfg, args) -> int:
    path = _single(cfg)
    state = kalman_bucy(cfg.model, path)
    k = path.grid.index(cfg.density_t)
    herm = char_fn_coefficients(cfg.model, path, state, k, cfg.scheme)
    approx = density_eval(herm, cfg.model.epsilon)
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    name = cfg.out_path("density")
    approx.to_csv(name)
    print(f"t={herm.t:g} mu={herm.mu:.6g} gamma={herm.gamma:.6g} X={path.x[k]:.6g}")
    print("c_k:", " ".join(f"{v:.6g}" for v in herm.coefs))
    print(f"mass={approx.mass():.10f} modes={np.round(approx.modes(), 4).tolist()}")
    if cfg.oracle is not None:
        pf = particle_filter(cfg.model, path, cfg.oracle.n_particles, cfg.oracle.seed,
                             snapshot_times=(k * path.grid.dt,))
        dens, edges = pf.histogram(k, bins=np.linspace(approx.x[0], approx.x[-1], 61))
        write_columns(cfg.out_path("density_pf"), {"x": 0.5 * (edges[1:] + edges[:-1]), "density": dens})
    print(name)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "ensemble": cmd_ensemble,
    "sweep-r": cmd_sweep,
    "density": cmd_density,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymfilter", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="TOML file with dotted keys")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="base seed (overrides ensemble.base_seed)")
        p.add_argument("--paths", type=int, help="number of paths (overrides ensemble.n_paths)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](cfg, args)
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONFINITE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
