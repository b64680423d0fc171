"""Cubic sensor ensemble: ISE of mu, N1, N2 and the clipped filters.

Runs a small ensemble by default (pass a path count to go bigger, e.g.
``python demos/03_cubic_ensemble.py 200``).  Unclipped second order wins
on typical paths but diverges on a few, which dominates its mean.
"""

import sys
from dataclasses import replace

from asymfilter import load_config, run_experiment

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = replace(load_config("configs/cubic.toml"), n_paths=n_paths, out_dir="out/demo_ensemble")
summary = run_experiment(cfg)
print(summary.format())
print(f"{summary.timings['paths']:.1f} s for {n_paths} paths")
