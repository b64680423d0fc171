"""Mean ISE of the clipped filters as a function of the clipping ratio r.

Small r keeps the clipped filter close to Kalman-Bucy, r = inf gives back
the raw expansion; in between there is a sweet spot.
"""

import sys
from dataclasses import replace

from asymfilter import load_config, run_experiment

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 20
cfg = replace(load_config("configs/cubic.toml"), n_paths=n_paths, out_dir="out/demo_sweep")
summary = run_experiment(cfg, sweep=True)
mu = summary.inclusive["mu"]["mean"]
print(f"mean ISE of mu: {mu:.4f}")
print(f"{'r':>5}  {'Ntilde1':>9}  {'Ntilde2':>9}")
for r in cfg.r_values:
    print(f"{r:>5g}  {summary.sweep[(r, 'Ntilde1')]:>9.4f}  {summary.sweep[(r, 'Ntilde2')]:>9.4f}")
