"""First-order conditional density at t = 10 against a particle histogram."""

import numpy as np

from asymfilter import ModelParams, TimeGrid, char_fn_coefficients, density_eval, kalman_bucy, particle_filter, simulate_path
from asymfilter.sde import path_seed

p = ModelParams(a=-0.4, b=0.5, c=1.0, sigma=0.3, epsilon=0.2, j=3)
grid = TimeGrid(10.0, 0.01)
path = simulate_path(p, grid, path_seed(2024, 0))
state = kalman_bucy(p, path)
k = grid.n_steps

herm = char_fn_coefficients(p, path, state, k)
approx = density_eval(herm, p.epsilon, n_points=41, width=3.0)
print(f"X_t = {path.x[k]:.4f}, mu = {herm.mu:.4f}, gamma = {herm.gamma:.4f}")
print("Hermite coefficients c_1..c_4:", np.round(herm.coefs[1:], 5))
print(f"mass on mu +- 8 sd: {density_eval(herm, p.epsilon, n_points=4001, width=8.0).mass():.8f}")

pf = particle_filter(p, path, 20_000, 1, snapshot_times=(10.0,))
edges = np.linspace(approx.x[0], approx.x[-1], 42)
hist, _ = pf.histogram(k, edges)
print(f"\n{'x':>8} {'gauss':>8} {'expansion':>10} {'particles':>10}")
for x, g, d, h in zip(approx.x, approx.gaussian(), approx.density, hist):
    print(f"{x:>8.3f} {g:>8.3f} {d:>10.3f} {h:>10.3f}")
