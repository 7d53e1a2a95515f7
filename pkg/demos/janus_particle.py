import numpy as np

from manp.grid import GridSpec
from manp.model import janus_params
from manp.solver import Problem, initial_state, simulate, step_diagnostics

grid = GridSpec.square(0.04)
problem = Problem.build(grid, janus_params(kappa=0.02))
state = initial_state(problem, [0.1, 0.1])
start = step_diagnostics(state, problem)

rows = []
state = simulate(problem, state, 1e-3, 200,
                 callback=lambda s: rows.append(step_diagnostics(s, problem)))

energy = np.array([start.energy_Fh] + [d.energy_Fh for d in rows])
mass = np.array([start.mass_per_species] + [d.mass_per_species for d in rows])
print("energy decreases monotonically:", bool(np.all(np.diff(energy) <= 1e-12)))
print("relative mass drift:", np.abs(mass - mass[0]).max() / mass[0].min())
print("min concentration:", min(d.min_concentration for d in rows))
print("max gauss residual:", max(d.max_gauss_residual for d in rows))
print("max Peclet number:", max(d.max_peclet for d in rows))

# anions collect at the positively charged upper half, cations at the lower half
X, Y = grid.node_coords()
shell = np.abs(np.hypot(X, Y) - 0.5) < 0.1
for name, c in zip(("cation", "anion"), state.c):
    print(f"{name}: upper {c[shell & (Y > 0)].mean():.4f}  lower {c[shell & (Y < 0)].mean():.4f}")
