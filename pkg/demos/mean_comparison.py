from manp.errors import NumericalFailure
from manp.grid import GridSpec
from manp.model import janus_params
from manp.solver import Problem, initial_state, simulate

# strong dielectric contrast and a thin Debye layer drive large potential jumps
grid = GridSpec.square(0.02)
for kind in ("entropic", "harmonic", "geometric", "arithmetic"):
    problem = Problem.build(grid, janus_params(kappa=0.01, eps_m=1.0, eps_w=78.0,
                                               mean_kind=kind))
    lows = []
    try:
        simulate(problem, initial_state(problem, [0.1, 0.1]), 1e-3, 100,
                 callback=lambda s: lows.append(min(c.min() for c in s.c)))
        print(f"{kind:10s} min concentration {min(lows):.3e}")
    except NumericalFailure as exc:
        print(f"{kind:10s} aborted after {len(lows)} steps: {exc}")

# all four stay positive; they differ by tens of orders of magnitude in the
# depleted layer, which is where the choice of mean shows up
