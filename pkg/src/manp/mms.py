"""Manufactured-solution convergence harness.

Binary electrolyte on the periodic square ``[-1, 1]^2`` with ``eps = 0.5``,
valences ``(+1, -1)``, ``kappa = 1`` and no correlation potential.  Both
concentrations equal ``pi^2 e^{-t} cos(pi x) cos(pi y)/5 + 2`` and the
displacement is ``pi e^{-t}/2 (sin(pi x) cos(pi y), cos(pi x) sin(pi y))``.
Flux sources ``g`` enter as ``J = -kappa (grad c - q c D/eps + g)`` and the
current source ``S`` as ``dD/dt = (-J1 + J2 + S)/(2 kappa^2) + Theta``.

The exact displacement is not divergence-free while the ionic charge
vanishes; the mismatch is carried by the background charge of the state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import EdgeField, GridSpec
from .model import ModelParams, SpeciesParams
from .solver import Problem, initial_state, simulate

PI = math.pi
EPS = 0.5
KAPPA = 1.0
VALENCES = (1, -1)
AMPLITUDE = PI**2 / 5


def exact_concentration(x, y, t):
    return AMPLITUDE * math.exp(-t) * np.cos(PI * x) * np.cos(PI * y) + 2.0


def exact_displacement_x(x, y, t):
    return 0.5 * PI * math.exp(-t) * np.sin(PI * x) * np.cos(PI * y)


def exact_displacement_y(x, y, t):
    return 0.5 * PI * math.exp(-t) * np.cos(PI * x) * np.sin(PI * y)


def _gx(sign, x, y, t):
    lin = (2 * PI**3 / 5 + sign * 4 * PI - PI / 5) * math.exp(-t)
    quad = sign * PI**3 / 10 * math.exp(-2 * t)
    return lin * np.sin(PI * x) * np.cos(PI * y) + quad * np.sin(2 * PI * x) * np.cos(PI * y)**2


def _gy(sign, x, y, t):
    return sign * PI**3 / 10 * math.exp(-2 * t) * np.cos(PI * x)**2 * np.sin(2 * PI * y)


def source_g(species: int, x, y, t):
    """Flux source of species 0 or 1 as an ``(x, y)`` component pair."""
    sign = 1.0 if species == 0 else -1.0
    return _gx(sign, x, y, t), _gy(sign, x, y, t)


def source_S(x, y, t):
    return -2 * PI * math.exp(-t) * np.sin(PI * x) * np.cos(PI * y), np.zeros(np.shape(x))


def mms_params(eps_tol: float = 1e-6, **kw) -> ModelParams:
    return ModelParams(kappa=KAPPA, species=[SpeciesParams(q=q) for q in VALENCES],
                       dielectric=EPS, eps_tol=eps_tol, **kw)


def mms_grid(h: float) -> GridSpec:
    return GridSpec.square(h, -1.0, 1.0)


def exact_fields(t: float, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, EdgeField]:
    if t < 0:
        raise ValueError("t must be non-negative")
    X, Y = grid.node_coords()
    c = exact_concentration(X, Y, t)
    D = EdgeField.from_function(grid, lambda x, y: exact_displacement_x(x, y, t),
                                lambda x, y: exact_displacement_y(x, y, t))
    return c, c.copy(), D


def mms_sources(t: float, grid: GridSpec) -> tuple[EdgeField, EdgeField, EdgeField]:
    """``(g1, g2, S)`` sampled at the half points."""
    xe, ye = grid.xedge_coords()
    xn, yn = grid.yedge_coords()
    g = [EdgeField(source_g(k, xe, ye, t)[0], source_g(k, xn, yn, t)[1]) for k in (0, 1)]
    S = EdgeField(source_S(xe, ye, t)[0], source_S(xn, yn, t)[1])
    return g[0], g[1], S


def mms_problem(h: float, eps_tol: float = 1e-6, source_time: str = "old", **kw) -> Problem:
    grid = mms_grid(h)

    def sources(t):
        g1, g2, S = mms_sources(t, grid)
        return [g1, g2], S

    return Problem.build(grid, mms_params(eps_tol, **kw), sources, source_time)


def linf_error(numeric: np.ndarray, exact: np.ndarray) -> float:
    if np.shape(numeric) != np.shape(exact):
        raise ValueError("fields live on different grids")
    return float(np.max(np.abs(numeric - exact)))


def default_source_time(integrator: str) -> str:
    """Time level at which sources are sampled.

    The first-order step samples them at the start of the step; BDF2 needs
    them at the end of the step, or its order drops to one.
    """
    return "new" if integrator == "bdf2" else "old"


def run_mms(h: float, dt: float, T: float = 1.0, eps_tol: float = 1e-6,
            integrator: str = "euler", source_time: str | None = None, callback=None):
    """Integrate from the exact data to ``T``; returns ``(final_state, problem)``."""
    problem = mms_problem(h, eps_tol, source_time or default_source_time(integrator))
    n_steps = int(round(T / dt))
    if n_steps < 0 or abs(n_steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"dt={dt} does not divide T={T}")
    c1, c2, D = exact_fields(0.0, problem.grid)
    state = initial_state(problem, [c1, c2], D0=D)
    state = simulate(problem, state, dt, n_steps, integrator, callback)
    return state, problem


@dataclass
class ConvergenceRow:
    h: float
    dt: float
    error_c1: float
    order_c1: float
    error_c2: float
    order_c2: float


def default_eps_tol(h: float) -> float:
    """1e-6, tightened to 1e-7 on meshes finer than 0.025."""
    return 1e-7 if h < 0.025 - 1e-12 else 1e-6


def convergence_study(refinements, dt_rule: str = "h^2", T: float = 1.0,
                      eps_tol=None, integrator: str = "euler",
                      source_time: str | None = None) -> list[ConvergenceRow]:
    """l-infinity errors at ``T`` and observed orders ``log2(e_2h / e_h)``.

    ``dt_rule`` is ``"h/10"`` or ``"h^2"``.  ``eps_tol`` may be a number or a
    callable of ``h``; the default follows :func:`default_eps_tol`.
    """
    rules = {"h/10": lambda h: h / 10, "h^2": lambda h: h * h}
    if dt_rule not in rules:
        raise ValueError(f"dt_rule must be one of {sorted(rules)}")
    hs = sorted(refinements, reverse=True)
    rows = []
    for h in hs:
        dt = rules[dt_rule](h)
        tol = (eps_tol(h) if callable(eps_tol)
               else eps_tol if eps_tol is not None else default_eps_tol(h))
        state, problem = run_mms(h, dt, T, tol, integrator, source_time)
        c1, c2, _ = exact_fields(T, problem.grid)
        e1, e2 = linf_error(state.c[0], c1), linf_error(state.c[1], c2)
        if rows:
            o1, o2 = math.log2(rows[-1].error_c1 / e1), math.log2(rows[-1].error_c2 / e2)
        else:
            o1 = o2 = math.nan
        rows.append(ConvergenceRow(h, dt, e1, o1, e2, o2))
    return rows


def format_table(rows) -> str:
    lines = ["h,dt,error_c1,order_c1,error_c2,order_c2"]
    for r in rows:
        lines.append(f"{r.h:g},{r.dt:g},{r.error_c1:.4e},{r.order_c1:.4f},"
                     f"{r.error_c2:.4e},{r.order_c2:.4f}")
    return "\n".join(lines)
