"""Time stepping: NP solve, Ampere update, curl-free relaxation.

One Euler step takes ``(c^n, D^n)`` to ``(c^{n+1}, D^{n+1})``:

1. freeze ``dg`` from ``D^n`` and ``mu_cr(c^n)`` and solve ``L c^{n+1} = c^n``
   per species;
2. evaluate fluxes with ``c^{n+1}`` and push ``D`` explicitly to ``D*``;
3. relax ``D*`` until ``D/eps`` is curl-free.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from . import diagnostics as diag
from .ampere import ThetaHistory, ampere_step, theta_extrapolate
from .curlfree import RelaxReport, relax
from .errors import NonNeutral
from .grid import EdgeField, GridSpec, node_divergence
from .model import (ModelParams, charge_density, eval_dielectric_edges, eval_dielectric_nodes,
                    fixed_charge_nodes, mu_cr_all)
from .np_scheme import assemble_np_system, compute_dg, compute_fluxes, solve_np

logger = logging.getLogger(__name__)

# t -> (per-species flux sources g, Ampere source S)
SourceFn = Callable[[float], tuple[list[EdgeField], EdgeField]]


@dataclass
class Problem:
    grid: GridSpec
    params: ModelParams
    eps_edges: EdgeField
    eps_nodes: np.ndarray
    rho_f: np.ndarray
    sources: SourceFn | None = None
    # sample sources at the new time level ("new") or the old one ("old")
    source_time: str = "new"

    @classmethod
    def build(cls, grid: GridSpec, params: ModelParams, sources: SourceFn | None = None,
              source_time: str = "new") -> "Problem":
        if source_time not in ("new", "old"):
            raise ValueError("source_time must be 'new' or 'old'")
        return cls(grid, params, eval_dielectric_edges(params, grid),
                   eval_dielectric_nodes(params, grid), fixed_charge_nodes(params, grid),
                   sources, source_time)


@dataclass
class StepInfo:
    """By-products of the last step, kept for diagnostics."""

    dg: list[EdgeField]
    J: list[EdgeField]
    mu: list[np.ndarray]
    D_old: EdgeField
    relax: RelaxReport


@dataclass
class SimState:
    n: int
    t: float
    c: list[np.ndarray]
    D: EdgeField
    theta_hist: ThetaHistory = field(default_factory=ThetaHistory)
    # charge implied by a manufactured source current; zero for physical runs
    background: np.ndarray | float = 0.0
    # BDF2 memory
    c_prev: list[np.ndarray] | None = None
    D_prev: EdgeField | None = None
    background_prev: np.ndarray | float = 0.0
    dg_prev: list[EdgeField] | None = None
    theta_eff: list[EdgeField] = field(default_factory=list)
    last: StepInfo | None = None


def build_initial_displacement(c_all: Sequence[np.ndarray], rho_f, params: ModelParams,
                               grid: GridSpec, eps_edges: EdgeField | None = None,
                               eps_tol: float | None = None) -> EdgeField:
    """Gauss-law consistent, curl-free displacement for the given charges.

    Solves ``-2 kappa^2 div(eps grad phi) = rho`` with a sparse direct
    factorisation (one node pinned), sets ``D = -eps grad phi`` and runs the
    relaxation as a check.
    """
    if eps_edges is None:
        eps_edges = eval_dielectric_edges(params, grid)
    rho = charge_density(c_all, params, rho_f)
    total = grid.cell_area * rho.sum()
    if abs(total) > 1e-12:
        raise NonNeutral(f"total charge {total:.3e} is not zero")
    D = EdgeField.zeros(grid)
    if np.abs(rho).max() > 0:
        phi = _solve_poisson(rho - rho.mean(), eps_edges, params.kappa, grid)
        D = EdgeField(-eps_edges.x * (np.roll(phi, -1, axis=0) - phi) / grid.dx,
                      -eps_edges.y * (np.roll(phi, -1, axis=1) - phi) / grid.dy)
    D, _ = relax(D, eps_edges, grid, eps_tol or params.eps_tol, params.max_sweeps, params.kappa)
    return D


def poisson_matrix(eps_edges: EdgeField, kappa: float, grid: GridSpec) -> sps.csr_matrix:
    """``-2 kappa^2 div(eps grad .)`` on the periodic grid, row-major flattening."""
    nx, ny = grid.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []
    for nbr, w in ((np.roll(idx, -1, axis=0), eps_edges.x / grid.dx**2),
                   (np.roll(idx, -1, axis=1), eps_edges.y / grid.dy**2)):
        w = 2 * kappa**2 * w
        rows += [idx, idx, nbr, nbr]
        cols += [idx, nbr, nbr, idx]
        vals += [w, -w, w, -w]
    return sps.csr_matrix((np.concatenate([v.ravel() for v in vals]),
                           (np.concatenate([r.ravel() for r in rows]),
                            np.concatenate([c.ravel() for c in cols]))),
                          shape=(nx * ny, nx * ny))


def _solve_poisson(rho, eps_edges, kappa, grid):
    A = poisson_matrix(eps_edges, kappa, grid)
    # neutral rhs: drop node 0's equation and pin phi there
    sub = A[1:, 1:].tocsc()
    phi = np.zeros(grid.size)
    phi[1:] = spla.spsolve(sub, rho.ravel()[1:])
    return phi.reshape(grid.shape)


def initial_state(problem: Problem, c0: Sequence[np.ndarray], D0: EdgeField | None = None,
                  t0: float = 0.0, eps_tol: float | None = None) -> SimState:
    """State at ``t0``.  Without ``D0`` the displacement is built from the charges.

    A supplied ``D0`` is relaxed to curl-free; whatever divergence it carries
    beyond the ionic and fixed charges is recorded as background charge.
    """
    grid, params = problem.grid, problem.params
    c0 = [np.array(np.broadcast_to(c, grid.shape), dtype=float) for c in c0]
    tol = eps_tol or params.eps_tol
    if D0 is None:
        D = build_initial_displacement(c0, problem.rho_f, params, grid, problem.eps_edges, tol)
        background = 0.0
    else:
        D, _ = relax(D0, problem.eps_edges, grid, tol, params.max_sweeps, params.kappa)
        background = (2 * params.kappa**2 * node_divergence(D, grid)
                      - charge_density(c0, params, problem.rho_f))
    return SimState(n=0, t=t0, c=c0, D=D, background=background)


def _source_terms(problem: Problem, t_old: float, dt: float):
    if problem.sources is None:
        return None, None
    return problem.sources(t_old + dt if problem.source_time == "new" else t_old)


def _np_solves(problem, state, dg, dt, g, lead=1.0, rhs_base=None):
    params, grid = problem.params, problem.grid
    c_new = []
    for ell in range(params.n_species):
        rhs = state.c[ell] if rhs_base is None else rhs_base[ell]
        if g is not None:
            rhs = rhs + dt * params.kappa * node_divergence(g[ell], grid)
        system = assemble_np_system(dg[ell], dt, params.mean_kind, params, grid, state.c[ell],
                                    lead=lead, rhs=rhs)
        c_new.append(solve_np(system, params.solver_tol, x0=state.c[ell]))
    return c_new


def step_euler(state: SimState, problem: Problem, dt: float) -> SimState:
    grid, params = problem.grid, problem.params
    mu = mu_cr_all(state.c, params, problem.eps_nodes)
    dg = compute_dg(state.D, problem.eps_edges, mu, params, grid)
    g, S = _source_terms(problem, state.t, dt)

    c_new = _np_solves(problem, state, dg, dt, g)
    J = [compute_fluxes(c, d, params.mean_kind, params, grid, None if g is None else g[k])
         for k, (c, d) in enumerate(zip(c_new, dg))]

    # the carried gauge field equals the extrapolation formula but keeps its
    # divergence at rounding of the relaxation corrections, not of D / dt
    theta = (state.theta_eff[-1] if state.theta_eff
             else theta_extrapolate(state.D, state.theta_hist, dt, params))
    D_star = ampere_step(state.D, J, theta, dt, params, S)
    D_new, report = relax(D_star, problem.eps_edges, grid, params.eps_tol, params.max_sweeps,
                          params.kappa)

    background = state.background
    if S is not None:
        background = background + dt * node_divergence(S, grid)
    theta_eff = theta + report.correction * (1.0 / dt)
    return SimState(
        n=state.n + 1, t=state.t + dt, c=c_new, D=D_new,
        theta_hist=ThetaHistory(D_prev=state.D, J_prev=J, source_prev=S, valid=True),
        background=background,
        c_prev=state.c, D_prev=state.D, background_prev=state.background, dg_prev=dg,
        theta_eff=[theta_eff],
        last=StepInfo(dg=dg, J=J, mu=mu, D_old=state.D, relax=report),
    )


def step_bdf2(state: SimState, problem: Problem, dt: float) -> SimState:
    """Second-order backward differentiation with extrapolated ``dg`` and ``Theta``.

    Falls back to :func:`step_euler` until a previous level is available.
    """
    if state.c_prev is None or state.dg_prev is None or not state.theta_eff:
        return step_euler(state, problem, dt)
    grid, params = problem.grid, problem.params
    mu = mu_cr_all(state.c, params, problem.eps_nodes)
    dg_now = compute_dg(state.D, problem.eps_edges, mu, params, grid)
    dg = [2.0 * a - b for a, b in zip(dg_now, state.dg_prev)]
    g, S = _source_terms(problem, state.t, dt)

    rhs = [2.0 * c - 0.5 * cp for c, cp in zip(state.c, state.c_prev)]
    c_new = _np_solves(problem, state, dg, dt, g, lead=1.5, rhs_base=rhs)
    J = [compute_fluxes(c, d, params.mean_kind, params, grid, None if g is None else g[k])
         for k, (c, d) in enumerate(zip(c_new, dg))]

    if len(state.theta_eff) >= 2:
        theta = 2.0 * state.theta_eff[-1] - state.theta_eff[-2]
    else:
        theta = state.theta_eff[-1]
    # (3 D* - 4 D^n + D^{n-1}) / (2 dt) = -sum q J / (2 kappa^2) + S/(2 kappa^2) + Theta
    D_lin = (4.0 * state.D - state.D_prev) * (1.0 / 3.0)
    D_star = ampere_step(D_lin, J, theta, 2.0 * dt / 3.0, params, S)
    D_new, report = relax(D_star, problem.eps_edges, grid, params.eps_tol, params.max_sweeps,
                          params.kappa)

    background = (4.0 * state.background - state.background_prev) / 3.0
    if S is not None:
        background = background + (2.0 * dt / 3.0) * node_divergence(S, grid)
    theta_eff = theta + report.correction * (1.5 / dt)
    return SimState(
        n=state.n + 1, t=state.t + dt, c=c_new, D=D_new,
        theta_hist=ThetaHistory(D_prev=state.D, J_prev=J, source_prev=S, valid=True),
        background=background,
        c_prev=state.c, D_prev=state.D, background_prev=state.background, dg_prev=dg_now,
        theta_eff=[state.theta_eff[-1], theta_eff],
        last=StepInfo(dg=dg, J=J, mu=mu, D_old=state.D, relax=report),
    )


STEPPERS = {"euler": step_euler, "bdf2": step_bdf2}


def step_diagnostics(state: SimState, problem: Problem) -> diag.StepDiagnostics:
    grid, params = problem.grid, problem.params
    mu_now = mu_cr_all(state.c, params, problem.eps_nodes)
    energy = diag.discrete_energy(state.c, state.D, problem.eps_edges, mu_now, params, grid)
    gauss = diag.gauss_residual(state.D, state.c, problem.rho_f, params, grid, state.background)
    curl = diag.curl_residual(state.D, problem.eps_edges, grid)
    info = state.last
    if info is None:
        pe = dts = i1 = 0.0
        sweeps = 0
    else:
        pe = float(diag.peclet_field(info.dg).max())
        dts = diag.dt_star(info.dg, state.c, problem.eps_edges, params)
        i1 = diag.dissipation_rate_I1(info.J, state.c, info.mu, info.D_old, problem.eps_edges,
                                      params, grid)
        sweeps = info.relax.sweeps
    return diag.StepDiagnostics(
        time=state.t,
        mass_per_species=[diag.total_mass(c, grid) for c in state.c],
        energy_Fh=energy,
        min_concentration=diag.min_concentration(state.c),
        max_gauss_residual=float(np.abs(gauss).max()),
        max_curl_residual=float(np.abs(curl).max()),
        max_peclet=pe, dt_star=dts, dissipation_I1=i1, relax_sweeps=sweeps,
    )


def simulate(problem: Problem, state: SimState, dt: float, n_steps: int,
             integrator: str = "euler", callback=None) -> SimState:
    """Advance ``n_steps`` steps; ``callback(state)`` runs after each one."""
    step = STEPPERS[integrator]
    for _ in range(n_steps):
        state = step(state, problem, dt)
        if callback is not None:
            callback(state)
    return state
