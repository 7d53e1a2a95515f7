"""Local curl-free relaxation of the displacement field.

Each cell update moves a circulating flux ``eta`` around the four edges of
one cell.  The divergence at every node is untouched, and ``eta`` is the
exact minimiser of the field energy ``sum D^2/eps`` along that direction.
Cell updates cannot change the net flux through a periodic cut, so each
sweep ends with the two uniform shifts (all x-edges, all y-edges), which
are divergence-free too and are chosen the same way.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import NotConverged
from .grid import EdgeField, GridSpec, cell_circulation


@dataclass
class RelaxReport:
    sweeps: int = 0
    final_metric: float = np.inf
    energy_trace: list[float] = field(default_factory=list)
    max_circulation: float = np.nan
    converged: bool = False
    seconds: float = 0.0
    # sum of the applied updates, accumulated from zero so its divergence
    # carries rounding of the size of the correction rather than of D
    correction: EdgeField | None = None


def potential_energy(D: EdgeField, eps: EdgeField, kappa: float, grid: GridSpec) -> float:
    return float(grid.cell_area * kappa**2 * (np.sum(D.x**2 / eps.x) + np.sum(D.y**2 / eps.y)))


def _cell_edges(cell, grid):
    i, j = cell
    ip, jp = (i + 1) % grid.nx, (j + 1) % grid.ny
    return (i, j), (ip, j), (i, jp)


def optimal_eta(cell: tuple[int, int], D: EdgeField, eps: EdgeField, grid: GridSpec) -> float:
    (i, j), (ip, _), (_, jp) = _cell_edges(cell, grid)
    dx, dy = grid.dx, grid.dy
    num = (dy * dx**2 * (D.x[i, j] / eps.x[i, j] - D.x[i, jp] / eps.x[i, jp])
           + dx * dy**2 * (D.y[ip, j] / eps.y[ip, j] - D.y[i, j] / eps.y[i, j]))
    den = (dx**2 * (1.0 / eps.x[i, j] + 1.0 / eps.x[i, jp])
           + dy**2 * (1.0 / eps.y[i, j] + 1.0 / eps.y[ip, j]))
    return -num / den


def apply_cell_update(cell: tuple[int, int], eta: float, D: EdgeField, grid: GridSpec) -> None:
    (i, j), (ip, _), (_, jp) = _cell_edges(cell, grid)
    D.x[i, j] += eta / grid.dy
    D.y[ip, j] += eta / grid.dx
    D.x[i, jp] -= eta / grid.dy
    D.y[i, j] -= eta / grid.dx


@njit(cache=True)
def _sweep(Dx, Dy, Cx, Cy, iex, iey, dx, dy):
    nx, ny = Dx.shape
    dx2, dy2 = dx * dx, dy * dy
    worst = 0.0
    for i in range(nx):
        ip = i + 1 if i + 1 < nx else 0
        for j in range(ny):
            jp = j + 1 if j + 1 < ny else 0
            num = (dy * dx2 * (Dx[i, j] * iex[i, j] - Dx[i, jp] * iex[i, jp])
                   + dx * dy2 * (Dy[ip, j] * iey[ip, j] - Dy[i, j] * iey[i, j]))
            den = dx2 * (iex[i, j] + iex[i, jp]) + dy2 * (iey[i, j] + iey[ip, j])
            eta = -num / den
            ex, ey = eta / dy, eta / dx
            Dx[i, j] += ex
            Dy[ip, j] += ey
            Dx[i, jp] -= ex
            Dy[i, j] -= ey
            Cx[i, j] += ex
            Cy[ip, j] += ey
            Cx[i, jp] -= ex
            Cy[i, j] -= ey
            if abs(eta) > worst:
                worst = abs(eta)
    return worst


@njit(cache=True)
def _uniform_shift(comp, acc, inv_eps):
    num = 0.0
    den = 0.0
    for i in range(comp.shape[0]):
        for j in range(comp.shape[1]):
            num += comp[i, j] * inv_eps[i, j]
            den += inv_eps[i, j]
    delta = -num / den
    for i in range(comp.shape[0]):
        for j in range(comp.shape[1]):
            comp[i, j] += delta
            acc[i, j] += delta
    return delta


@njit(cache=True)
def _energy(Dx, Dy, iex, iey):
    e = 0.0
    for i in range(Dx.shape[0]):
        for j in range(Dx.shape[1]):
            e += Dx[i, j] * Dx[i, j] * iex[i, j] + Dy[i, j] * Dy[i, j] * iey[i, j]
    return e


@njit(cache=True)
def _relax_loop(Dx, Dy, Cx, Cy, iex, iey, dx, dy, tol, max_sweeps, global_shift, trace):
    sweeps = 0
    metric = np.inf
    while sweeps < max_sweeps:
        metric = _sweep(Dx, Dy, Cx, Cy, iex, iey, dx, dy)
        if global_shift:
            metric = max(metric, abs(_uniform_shift(Dx, Cx, iex)) * dy,
                         abs(_uniform_shift(Dy, Cy, iey)) * dx)
        trace[sweeps] = _energy(Dx, Dy, iex, iey)
        sweeps += 1
        if metric <= tol:
            break
    return sweeps, metric


def relax(D_star: EdgeField, eps: EdgeField, grid: GridSpec, eps_tol: float = 1e-6,
          max_sweeps: int = 10_000, kappa: float = 1.0, *, global_shift: bool = True,
          raise_on_failure: bool = True) -> tuple[EdgeField, RelaxReport]:
    """Sweep cells in row-major order until the largest ``|eta|`` of a sweep is ``<= eps_tol``.

    The uniform shifts enter the metric as equivalent cell fluxes
    (``delta_x * dy`` and ``delta_y * dx``).
    """
    if eps_tol <= 0:
        raise ValueError("eps_tol must be positive")
    D = D_star.copy()
    iex = np.ascontiguousarray(1.0 / eps.x)
    iey = np.ascontiguousarray(1.0 / eps.y)
    trace = np.empty(max_sweeps)
    corr = EdgeField.zeros(grid)
    start = time.perf_counter()
    sweeps, metric = _relax_loop(D.x, D.y, corr.x, corr.y, iex, iey, grid.dx, grid.dy, eps_tol,
                                 max_sweeps, global_shift, trace)
    elapsed = time.perf_counter() - start
    scale = grid.cell_area * kappa**2
    report = RelaxReport(sweeps=int(sweeps), final_metric=float(metric),
                         energy_trace=list(scale * trace[:sweeps]),
                         converged=bool(metric <= eps_tol), seconds=elapsed,
                         correction=corr)
    report.max_circulation = float(np.abs(cell_circulation(D / eps, grid)).max())
    if not report.converged and raise_on_failure:
        raise NotConverged(f"relaxation metric {report.final_metric:.2e} > {eps_tol:.1e} "
                           f"after {report.sweeps} sweeps", field=D, report=report)
    return D, report
