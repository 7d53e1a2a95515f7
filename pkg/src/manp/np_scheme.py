"""Semi-implicit Scharfetter-Gummel step for the Nernst-Planck equations.

The flux across edge ``(i+1/2, j)`` is

    J = -(kappa/dx) * [B(-dg) c[i+1, j] - B(dg) c[i, j]]

with ``dg`` the jump of ``g = q*phi + mu_cr`` across the edge.  Choosing
``B`` selects how ``exp(-g)`` is averaged onto the edge; the entropic mean
gives the Bernoulli function.  For any positive ``B`` the implicit operator
is a column-stochastic M-matrix, so the update preserves mass and sign.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
from scipy.special import expit

from .errors import PositivityLost, SolverDiverged
from .grid import EdgeField, GridSpec
from .model import MEAN_KINDS, ModelParams

_SERIES_CUTOFF = 1e-4


def bernoulli(z):
    """``z / (exp(z) - 1)`` with ``B(0) = 1``, stable for any finite ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    pos = (z > 0) & ~small
    neg = (z < 0) & ~small
    zs = z[small]
    out[small] = 1.0 - zs / 2.0 + zs**2 / 12.0 - zs**4 / 720.0
    zp = z[pos]
    # z e^{-z} / (1 - e^{-z}) never overflows
    out[pos] = zp * np.exp(-zp) / -np.expm1(-zp)
    zn = z[neg]
    out[neg] = zn / np.expm1(zn)
    return out[()] if out.ndim == 0 else out


def b_function(kind: str, z):
    """Edge weight for the chosen mean of ``exp(-g)``; ``B(0) = 1`` for all kinds."""
    z = np.asarray(z, dtype=float)
    if kind == "entropic":
        return bernoulli(z)
    with np.errstate(over="ignore"):
        if kind == "arithmetic":
            return 0.5 * (1.0 + np.exp(-z))
        if kind == "geometric":
            return np.exp(-0.5 * z)
    if kind == "harmonic":
        return 2.0 * expit(-z)
    raise ValueError(f"unknown mean kind {kind!r}; choose from {MEAN_KINDS}")


def compute_dg(D: EdgeField, eps_edges: EdgeField, mu_cr_all: Sequence[np.ndarray],
               params: ModelParams, grid: GridSpec) -> list[EdgeField]:
    out = []
    for sp, mu in zip(params.species, mu_cr_all):
        mu = np.broadcast_to(mu, grid.shape)
        out.append(EdgeField(
            -grid.dx * sp.q * D.x / eps_edges.x + (np.roll(mu, -1, axis=0) - mu),
            -grid.dy * sp.q * D.y / eps_edges.y + (np.roll(mu, -1, axis=1) - mu),
        ))
    return out


@dataclass
class NpSystem:
    """``matrix @ c_new = rhs`` on the row-major flattening ``k = i*ny + j``."""

    matrix: sps.csr_matrix
    rhs: np.ndarray
    shape: tuple[int, int]


def transport_operator(dg: EdgeField, kind: str, kappa: float, grid: GridSpec) -> sps.csr_matrix:
    """Sparse matrix ``A`` with ``(A c)[i, j]`` = discrete divergence of the flux."""
    nx, ny = grid.shape
    idx = np.arange(nx * ny).reshape(nx, ny)
    right = np.roll(idx, -1, axis=0)
    up = np.roll(idx, -1, axis=1)
    ax = kappa / grid.dx**2
    ay = kappa / grid.dy**2
    bxp, bxm = b_function(kind, dg.x), b_function(kind, -dg.x)
    byp, bym = b_function(kind, dg.y), b_function(kind, -dg.y)
    # each edge couples its two nodes; flux leaves the left node at rate B(dg),
    # enters from the right node at rate B(-dg)
    rows, cols, vals = [], [], []
    for src, dst, wp, wm, a in ((idx, right, bxp, bxm, ax), (idx, up, byp, bym, ay)):
        rows += [src, src, dst, dst]
        cols += [src, dst, src, dst]
        vals += [a * wp, -a * wm, -a * wp, a * wm]
    rows = np.concatenate([r.ravel() for r in rows])
    cols = np.concatenate([c.ravel() for c in cols])
    vals = np.concatenate([v.ravel() for v in vals])
    return sps.csr_matrix((vals, (rows, cols)), shape=(nx * ny, nx * ny))


def assemble_np_system(dg: EdgeField, dt: float, kind: str, params: ModelParams,
                       grid: GridSpec, c_old: np.ndarray, *, lead: float = 1.0,
                       rhs: np.ndarray | None = None) -> NpSystem:
    """Backward-Euler operator ``I + dt*A``.

    ``lead`` replaces the identity coefficient (3/2 for BDF2) and ``rhs``
    overrides the right-hand side, which defaults to ``c_old``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    A = transport_operator(dg, kind, params.kappa, grid)
    L = (lead * sps.identity(grid.size, format="csr") + dt * A).tocsr()
    b = np.asarray(c_old if rhs is None else rhs, dtype=float).ravel().copy()
    return NpSystem(L, b, grid.shape)


def solve_np(system: NpSystem, solver_tol: float = 1e-13, x0: np.ndarray | None = None,
             maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned BiCGSTAB, checked against the true residual."""
    L, b = system.matrix, system.rhs
    n = b.size
    if not np.isfinite(L.data).all():
        raise SolverDiverged("non-finite entries in the transport matrix")
    diag = L.diagonal()
    M = spla.LinearOperator((n, n), matvec=lambda r: r / diag, dtype=float)
    maxiter = maxiter or 10 * n
    guess = b.copy() if x0 is None else np.asarray(x0, float).ravel().copy()
    with np.errstate(all="ignore"):
        x, info = spla.bicgstab(L, b, x0=guess, rtol=solver_tol, atol=0.0, M=M, maxiter=maxiter)
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(b - L @ x) / (bnorm if bnorm > 0 else 1.0)
    if info < 0 or not np.isfinite(res) or res > max(10 * solver_tol, 1e-14):
        # BiCGSTAB can break down on badly scaled systems; GMRES is the fallback
        with np.errstate(all="ignore"):
            x, info = spla.gmres(L, b, x0=guess, rtol=solver_tol, atol=0.0, M=M,
                                 restart=50, maxiter=maxiter)
        res = np.linalg.norm(b - L @ x) / (bnorm if bnorm > 0 else 1.0)
        if not np.isfinite(res) or res > max(10 * solver_tol, 1e-14):
            raise SolverDiverged(f"linear solve stalled at relative residual {res:.2e}")
    c_new = x.reshape(system.shape)
    if not (c_new > 0).all():
        bad = np.unravel_index(np.argmin(c_new), c_new.shape)
        raise PositivityLost(f"concentration {c_new[bad]:.3e} <= 0 at node {bad}")
    return c_new


def compute_fluxes(c_new: np.ndarray, dg: EdgeField, kind: str, params: ModelParams,
                   grid: GridSpec, source: EdgeField | None = None) -> EdgeField:
    """Edge fluxes from updated concentrations; ``source`` adds ``-kappa*g``."""
    k = params.kappa
    jx = -(k / grid.dx) * (b_function(kind, -dg.x) * np.roll(c_new, -1, axis=0)
                           - b_function(kind, dg.x) * c_new)
    jy = -(k / grid.dy) * (b_function(kind, -dg.y) * np.roll(c_new, -1, axis=1)
                           - b_function(kind, dg.y) * c_new)
    J = EdgeField(jx, jy)
    if source is not None:
        J = J - k * source
    return J
