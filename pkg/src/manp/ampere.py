"""Explicit Maxwell-Ampere update of the displacement field."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .grid import EdgeField
from .model import ModelParams


@dataclass
class ThetaHistory:
    """Previous displacement and fluxes, used to extrapolate the gauge field."""

    D_prev: EdgeField | None = None
    J_prev: list[EdgeField] = field(default_factory=list)
    source_prev: EdgeField | None = None
    valid: bool = False


def current(J_all: Sequence[EdgeField], params: ModelParams) -> EdgeField:
    """Charge current ``sum_l q_l J_l``."""
    out = 0.0 * J_all[0]
    for sp, J in zip(params.species, J_all):
        out = out + sp.q * J
    return out


def theta_extrapolate(D_n: EdgeField, hist: ThetaHistory, dt: float,
                      params: ModelParams) -> EdgeField:
    """``(D^n - D^{n-1})/dt + sum q J^{n-1} / (2 kappa^2)``, or zero without history.

    A source current stored in the history is subtracted with the same
    weight so the result stays divergence-free.
    """
    if not hist.valid:
        return 0.0 * D_n
    scale = 1.0 / (2.0 * params.kappa**2)
    theta = (D_n - hist.D_prev) / dt + scale * current(hist.J_prev, params)
    if hist.source_prev is not None:
        theta = theta - scale * hist.source_prev
    return theta


def ampere_step(D_n: EdgeField, J_all: Sequence[EdgeField], theta: EdgeField, dt: float,
                params: ModelParams, source: EdgeField | None = None) -> EdgeField:
    """Interim field ``D* = D^n + dt (-sum q J / (2 kappa^2) + S/(2 kappa^2) + Theta)``."""
    drive = current(J_all, params)
    if source is not None:
        drive = drive - source
    return D_n + dt * (theta - drive / (2.0 * params.kappa**2))
