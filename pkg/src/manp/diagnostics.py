"""Conservation, positivity and energy observables of a discrete state."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from .errors import NonPositiveConcentration
from .grid import EdgeField, GridSpec, cell_circulation, node_divergence
from .model import ModelParams, charge_density


@dataclass
class StepDiagnostics:
    time: float
    mass_per_species: list[float]
    energy_Fh: float
    min_concentration: float
    max_gauss_residual: float
    max_curl_residual: float
    max_peclet: float
    dt_star: float
    dissipation_I1: float
    relax_sweeps: int

    @classmethod
    def columns(cls, n_species: int) -> list[str]:
        cols = []
        for f in fields(cls):
            if f.name == "mass_per_species":
                cols += [f"mass_{k + 1}" for k in range(n_species)]
            else:
                cols.append(f.name)
        return cols

    def row(self) -> list:
        out = []
        for key, value in asdict(self).items():
            out += value if key == "mass_per_species" else [value]
        return out


def total_mass(c: np.ndarray, grid: GridSpec) -> float:
    return float(grid.cell_area * np.sum(c))


def min_concentration(c_all: Sequence[np.ndarray]) -> float:
    return float(min(np.min(c) for c in c_all))


def _check_positive(c_all):
    for c in c_all:
        if not (c > 0).all():
            raise NonPositiveConcentration(f"minimum concentration {np.min(c):.3e} <= 0")


def discrete_energy(c_all: Sequence[np.ndarray], D: EdgeField, eps_edges: EdgeField,
                    mu_cr_all: Sequence[np.ndarray], params: ModelParams, grid: GridSpec) -> float:
    """Field energy plus entropy and correlation terms, by midpoint quadrature."""
    _check_positive(c_all)
    field_part = params.kappa**2 * (np.sum(D.x**2 / eps_edges.x) + np.sum(D.y**2 / eps_edges.y))
    ion_part = sum(np.sum(c * (np.log(c) + mu)) for c, mu in zip(c_all, mu_cr_all))
    return float(grid.cell_area * (field_part + ion_part))


def gauss_residual(D: EdgeField, c_all: Sequence[np.ndarray], rho_f, params: ModelParams,
                   grid: GridSpec, background: np.ndarray | float = 0.0) -> np.ndarray:
    """``2 kappa^2 div D - rho``.

    ``background`` is an extra charge that is not carried by ions, e.g. the
    one implied by a manufactured source current.
    """
    rho = charge_density(c_all, params, rho_f) + background
    return 2.0 * params.kappa**2 * node_divergence(D, grid) - rho


def curl_residual(D: EdgeField, eps_edges: EdgeField, grid: GridSpec) -> np.ndarray:
    return cell_circulation(D / eps_edges, grid)


def peclet_field(dg_all: Sequence[EdgeField]) -> np.ndarray:
    """Per node, the largest ``|dg|`` over species on its right and upper edges."""
    return np.max([np.maximum(np.abs(dg.x), np.abs(dg.y)) for dg in dg_all], axis=0)


def dt_star(dg_all: Sequence[EdgeField], c_new: Sequence[np.ndarray], eps_edges: EdgeField,
            params: ModelParams) -> float:
    """Sufficient step size for energy decay; uses the post-step concentrations."""
    eps_min = min(eps_edges.x.min(), eps_edges.y.min())
    eps_max = max(eps_edges.x.max(), eps_edges.y.max())
    c_max = max(np.max(c) for c in c_new)
    q2 = float(np.sum(params.valences**2))
    dg_max = max(dg.max_abs() for dg in dg_all)
    return float(2.0 * params.kappa * eps_min**3 / (eps_max**2 * c_max * q2) * np.exp(-dg_max))


def dissipation_rate_I1(J_all: Sequence[EdgeField], c_new: Sequence[np.ndarray],
                        mu_cr_all: Sequence[np.ndarray], D: EdgeField, eps_edges: EdgeField,
                        params: ModelParams, grid: GridSpec) -> float:
    """Flux times the discrete chemical-potential gradient, summed with a minus sign.

    ``D`` is the displacement that drove the fluxes (the old time level).
    """
    _check_positive(c_new)
    total = 0.0
    for sp, J, c, mu in zip(params.species, J_all, c_new, mu_cr_all):
        w = np.log(c) + mu
        gx = (np.roll(w, -1, axis=0) - w) / grid.dx - sp.q * D.x / eps_edges.x
        gy = (np.roll(w, -1, axis=1) - w) / grid.dy - sp.q * D.y / eps_edges.y
        total -= np.sum(J.x * gx) + np.sum(J.y * gy)
    return float(grid.cell_area * total)
