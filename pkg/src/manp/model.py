"""Physical parameters, dielectric profiles, fixed charges and the
correlation chemical potential (steric + Born solvation)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .errors import NonPositiveSolvent
from .grid import EdgeField, GridSpec

MEAN_KINDS = ("entropic", "harmonic", "geometric", "arithmetic")

# closed-form profile f(x, y) or tabulated node samples
Profile = Union[Callable[[np.ndarray, np.ndarray], np.ndarray], np.ndarray, float]


@dataclass(frozen=True)
class SpeciesParams:
    q: int
    v: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("ionic volume must be non-negative")


@dataclass
class ModelParams:
    kappa: float
    species: Sequence[SpeciesParams]
    chi: float = 0.0
    v0: float = 1.0
    dielectric: Profile = 1.0
    fixed_charge: Profile | None = None
    mean_kind: str = "entropic"
    eps_tol: float = 1e-6
    solver_tol: float = 1e-13
    max_sweeps: int = 10_000

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.v0 <= 0:
            raise ValueError("solvent volume v0 must be positive")
        if self.chi < 0:
            raise ValueError("chi must be non-negative")
        if self.mean_kind not in MEAN_KINDS:
            raise ValueError(f"unknown mean kind {self.mean_kind!r}; choose from {MEAN_KINDS}")
        self.species = tuple(self.species)
        if not self.species:
            raise ValueError("need at least one species")
        if self.chi != 0 and any(s.a <= 0 for s in self.species):
            raise ValueError("Born radii must be positive when chi != 0")

    @property
    def valences(self) -> np.ndarray:
        return np.array([s.q for s in self.species], dtype=float)

    @property
    def n_species(self) -> int:
        return len(self.species)


class TanhDielectric:
    """Smoothed two-phase profile: ``eps_m`` inside radius ``r0``, ``eps_w`` outside."""

    def __init__(self, eps_m: float, eps_w: float, r0: float = 0.5, steepness: float = 50.0,
                 center: tuple[float, float] = (0.0, 0.0)):
        if eps_m <= 0 or eps_w <= 0:
            raise ValueError("dielectric constants must be positive")
        self.eps_m, self.eps_w = eps_m, eps_w
        self.r0, self.steepness, self.center = r0, steepness, center

    def __call__(self, x, y):
        r = np.hypot(x - self.center[0], y - self.center[1])
        return (0.5 * (self.eps_w - self.eps_m)
                * (np.tanh(self.steepness * (r - self.r0)) + 1.0) + self.eps_m)

    def __repr__(self):
        return f"TanhDielectric(eps_m={self.eps_m}, eps_w={self.eps_w})"


def janus_fixed_charge(x, y, r2_min: float = 0.24, r2_max: float = 0.26):
    """+1 on the upper half of the annulus, -1 on the lower half.

    Polar angle in ``(0, pi]`` counts as upper, ``(pi, 2*pi]`` as lower, so
    the positive x-axis belongs to the lower half.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    r2 = x**2 + y**2
    # round-off slack so nodes lying on the closed boundaries count as inside
    # regardless of how their coordinates were computed
    tol = 1e-12
    ring = (r2 >= r2_min - tol) & (r2 <= r2_max + tol)
    on_axis = np.abs(y) <= tol
    upper = (~on_axis & (y > 0)) | (on_axis & (x < 0))
    return np.where(ring, np.where(upper, 1.0, -1.0), 0.0)


def _sample(profile: Profile, grid: GridSpec, coords) -> np.ndarray:
    if callable(profile):
        return np.asarray(profile(*coords), dtype=float) * np.ones(grid.shape)
    arr = np.asarray(profile, dtype=float)
    if arr.ndim == 0:
        return np.full(grid.shape, float(arr))
    if arr.shape != grid.shape:
        raise ValueError(f"tabulated profile has shape {arr.shape}, grid is {grid.shape}")
    return arr.copy()


def eval_dielectric_nodes(params: ModelParams, grid: GridSpec) -> np.ndarray:
    eps = _sample(params.dielectric, grid, grid.node_coords())
    if not (eps > 0).all():
        raise ValueError("dielectric must be positive everywhere")
    return eps


def eval_dielectric_edges(params: ModelParams, grid: GridSpec) -> EdgeField:
    """Dielectric at the half points.

    Closed-form profiles are evaluated at the half-point coordinates;
    tabulated node values are averaged over the two adjacent nodes.
    """
    prof = params.dielectric
    if callable(prof) or np.ndim(prof) == 0:
        eps = EdgeField(_sample(prof, grid, grid.xedge_coords()),
                        _sample(prof, grid, grid.yedge_coords()))
    else:
        nodes = _sample(prof, grid, None)
        eps = EdgeField(0.5 * (nodes + np.roll(nodes, -1, axis=0)),
                        0.5 * (nodes + np.roll(nodes, -1, axis=1)))
    if not ((eps.x > 0).all() and (eps.y > 0).all()):
        raise ValueError("dielectric must be positive on every edge")
    return eps


def fixed_charge_nodes(params: ModelParams, grid: GridSpec) -> np.ndarray:
    if params.fixed_charge is None:
        return grid.zeros()
    return _sample(params.fixed_charge, grid, grid.node_coords())


def solvent_concentration(c_all: Sequence[np.ndarray], params: ModelParams) -> np.ndarray:
    occupied = sum(s.v * c for s, c in zip(params.species, c_all))
    c0 = (1.0 - occupied) / params.v0
    c0 = np.broadcast_to(c0, np.shape(c_all[0]))
    if not (c0 > 0).all():
        bad = np.unravel_index(np.argmin(c0), c0.shape)
        raise NonPositiveSolvent(f"solvent concentration {c0[bad]:.3e} <= 0 at node {bad}")
    return np.array(c0, dtype=float)


def mu_cr(c_all: Sequence[np.ndarray], params: ModelParams, ell: int,
          eps_nodes: np.ndarray | float = 1.0) -> np.ndarray:
    """Correlation chemical potential of species ``ell`` at the nodes."""
    sp = params.species[ell]
    out = np.zeros(np.shape(c_all[0]))
    if sp.v != 0:
        c0 = solvent_concentration(c_all, params)
        out -= sp.v / params.v0 * np.log(params.v0 * c0)
    if params.chi != 0 and sp.q != 0:
        out += params.chi * sp.q**2 / sp.a * (1.0 / np.asarray(eps_nodes) - 1.0)
    return out


def mu_cr_all(c_all, params: ModelParams, eps_nodes=1.0) -> list[np.ndarray]:
    if any(s.v != 0 for s in params.species):
        # fail early with the solvent error rather than a log warning
        solvent_concentration(c_all, params)
    return [mu_cr(c_all, params, ell, eps_nodes) for ell in range(params.n_species)]


def charge_density(c_all: Sequence[np.ndarray], params: ModelParams,
                   rho_f: np.ndarray | float = 0.0) -> np.ndarray:
    rho = np.asarray(rho_f, dtype=float) + sum(s.q * c for s, c in zip(params.species, c_all))
    return np.broadcast_to(rho, np.shape(c_all[0])).copy()


# -- presets ---------------------------------------------------------------

JANUS_VOLUMES = (0.716**3, 0.676**3)
JANUS_SOLVENT_VOLUME = 0.275**3
JANUS_CHI = 198.9437


def janus_params(kappa: float = 0.02, eps_m: float = 1.0, eps_w: float = 1.0, *,
                 chi: float = JANUS_CHI, volumes=JANUS_VOLUMES, v0: float = JANUS_SOLVENT_VOLUME,
                 radii=(1.0, 1.0), **kw) -> ModelParams:
    """Binary monovalent electrolyte around a charged Janus particle.

    Born radii are not pinned down by the source setup; both default to 1.
    """
    species = [SpeciesParams(q=1, v=volumes[0], a=radii[0]),
               SpeciesParams(q=-1, v=volumes[1], a=radii[1])]
    dielectric = 1.0 if eps_m == eps_w == 1.0 else TanhDielectric(eps_m, eps_w)
    return ModelParams(kappa=kappa, species=species, chi=chi, v0=v0, dielectric=dielectric,
                       fixed_charge=janus_fixed_charge, **kw)


def uniform_params(kappa: float = 1.0, eps: float = 1.0, valences=(1, -1), **kw) -> ModelParams:
    return ModelParams(kappa=kappa, species=[SpeciesParams(q=q) for q in valences],
                       dielectric=eps, **kw)


PRESETS = {"janus": janus_params, "uniform": uniform_params}
