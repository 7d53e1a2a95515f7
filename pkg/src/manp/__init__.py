"""Structure-preserving finite differences for Maxwell-Ampere Nernst-Planck dynamics."""
from .grid import EdgeField, GridSpec, cell_circulation, node_divergence, node_gradient, wrap
from .model import ModelParams, SpeciesParams, TanhDielectric, janus_params, uniform_params
from .solver import (Problem, SimState, build_initial_displacement, initial_state, simulate,
                     step_bdf2, step_diagnostics, step_euler)

__version__ = "0.1.0"

__all__ = [
    "EdgeField", "GridSpec", "cell_circulation", "node_divergence", "node_gradient", "wrap",
    "ModelParams", "SpeciesParams", "TanhDielectric", "janus_params", "uniform_params",
    "Problem", "SimState", "build_initial_displacement", "initial_state", "simulate",
    "step_bdf2", "step_diagnostics", "step_euler",
]
