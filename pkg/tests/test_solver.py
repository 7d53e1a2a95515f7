import math

import numpy as np
import pytest

from manp import mms
from manp.diagnostics import curl_residual, gauss_residual
from manp.errors import NonNeutral, PositivityLost
from manp.grid import EdgeField, GridSpec
from manp.model import janus_params, uniform_params
from manp.solver import (Problem, build_initial_displacement, initial_state, poisson_matrix,
                         simulate, step_diagnostics)


@pytest.mark.parametrize("integrator", ["euler", "bdf2"])
def test_uniform_neutral_state_is_a_fixed_point(integrator):
    grid = GridSpec.square(0.25)
    problem = Problem.build(grid, uniform_params(kappa=0.3, eps=2.0))
    state = initial_state(problem, [0.4, 0.4])
    state = simulate(problem, state, 0.05, 4, integrator)
    for c in state.c:
        np.testing.assert_allclose(c, 0.4, atol=1e-13)
    assert state.D.max_abs() < 1e-13
    assert state.n == 4 and state.t == pytest.approx(0.2)


def test_zero_charge_gives_zero_displacement():
    grid = GridSpec.square(0.25)
    params = uniform_params()
    D = build_initial_displacement([grid.zeros() + 0.3] * 2, 0.0, params, grid)
    assert D.max_abs() == 0.0


def test_poisson_matrix_is_symmetric_with_constant_kernel():
    grid = GridSpec(nx=5, ny=4)
    A = poisson_matrix(EdgeField.full(grid, 2.0), 0.5, grid)
    assert abs(A - A.T).max() < 1e-14
    np.testing.assert_allclose(A @ np.ones(grid.size), 0.0, atol=1e-12)


def test_initial_displacement_on_janus_geometry():
    grid = GridSpec.square(0.05)
    params = janus_params(kappa=0.02, eps_m=1.0, eps_w=78.0, eps_tol=1e-9)
    problem = Problem.build(grid, params)
    state = initial_state(problem, [0.1, 0.1])
    gauss = gauss_residual(state.D, state.c, problem.rho_f, params, grid)
    assert np.abs(gauss).max() <= 1e-10
    curl = curl_residual(state.D, problem.eps_edges, grid)
    assert np.abs(curl).max() <= 10 * 1e-9


def test_charged_initial_data_is_rejected():
    grid = GridSpec.square(0.25)
    params = uniform_params()
    with pytest.raises(NonNeutral):
        build_initial_displacement([grid.zeros() + 0.3, grid.zeros() + 0.2], 0.0, params, grid)


def test_gauss_law_carried_through_steps():
    grid = GridSpec.square(0.1)
    problem = Problem.build(grid, janus_params(kappa=0.02))
    state = initial_state(problem, [0.1, 0.1])
    worst = []
    simulate(problem, state, 1e-3, 10,
             callback=lambda s: worst.append(step_diagnostics(s, problem).max_gauss_residual))
    assert max(worst) <= 1e-10


def test_counterions_gather_at_the_opposite_hemisphere():
    grid = GridSpec.square(0.05)
    problem = Problem.build(grid, janus_params(kappa=0.02))
    state = simulate(problem, initial_state(problem, [0.1, 0.1]), 1e-3, 50)
    X, Y = grid.node_coords()
    shell = np.abs(np.hypot(X, Y) - 0.5) < 0.1
    upper, lower = shell & (Y > 0.1), shell & (Y < -0.1)
    cation, anion = state.c
    # the upper half carries positive charge
    assert anion[upper].mean() > anion[lower].mean()
    assert cation[lower].mean() > cation[upper].mean()


def test_step_info_exposes_fluxes_and_relaxation():
    grid = GridSpec.square(0.1)
    problem = Problem.build(grid, janus_params(kappa=0.05))
    assert np.abs(problem.rho_f).max() == 1.0
    state = simulate(problem, initial_state(problem, [0.1, 0.1]), 1e-3, 2)
    info = state.last
    assert len(info.J) == len(info.dg) == 2
    assert info.relax.converged
    d = step_diagnostics(state, problem)
    assert d.relax_sweeps == info.relax.sweeps
    assert d.max_peclet > 0 and d.dissipation_I1 >= 0


def test_bdf2_self_convergence_is_second_order():
    finals = [mms.run_mms(0.1, dt, T=0.4, eps_tol=1e-9, integrator="bdf2")[0].c[0]
              for dt in (0.02, 0.01, 0.005)]
    order = math.log2(np.abs(finals[0] - finals[1]).max() / np.abs(finals[1] - finals[2]).max())
    assert order >= 1.7


def test_euler_self_convergence_is_first_order():
    finals = [mms.run_mms(0.1, dt, T=0.4, eps_tol=1e-9)[0].c[0] for dt in (0.02, 0.01, 0.005)]
    order = math.log2(np.abs(finals[0] - finals[1]).max() / np.abs(finals[1] - finals[2]).max())
    assert 0.8 <= order <= 1.3


def test_unknown_source_time_rejected():
    with pytest.raises(ValueError):
        Problem.build(GridSpec.square(0.5), uniform_params(), source_time="later")


@pytest.mark.parametrize("kind", ["arithmetic", "geometric"])
def test_bdf2_extrapolated_rhs_can_lose_sign(kind):
    # 2 c^n - c^{n-1}/2 turns negative once c collapses within one step
    grid = GridSpec.square(0.05)
    problem = Problem.build(grid, janus_params(kappa=0.01, eps_m=1.0, eps_w=78.0,
                                               mean_kind=kind))
    state = initial_state(problem, [0.1, 0.1])
    state = simulate(problem, state, 1e-3, 1, "euler")
    with pytest.raises(PositivityLost):
        simulate(problem, state, 1e-3, 1, "bdf2")


@pytest.mark.parametrize("kind", ["entropic", "harmonic", "geometric", "arithmetic"])
def test_backward_euler_stays_positive_for_every_mean(kind):
    grid = GridSpec.square(0.05)
    problem = Problem.build(grid, janus_params(kappa=0.01, eps_m=1.0, eps_w=78.0,
                                               mean_kind=kind))
    lows = []
    simulate(problem, initial_state(problem, [0.1, 0.1]), 1e-3, 20,
             callback=lambda s: lows.append(min(c.min() for c in s.c)))
    assert min(lows) > 0
