import numpy as np
import pytest

from manp.ampere import ThetaHistory, ampere_step, current, theta_extrapolate
from manp.diagnostics import gauss_residual
from manp.grid import EdgeField, GridSpec, node_divergence
from manp.model import ModelParams, SpeciesParams, uniform_params
from manp.np_scheme import assemble_np_system, compute_dg, compute_fluxes, solve_np
from manp.solver import build_initial_displacement

from conftest import random_edge


def test_theta_is_zero_without_history(rng):
    g = GridSpec(4, 4)
    theta = theta_extrapolate(random_edge(rng, g), ThetaHistory(), 0.1, uniform_params())
    assert theta.max_abs() == 0.0


def test_theta_vanishes_at_steady_state(rng):
    g = GridSpec(4, 4)
    D = random_edge(rng, g)
    hist = ThetaHistory(D_prev=D.copy(), J_prev=[EdgeField.zeros(g)] * 2, valid=True)
    assert theta_extrapolate(D, hist, 0.1, uniform_params()).max_abs() == 0.0


def test_theta_single_edge_example():
    g = GridSpec(4, 4)
    params = ModelParams(kappa=1.0, species=[SpeciesParams(1)])
    D_prev = EdgeField.zeros(g)
    D = EdgeField.zeros(g)
    D.x[2, 1] = 0.01
    J = EdgeField.zeros(g)
    J.x[2, 1] = 0.2
    theta = theta_extrapolate(D, ThetaHistory(D_prev, [J], valid=True), 0.1, params)
    assert theta.x[2, 1] == pytest.approx(0.2, rel=1e-14)
    assert np.count_nonzero(theta.x) == 1 and np.count_nonzero(theta.y) == 0


def test_no_current_no_change(rng):
    g = GridSpec(4, 4)
    D = random_edge(rng, g)
    out = ampere_step(D, [EdgeField.zeros(g)] * 2, EdgeField.zeros(g), 0.1, uniform_params())
    np.testing.assert_array_equal(out.x, D.x)


def test_equal_and_opposite_currents_cancel(rng):
    g = GridSpec(4, 4)
    D, J, theta = random_edge(rng, g), random_edge(rng, g), random_edge(rng, g)
    out = ampere_step(D, [J, J], theta, 0.3, uniform_params())
    np.testing.assert_allclose((out - D).x, 0.3 * theta.x, rtol=1e-14)
    assert current([J, J], uniform_params()).max_abs() == 0.0


def test_source_current_enters_with_half_inverse_kappa_squared(rng):
    g = GridSpec(4, 4)
    params = uniform_params(kappa=0.5)
    D, S = random_edge(rng, g), random_edge(rng, g)
    zero = EdgeField.zeros(g)
    out = ampere_step(D, [zero, zero], zero, 0.1, params, S)
    np.testing.assert_allclose((out - D).y, 0.1 * S.y / (2 * 0.25), rtol=1e-14)


def _consistent_step(rng, g, params, dt=0.05):
    """One NP solve from a Gauss-consistent state; returns (c, D, c_new, J)."""
    c = [0.5 + rng.random(g.shape) for _ in range(2)]
    # neutralise with a uniform shift so the periodic problem is solvable
    c[1] += (c[0] - c[1]).mean()
    D = build_initial_displacement(c, 0.0, params, g, EdgeField.full(g, 1.0), eps_tol=1e-10)
    dg = compute_dg(D, EdgeField.full(g, 1.0), [g.zeros()] * 2, params, g)
    c_new = [solve_np(assemble_np_system(d, dt, "entropic", params, g, ci))
             for d, ci in zip(dg, c)]
    J = [compute_fluxes(cn, d, "entropic", params, g) for cn, d in zip(c_new, dg)]
    return c, D, c_new, J


def test_gauss_law_carried_to_interim_field(rng):
    g = GridSpec(4, 4, 2.0, 2.0)
    params = uniform_params(kappa=1.0)
    c, D, c_new, J = _consistent_step(rng, g, params)
    before = gauss_residual(D, c, 0.0, params, g)
    D_star = ampere_step(D, J, EdgeField.zeros(g), 0.05, params)
    after = gauss_residual(D_star, c_new, 0.0, params, g)
    assert np.abs(before).max() <= 1e-11
    np.testing.assert_allclose(after, before, atol=1e-11)


def test_gauss_law_kept_with_divergence_free_theta(rng):
    g = GridSpec(6, 6, 2.0, 2.0)
    params = uniform_params(kappa=0.7)
    c, D, c_new, J = _consistent_step(rng, g, params)
    # a cell-circulation pattern is divergence free
    theta = EdgeField.zeros(g)
    theta.x[2, 3] += 1.0
    theta.y[3, 3] += 1.0
    theta.x[2, 4] -= 1.0
    theta.y[2, 3] -= 1.0
    D_star = ampere_step(D, J, theta, 0.05, params)
    np.testing.assert_allclose(gauss_residual(D_star, c_new, 0.0, params, g), 0.0, atol=1e-11)


def test_extrapolated_theta_is_divergence_free(rng):
    g = GridSpec(6, 6, 2.0, 2.0)
    params = uniform_params(kappa=0.7)
    dt = 0.05
    c, D, c_new, J = _consistent_step(rng, g, params, dt)
    # any field with the new charges' divergence stands in for D^{n+1}
    D_next = build_initial_displacement(c_new, 0.0, params, g, EdgeField.full(g, 1.0), 1e-10)
    theta = theta_extrapolate(D_next, ThetaHistory(D, J, valid=True), dt, params)
    np.testing.assert_allclose(node_divergence(theta, g), 0.0, atol=1e-11)
