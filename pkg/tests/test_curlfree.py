import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from manp.errors import NotConverged
from manp.grid import EdgeField, GridSpec, cell_circulation, node_divergence, node_gradient
from manp.curlfree import apply_cell_update, optimal_eta, potential_energy, relax
from manp.model import TanhDielectric

from conftest import random_edge
from oracles import curl_free_oracle


def random_eps(rng, grid, contrast=78.0):
    return EdgeField(1 + (contrast - 1) * rng.random(grid.shape),
                     1 + (contrast - 1) * rng.random(grid.shape))


def test_constant_field_needs_no_update():
    g = GridSpec(4, 4)
    D = EdgeField.full(g, 0.3)
    assert optimal_eta((1, 2), D, EdgeField.full(g, 2.0), g) == 0.0


def test_single_edge_example():
    g = GridSpec(4, 4, 4.0, 4.0)
    D = EdgeField.zeros(g)
    D.x[1, 1] = 1.0
    eps = EdgeField.full(g, 1.0)
    eta = optimal_eta((1, 1), D, eps, g)
    assert eta == pytest.approx(-0.25, abs=1e-16)
    apply_cell_update((1, 1), eta, D, g)
    # bottom, right, top, left edges of the cell
    edges = (D.x[1, 1], D.y[2, 1], D.x[1, 2], D.y[1, 1])
    assert edges == pytest.approx((0.75, -0.25, 0.25, 0.25), abs=1e-16)
    assert cell_circulation(D / eps, g)[1, 1] == pytest.approx(0.0, abs=1e-15)


def test_zero_update_is_identity(rng):
    g = GridSpec(5, 4)
    D = random_edge(rng, g)
    before = D.copy()
    apply_cell_update((4, 3), 0.0, D, g)
    np.testing.assert_array_equal(D.x, before.x)
    np.testing.assert_array_equal(D.y, before.y)


@given(st.integers(0, 2**32 - 1))
def test_gradient_fields_are_fixed_points(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(6, 5, 1.0, 0.8)
    eps = random_eps(rng, g)
    grad = node_gradient(rng.standard_normal(g.shape), g)
    D = EdgeField(eps.x * grad.x, eps.y * grad.y)
    for i in range(g.nx):
        for j in range(g.ny):
            assert abs(optimal_eta((i, j), D, eps, g)) <= 1e-13


@given(st.integers(0, 2**32 - 1))
def test_each_update_keeps_divergence_and_lowers_energy(seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(8, 8, 1.0, 1.0)
    eps = random_eps(rng, g)
    D = random_edge(rng, g)
    div0 = node_divergence(D, g)
    energy = potential_energy(D, eps, 1.0, g)
    for _ in range(30):
        cell = tuple(rng.integers(0, 8, size=2))
        apply_cell_update(cell, optimal_eta(cell, D, eps, g), D, g)
        new = potential_energy(D, eps, 1.0, g)
        assert new <= energy * (1 + 1e-14)
        energy = new
    np.testing.assert_allclose(node_divergence(D, g), div0, atol=1e-12)


def test_potential_energy_examples():
    g = GridSpec(3, 3, 3.0, 3.0)
    assert potential_energy(EdgeField.zeros(g), EdgeField.full(g, 1.0), 1.0, g) == 0.0
    D = EdgeField.zeros(g)
    D.x[0, 0] = 2.0
    assert potential_energy(D, EdgeField.full(g, 0.5), 1.0, g) == pytest.approx(8.0)
    D.y[1, 2] = -1e-3
    assert potential_energy(D, EdgeField.full(g, 0.5), 0.1, g) > 0


def test_curl_free_input_exits_after_one_sweep(rng):
    g = GridSpec(8, 8)
    eps = random_eps(rng, g)
    D = curl_free_oracle(random_edge(rng, g), eps, g)
    out, report = relax(D, eps, g, eps_tol=1e-6)
    assert report.sweeps == 1 and report.final_metric <= 1e-13
    assert report.converged


@pytest.mark.parametrize("contrast", [1.0, 78.0])
def test_relaxed_field_matches_direct_poisson_solve(contrast, rng):
    g = GridSpec(16, 16)
    eps = random_eps(rng, g, contrast)
    D = random_edge(rng, g)
    reference = curl_free_oracle(D, eps, g)
    for tol in (1e-6, 1e-9):
        out, report = relax(D, eps, g, eps_tol=tol, max_sweeps=100_000)
        assert np.abs(cell_circulation(out / eps, g)).max() <= 10 * tol
        np.testing.assert_allclose(node_divergence(out, g), node_divergence(D, g), atol=1e-12)
        # error is proportional to the tolerance with a grid-size dependent constant
        assert (out - reference).max_abs() <= 4 * g.size * tol


def test_energy_trace_non_increasing_for_dielectric_contrast(rng):
    g = GridSpec.square(0.05)
    prof = TanhDielectric(1.0, 78.0)
    eps = EdgeField.from_function(g, prof, prof)
    D = random_edge(rng, g)
    _, report = relax(D, eps, g, eps_tol=1e-8, max_sweeps=100_000, kappa=0.01)
    trace = np.array(report.energy_trace)
    assert len(trace) == report.sweeps > 10
    assert np.all(np.diff(trace) <= 1e-14 * np.abs(trace[:-1]))


def test_relaxation_is_deterministic(rng):
    g = GridSpec(12, 10)
    eps = random_eps(rng, g)
    D = random_edge(rng, g)
    a, _ = relax(D, eps, g, eps_tol=1e-7)
    b, _ = relax(D, eps, g, eps_tol=1e-7)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)


def test_input_is_not_modified(rng):
    g = GridSpec(6, 6)
    D = random_edge(rng, g)
    before = D.copy()
    relax(D, EdgeField.full(g, 1.0), g, eps_tol=1e-8)
    np.testing.assert_array_equal(D.x, before.x)


def test_sweep_cap_raises_with_partial_result(rng):
    g = GridSpec(16, 16)
    eps = random_eps(rng, g)
    with pytest.raises(NotConverged) as info:
        relax(random_edge(rng, g), eps, g, eps_tol=1e-12, max_sweeps=3)
    assert info.value.report.sweeps == 3
    assert info.value.field is not None
    _, report = relax(random_edge(rng, g), eps, g, eps_tol=1e-12, max_sweeps=3,
                      raise_on_failure=False)
    assert not report.converged


def test_global_shift_removes_mean_flux():
    # a uniform x-field is curl-free cell by cell but not a gradient on the torus
    g = GridSpec(6, 6)
    D = EdgeField.full(g, 0.0)
    D.x[:] = 1.0
    eps = EdgeField.full(g, 1.0)
    out, _ = relax(D, eps, g, eps_tol=1e-12)
    assert out.max_abs() <= 1e-12
    kept, _ = relax(D, eps, g, eps_tol=1e-12, global_shift=False)
    np.testing.assert_allclose(kept.x, 1.0)


def test_nonpositive_tolerance_rejected(rng):
    g = GridSpec(4, 4)
    with pytest.raises(ValueError):
        relax(random_edge(rng, g), EdgeField.full(g, 1.0), g, eps_tol=0.0)


def test_correction_is_the_applied_divergence_free_update(rng):
    g = GridSpec(10, 12)
    eps = random_eps(rng, g)
    D = random_edge(rng, g)
    out, report = relax(D, eps, g, eps_tol=1e-10, max_sweeps=100_000)
    np.testing.assert_allclose((D + report.correction).x, out.x, atol=1e-13)
    np.testing.assert_allclose((D + report.correction).y, out.y, atol=1e-13)
    assert np.abs(node_divergence(report.correction, g)).max() < 1e-12
