import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nonlocal_skt.grid import ConfigurationError, PeriodicGrid1D
from nonlocal_skt.kernels import BoundInapplicable
from nonlocal_skt.kolmogorov import (
    KolmogorovProblem,
    assemble_m_matrix,
    discrete_gronwall,
    dual_solve,
    duality_inequality_check,
    energy_estimate_check,
    forward_solve,
    forward_step,
    linf_bounds_check,
    periodic_tridiagonal_solve,
    smooth_problem,
    transpose_step,
)

from oracles import gronwall_bound


@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_cyclic_tridiagonal_matches_dense(n, seed):
    rng = np.random.default_rng(seed)
    sub, sup = -rng.random(n), -rng.random(n)
    diag = 1 + np.abs(sub) + np.abs(sup) + rng.random(n)
    rhs = rng.random(n)
    dense = np.zeros((n, n))
    for i in range(n):
        dense[i, i] += diag[i]
        dense[i, (i - 1) % n] += sub[i]
        dense[i, (i + 1) % n] += sup[i]
    assert np.allclose(periodic_tridiagonal_solve(sub, diag, sup, rhs), np.linalg.solve(dense, rhs), atol=1e-12)


def test_m_matrix_structure():
    g = PeriodicGrid1D(6, 1.0)
    mu = np.linspace(0.5, 2.0, 6)
    M = assemble_m_matrix(mu, 0.01, g).toarray()
    assert np.allclose(M.sum(axis=0), 1.0)  # columns sum to one: mass conservation
    off = M - np.diag(np.diag(M))
    assert np.all(off <= 0) and np.all(np.linalg.inv(M) >= -1e-15)


@pytest.mark.parametrize("n", [2, 8, 33])
def test_forward_and_transpose_match_dense(n, rng):
    g = PeriodicGrid1D(n, 1.0)
    mu = rng.random(n) + 0.1
    rhs = rng.random(n)
    M = assemble_m_matrix(mu, 0.05, g).toarray()
    assert np.allclose(forward_step(rhs, mu, 0.05, g), np.linalg.solve(M, rhs), atol=1e-12)
    assert np.allclose(transpose_step(rhs, mu, 0.05, g), np.linalg.solve(M.T, rhs), atol=1e-12)


def test_forward_conserves_mass():
    p = smooth_problem(32, 10)
    z = forward_solve(p)
    assert np.allclose(z.sum(axis=1), z[0].sum(), rtol=1e-13)


@pytest.mark.parametrize("n", [32, 64])
def test_estimates_hold_on_smooth_problem(n):
    p = smooth_problem(n)
    assert linf_bounds_check(p, 0.5, 1.5).all_passed
    assert energy_estimate_check(p).all_passed
    d = dual_solve(p, np.ones_like(p.mu))
    assert d.estimate.all_passed


def test_dual_step_with_zero_source_is_zero():
    p = smooth_problem(16)
    d = dual_solve(p, np.zeros_like(p.mu))
    assert np.all(d.v == 0)


def test_duality_identity():
    rep = duality_inequality_check(smooth_problem(32))
    assert rep.identity_error < 1e-12
    assert 0 < rep.ratio < 1


def test_constant_mobility_is_heat_equation():
    g = PeriodicGrid1D(16, 1.0)
    z0 = np.cos(2 * np.pi * g.centers)
    p = KolmogorovProblem(g, np.ones((3, 16)), 0.01, z0)
    lam = 4 / g.dx**2 * np.sin(np.pi * g.dx) ** 2  # symbol of the discrete Laplacian
    assert np.allclose(forward_solve(p)[-1], z0 / (1 + 0.01 * lam) ** 3, atol=1e-13)


def test_bounds_require_small_dt():
    p = smooth_problem(64, dt=1.0)
    with pytest.raises(BoundInapplicable):
        linf_bounds_check(p, 0.5, 1.5)


def test_problem_validation():
    g = PeriodicGrid1D(4, 1.0)
    with pytest.raises(ConfigurationError):
        KolmogorovProblem(g, -np.ones((1, 4)), 0.1, np.ones(4))
    with pytest.raises(ConfigurationError):
        KolmogorovProblem(g, np.ones((1, 5)), 0.1, np.ones(4))


@given(st.floats(0, 10), st.lists(st.floats(0, 5), max_size=20), st.floats(1e-4, 0.19))
@settings(max_examples=100)
def test_gronwall_closed_form(u0, a, dt):
    assert np.allclose(discrete_gronwall(u0, a, dt), gronwall_bound(u0, a, dt), rtol=1e-13)


def test_gronwall_hypothesis_checked():
    with pytest.raises(ConfigurationError):
        discrete_gronwall(1.0, [10.0], 0.2)
