import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_skt.bounded import (
    BoundaryKernel,
    BoundedParams,
    a_matrix,
    bounded_advance,
    bounded_entropy_check,
    bounded_fluxes,
    bounded_jacobian,
    bounded_residual,
    log_mean,
)
from nonlocal_skt.grid import BoundedGrid1D, ConfigurationError
from nonlocal_skt.norms import DomainError
from nonlocal_skt.scheme import State


def _params(n=12, **kw):
    return BoundedParams(BoundedGrid1D(n), **{"d1": 0.1, "d2": 0.05, **kw})


def _state(n, seed=0):
    rng = np.random.default_rng(seed)
    return State(rng.random(n) + 0.5, rng.random(n) + 0.5)


def test_boundary_fluxes_vanish():
    p = _params()
    f1, f2 = bounded_fluxes(_state(12), p)
    assert f1[0] == f1[-1] == f2[0] == f2[-1] == 0.0
    assert f1.size == 13


def test_residual_conserves_mass():
    p = _params()
    s, prev = _state(12, 1), _state(12, 2)
    r1, r2 = bounded_residual(s, prev, 0.1, p)
    dx = p.grid.dx
    assert dx * r1.sum() == pytest.approx(dx * (s.u1 - prev.u1).sum() / 0.1, abs=1e-12)


def test_jacobian_matches_finite_differences():
    p = _params(9)
    s = _state(9, 3)
    J = bounded_jacobian(s, 0.2, p)
    h = 1e-7
    u = s.stacked
    fd = np.empty_like(J)
    for k in range(18):
        e = np.zeros(18)
        e[k] = h
        rp = np.concatenate(bounded_residual(State((u + e)[:9], (u + e)[9:]), s, 0.2, p))
        rm = np.concatenate(bounded_residual(State((u - e)[:9], (u - e)[9:]), s, 0.2, p))
        fd[:, k] = (rp - rm) / (2 * h)
    assert np.allclose(J, fd, rtol=1e-6, atol=1e-7)


def test_zero_kernel_decouples_into_heat_equations():
    p = _params(16, kernel=BoundaryKernel(lambda x, y: 0 * x * y))
    s0 = _state(16, 4)
    traj, _ = bounded_advance(s0, 1e-3, 5, p)
    rows = bounded_entropy_check(traj, p, 1e-3)
    assert all(r.passed for r in rows)


def test_constant_trajectory_balance_is_zero():
    p = _params(8)
    s = State(np.ones(8), np.ones(8))
    rows = bounded_entropy_check([s, s], p, 0.1)
    assert rows[0].lhs == pytest.approx(0.0, abs=1e-15)


def test_twenty_steps_satisfy_entropy_inequality():
    p = _params(32, d1=0.1, d2=0.1)
    x = p.grid.centers
    s0 = State(1 + 0.5 * np.cos(np.pi * x), 1 + 0.5 * np.sin(2 * np.pi * x))
    traj, outs = bounded_advance(s0, 1e-3, 20, p)
    rows = bounded_entropy_check(traj, p, 1e-3, [o.final_residual for o in outs])
    assert all(r.passed for r in rows)
    for s in traj:
        assert p.grid.dx * s.u1.sum() == pytest.approx(p.grid.dx * s0.u1.sum(), rel=1e-13)


def test_kernel_validation():
    with pytest.raises(ConfigurationError):
        BoundaryKernel(lambda x, y: 1.0 + 0 * x * y).interface_matrix(BoundedGrid1D(8))
    with pytest.raises(ConfigurationError):
        BoundaryKernel(lambda x, y: -np.sin(np.pi * x) * np.sin(np.pi * y)).interface_matrix(BoundedGrid1D(8))
    with pytest.raises(ConfigurationError):
        BoundedParams(BoundedGrid1D(8), d12=0.0)


def test_log_mean():
    assert log_mean(2.0, 2.0) == 2.0
    assert log_mean(np.e, 1.0) == pytest.approx((np.e - 1))
    assert log_mean(1.0, 4.0) == pytest.approx(3 / np.log(4))


@given(st.integers(0, 2**32 - 1))
def test_a_matrix_is_singular_with_positive_trace(seed):
    rng = np.random.default_rng(seed)
    u1, u2 = rng.random(6) * 5 + 0.01, rng.random(6) * 5 + 0.01
    A = a_matrix(u1, u2, int(rng.integers(5)), int(rng.integers(5)))
    assert abs(np.linalg.det(A)) <= 1e-12 * max(1.0, np.abs(A).max() ** 2)
    assert np.trace(A) > 0


def test_a_matrix_needs_positive_states():
    with pytest.raises(DomainError):
        a_matrix(np.zeros(3), np.ones(3), 0, 0)
