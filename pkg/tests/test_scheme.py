import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_skt import kernels as K
from nonlocal_skt.grid import ConfigurationError, PeriodicGrid1D, PeriodicGrid2D
from nonlocal_skt.norms import DomainError
from nonlocal_skt.scheme import (
    Box,
    Box2D,
    LotkaVolterra,
    MimuraNishiuraYamaguti,
    SchemeParams,
    SegelLevin,
    State,
    Zero,
    cell_averages,
    duality_constant_A,
    duality_functional,
    flux_divergence,
    fluxes,
    fluxes_centered,
    initial_state,
    make_params,
    mass,
    max_principle_bounds,
    max_principle_rate,
    mu,
    step_residual,
)

REACTIONS = [Zero(), LotkaVolterra(1, 0.5, 0.2, 0.8, 0.3, 0.4), SegelLevin(), MimuraNishiuraYamaguti()]


def test_segel_levin_equilibrium():
    sl = SegelLevin()
    assert sl.equilibrium() == pytest.approx((1.5, 1.5))
    assert np.allclose(sl.evaluate(1.5, 1.5), 0.0, atol=1e-15)


def test_mny_equilibrium():
    assert np.allclose(MimuraNishiuraYamaguti().evaluate(5.0, 10.0), 0.0, atol=1e-12)


@pytest.mark.parametrize("reaction", REACTIONS, ids=lambda r: type(r).__name__)
def test_reaction_jacobian_matches_finite_differences(reaction):
    u1, u2 = np.array([0.7, 2.0]), np.array([1.3, 0.4])
    h = 1e-6
    jac = reaction.jacobian(u1, u2)
    fd = []
    for i in range(2):
        for du in ((h, 0), (0, h)):
            plus = reaction.evaluate(u1 + du[0], u2 + du[1])[i]
            minus = reaction.evaluate(u1 - du[0], u2 - du[1])[i]
            fd.append((plus - minus) / (2 * h))
    for a, b in zip(jac, fd):
        assert np.allclose(np.broadcast_to(a, (2,)), b, rtol=1e-6, atol=1e-8)


def test_lotka_volterra_rejects_negative():
    with pytest.raises(ConfigurationError):
        LotkaVolterra(1, -1, 0, 0, 0, 0)


def test_params_validation():
    g = PeriodicGrid1D(8, 1.0)
    d = K.discretize(K.Dirac(), g)
    with pytest.raises(ConfigurationError):
        make_params(g, d, d1=-1.0)
    other = K.discretize(K.Dirac(), PeriodicGrid1D(16, 1.0))
    with pytest.raises(ConfigurationError):
        SchemeParams(d, d, d, other)


def test_make_params_reflects_rho(rng):
    g = PeriodicGrid1D(8, 1.0)
    rho = K.DiscreteKernel(rng.random(8), g)
    p = make_params(g, K.discretize(K.Dirac(), g), rho1=rho)
    assert p.symmetry_holds()
    assert p.rho2.values[3] == rho.values[5]


def test_entropy_structure_flags():
    g = PeriodicGrid1D(8, 1.0)
    d = K.discretize(K.Dirac(), g)
    assert make_params(g, d).entropy_structure
    assert not make_params(g, d, d21=0.0).entropy_structure
    assert not make_params(g, d, reaction=SegelLevin()).entropy_structure


def test_box_cell_averages_exact():
    g = PeriodicGrid1D(4, 4.0)
    assert np.allclose(cell_averages(Box(0.5, 2.25), g), [0.5, 1.0, 0.25, 0.0])
    # wraps around the torus
    assert np.allclose(cell_averages(Box(3.5, 4.5), g), [0.5, 0, 0, 0.5])


def test_box2d_cell_averages():
    g = PeriodicGrid2D(4, 2, 4.0, 2.0)
    v = cell_averages(Box2D(0.0, 2.0, 0.5, 1.0, height=2.0, base=1.0), g).reshape(g.shape)
    assert np.allclose(v, [[2, 2, 1, 1], [1, 1, 1, 1]])


def test_smooth_cell_averages_exact_for_cosine():
    g = PeriodicGrid1D(16, 25.0)
    nu = 2 * np.pi / 25
    e = g.edges
    exact = 1 + (np.sin(nu * e[1:]) - np.sin(nu * e[:-1])) / (nu * g.dx)
    assert np.allclose(cell_averages(lambda x: np.cos(nu * x) + 1, g), exact, atol=1e-14)


def test_negative_initial_data_rejected():
    g = PeriodicGrid1D(8, 1.0)
    with pytest.raises(DomainError):
        cell_averages(lambda x: np.sin(2 * np.pi * x), g)
    with pytest.raises(DomainError):
        cell_averages(-1.0, g)


def test_residual_vanishes_on_equilibrium(small_params):
    s = State(np.full(16, 2.0), np.full(16, 3.0))
    r1, r2 = step_residual(s, s, 0.1, small_params)
    assert np.abs(r1).max() < 1e-13 and np.abs(r2).max() < 1e-13


@given(st.integers(0, 2**32 - 1))
def test_flux_forms_agree_and_conserve(seed):
    g = PeriodicGrid1D(12, 5.0)
    rng = np.random.default_rng(seed)
    p = make_params(g, K.discretize(K.Indicator(1.0), g), rho1=K.DiscreteKernel(rng.random(12), g),
                    d1=0.1, d2=0.2, d11=0.3, d22=0.4)
    s = State(rng.random(12), rng.random(12))
    for a, b in zip(fluxes(s, p), fluxes_centered(s, p)):
        assert np.allclose(a, b, atol=1e-12)
    for f in fluxes(s, p):
        assert abs(flux_divergence(f, g).sum()) < 1e-10
    m1, m2 = mu(s, p)
    lap = g.laplacian
    assert np.allclose(-flux_divergence(fluxes(s, p)[0], g), lap @ (m1 * s.u1), atol=1e-10)


def test_fluxes_2d_shapes(rng):
    g = PeriodicGrid2D(5, 4, 1.0, 1.0)
    d = K.discretize(K.Dirac(), g)
    p = make_params(g, d)
    s = State(rng.random(20), rng.random(20))
    f1, f2 = fluxes(s, p)
    assert len(f1) == 2 and f1[0].shape == (4, 5)
    m1, _ = mu(s, p)
    assert np.allclose(-flux_divergence(f1, g), g.laplacian @ (m1 * s.u1), atol=1e-10)


def test_mass():
    g = PeriodicGrid1D(10, 2.0)
    assert mass(np.ones(10), g) == pytest.approx(2.0)


def test_max_principle_rate_formula():
    g = PeriodicGrid1D(64, 25.0)
    p = make_params(g, K.discretize(K.Dirac(), g), rho1=K.discretize(K.SmoothCos(), g), d12=1.0, d21=2.0)
    nu2 = (2 * np.pi / 25) ** 2
    assert max_principle_rate(p, 25.0, 10.0) == pytest.approx(min(1.0 * 10.0, 2.0 * 25.0) * nu2)
    assert max_principle_rate(p, 25.0, 10.0, combine="max") == pytest.approx(50.0 * nu2)
    b = max_principle_bounds(p, 25.0, 10.0, 0.5, 1.5, 0.1, 3)
    B = 10 * nu2
    assert b.lower == pytest.approx(0.5 * (1 + 0.1 * B) ** -3)
    assert b.upper == pytest.approx(1.5 * (1 - 0.1 * B) ** -3)
    with pytest.raises(K.BoundInapplicable):
        max_principle_bounds(p, 25.0, 10.0, 0.5, 1.5, 2.0 / B, 1)


def test_max_principle_rejects_rough_kernels():
    g = PeriodicGrid1D(64, 25.0)
    p = make_params(g, K.discretize(K.Dirac(), g), rho1=K.discretize(K.Indicator(5.0), g))
    with pytest.raises(K.BoundInapplicable):
        max_principle_rate(p, 1.0, 1.0)


def test_duality_functional_and_constant():
    g = PeriodicGrid1D(8, 2.0)
    d = K.discretize(K.Dirac(), g)
    p = make_params(g, d, d1=1.0, d2=1.0, d12=1.0, d21=1.0)
    s = State(np.ones(8), np.ones(8))
    # mu = 2 everywhere: sum dt * vol * (2 + 2) * 2 per state
    assert duality_functional([s, s, s], p, 0.5) == pytest.approx(2 * 0.5 * 2.0 * 8)
    assert duality_functional([s], p, 0.5) == 0.0
    assert duality_constant_A(p, 2.0, 3.0) == pytest.approx(1 + 1 + 1 * (3.0 + 2.0))


def test_initial_state():
    g = PeriodicGrid1D(9, 9.0)
    s = initial_state(Box(1, 3), 2.0, g)
    assert s.u1.sum() == pytest.approx(2.0) and np.all(s.u2 == 2.0)
