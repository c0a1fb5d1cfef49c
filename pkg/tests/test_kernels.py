import numpy as np
import pytest
from hypothesis import given, strategies as st

from nonlocal_skt import kernels as K
from nonlocal_skt.grid import ConfigurationError, PeriodicGrid1D, PeriodicGrid2D


def brute_convolve(kernel, u):
    n = u.size
    v = kernel.values.ravel() if kernel.grid.ndim == 1 else None
    out = np.zeros(n)
    for i in range(n):
        for m in range(n):
            out[i] += kernel.grid.cell_volume * v[(i - m) % n] * u[m]
    return out


def test_smooth_cos_integral_is_length():
    g = PeriodicGrid1D(64, 25.0)
    assert K.discretize(K.SmoothCos(), g).integral == pytest.approx(25.0, abs=1e-12)


def test_smooth_cos_exact_cell_averages():
    g = PeriodicGrid1D(16, 25.0)
    k = K.discretize(K.SmoothCos(), g)
    nu = 2 * np.pi / 25
    off = K.signed_offsets(16, g.dx)
    exact = 1 + (np.sin(nu * (off + g.dx / 2)) - np.sin(nu * (off - g.dx / 2))) / (nu * g.dx)
    assert np.allclose(k.values, exact, atol=1e-14)


@pytest.mark.parametrize("spec", [K.Indicator(25 / 4), K.Indicator(0.3), K.Hunting(10 * 25 / 49), K.Dirac()])
def test_normalized_kernels_have_unit_integral(spec):
    g = PeriodicGrid1D(100, 25.0)
    assert K.discretize(spec, g).integral == pytest.approx(1.0, abs=1e-12)


def test_indicator_values_by_hand():
    # delta = 2 dx: weights 1/4, 1/2, 1/4 of the 1/delta height
    g = PeriodicGrid1D(8, 8.0)
    k = K.discretize(K.Indicator(2.0), g)
    assert np.allclose(k.values, [0.5, 0.25, 0, 0, 0, 0, 0, 0.25])


def test_hunting_profile_shape():
    r = 1.0
    x = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    c = K.hunting_normalization(r)
    assert np.allclose(K.hunting_profile(x, r), c * np.array([0, 0.25, 1.0, 0.25, 0, 0]))


def test_dirac_convolution_is_identity(rng):
    g = PeriodicGrid1D(12, 3.0)
    u = rng.random(12)
    assert np.array_equal(K.discretize(K.Dirac(), g).convolve(u), u)


@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_convolution_matches_brute_force(n, seed):
    g = PeriodicGrid1D(n, 5.0)
    rng = np.random.default_rng(seed)
    k = K.DiscreteKernel(rng.random(n), g)
    u = rng.random(n)
    ref = brute_convolve(k, u)
    assert np.allclose(k.convolve(u), ref, rtol=1e-12, atol=1e-12)
    assert np.allclose(k.sparse_matrix @ u, ref, rtol=1e-12, atol=1e-12)


def test_fft_path_matches_dense(rng):
    g = PeriodicGrid1D(600, 25.0)
    k = K.discretize(K.Indicator(3.0), g)
    u = rng.random(600)
    assert np.allclose(k.convolve(u), k.dense_matrix @ u, rtol=1e-12, atol=1e-12)


def test_fft_path_2d_matches_dense(rng):
    g = PeriodicGrid2D(20, 15, 4.0, 3.0)
    k = K.discretize(K.Annulus2D(quadrant_restricted=True), g)
    u = rng.random(g.size)
    assert np.allclose(k.convolve(u), k.dense_matrix @ u, rtol=1e-11, atol=1e-12)
    assert np.allclose(k.sparse_matrix @ u, k.dense_matrix @ u, rtol=1e-11, atol=1e-12)


def test_annulus_symmetry():
    g = PeriodicGrid2D(40, 30, 4.0, 3.0)
    sym = K.discretize(K.Annulus2D(), g)
    quad = K.discretize(K.Annulus2D(quadrant_restricted=True), g)
    assert sym.is_even() and not quad.is_even()
    assert sym.integral == pytest.approx(1.0) and quad.integral == pytest.approx(1.0)


def test_reflection_is_involution(rng):
    g = PeriodicGrid1D(9, 1.0)
    k = K.DiscreteKernel(rng.random(9), g)
    assert np.array_equal(k.reflected().reflected().values, k.values)
    assert k.reflected().values[1] == k.values[-1]


def test_laplacian_sup():
    g = PeriodicGrid1D(64, 25.0)
    assert K.laplacian_sup(K.discretize(K.SmoothCos(), g)) == pytest.approx((2 * np.pi / 25) ** 2)
    with pytest.raises(K.BoundInapplicable):
        K.laplacian_sup(K.discretize(K.Indicator(2.0), g))
    gauss = K.Custom(lambda x: np.exp(-x**2), smooth=True)
    assert K.laplacian_sup(K.discretize(gauss, g)) == pytest.approx(2.0, rel=1e-3)


@pytest.mark.parametrize("spec", [K.Indicator(0.0), K.Indicator(30.0), K.Hunting(7.0)])
def test_bad_kernel_parameters(spec):
    with pytest.raises(ConfigurationError):
        K.discretize(spec, PeriodicGrid1D(32, 25.0))


def test_negative_values_rejected():
    with pytest.raises(ConfigurationError):
        K.DiscreteKernel(np.array([1.0, -1.0]), PeriodicGrid1D(2, 1.0))
