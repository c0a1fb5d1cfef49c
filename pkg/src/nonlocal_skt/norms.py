"""Discrete norms, the Boltzmann entropy, its dissipation, and 1D Wasserstein-1."""
from __future__ import annotations

import numpy as np

from .grid import ConfigurationError


class DomainError(ValueError):
    """Input outside the domain of a functional (e.g. a negative density)."""


def lp_norm(u, grid, p: float = 2) -> float:
    u = np.asarray(u, dtype=float)
    if p == np.inf:
        return float(np.abs(u).max())
    if p < 1:
        raise ConfigurationError("p must be >= 1")
    return float((grid.cell_volume * np.sum(np.abs(u) ** p)) ** (1.0 / p))


def w1p_seminorm(u, grid, p: float = 2) -> float:
    """Discrete W^{1,p} seminorm with periodic differences (summed over axes in 2D)."""
    if p < 1 or p == np.inf:
        raise ConfigurationError("p must lie in [1, inf)")
    field = np.asarray(u, dtype=float).reshape(grid.shape)
    total = 0.0
    for axis, h in enumerate(grid.spacings):
        diff = (np.roll(field, -1, axis=axis) - field) / h
        total += grid.cell_volume * np.sum(np.abs(diff) ** p)
    return float(total ** (1.0 / p))


def w1p_norm(u, grid, p: float = 2) -> float:
    return w1p_seminorm(u, grid, p) + lp_norm(u, grid, p)


def bv_norm(u, grid) -> float:
    """Total variation plus L1 norm of a piecewise-constant periodic function (1D)."""
    u = np.asarray(u, dtype=float)
    return float(np.abs(np.roll(u, -1) - u).sum() + lp_norm(u, grid, 1))


def l2_space_time(values, grid, dts) -> float:
    """``(sum_k dt_k sum_i vol |w^k_i|^2)^{1/2}`` for a sequence of cell vectors."""
    values = np.asarray(values, dtype=float)
    dts = np.broadcast_to(np.asarray(dts, dtype=float), (values.shape[0],))
    return float(np.sqrt(np.sum(dts * grid.cell_volume * np.sum(values**2, axis=1))))


def _check_nonnegative(*arrays):
    for a in arrays:
        if np.any(np.asarray(a) < 0):
            raise DomainError("densities must be non-negative")


def entropy_density(x, d: float) -> np.ndarray:
    """``(x (log x - 1) + 1) / d`` with the continuous value ``1/d`` at 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return (xlogx - x + 1.0) / d


def entropy(u1, u2, d12: float, d21: float, grid) -> float:
    _check_nonnegative(u1, u2)
    if not (d12 > 0 and d21 > 0):
        raise DomainError("the entropy needs positive cross-diffusion coefficients")
    vol = grid.cell_volume
    return float(vol * (entropy_density(u1, d12).sum() + entropy_density(u2, d21).sum()))


def _pair_term(a, b, kernel_values, grid) -> float:
    """``sum_j vol*k_j sum_axes w_a sum_i (sqrt(a_{i+e} b_{i+e-j}) - sqrt(a_i b_{i-j}))^2``.

    ``w_a = vol / h_a**2`` so that in 1D this is ``sum_j k_j sum_i (...)^2``.
    """
    shape = grid.shape
    axes = tuple(range(len(shape)))
    fa = np.sqrt(np.asarray(a, dtype=float)).reshape(shape)
    fb = np.sqrt(np.asarray(b, dtype=float)).reshape(shape)
    vol = grid.cell_volume
    total = 0.0
    for off in np.argwhere(kernel_values != 0):
        shifted_b = np.roll(fb, tuple(int(o) for o in off), axis=axes)  # b_{i - j}
        prod = fa * shifted_b
        weight = vol * kernel_values[tuple(off)]
        for axis, h in enumerate(grid.spacings):
            diff = np.roll(prod, -1, axis=axis) - prod
            total += weight * (vol / h**2) * np.sum(diff**2)
    return float(total)


def dissipation(u1, u2, params, grid) -> float:
    """Entropy dissipation functional D(u1, u2); O(N * support) cost.

    ``params`` supplies ``d1, d2, d11, d12, d21, d22`` and the kernels
    ``sigma1, sigma2, rho1`` (``rho1`` plays the role of the symmetric-pair kernel).
    """
    _check_nonnegative(u1, u2)
    p = params
    if not (p.d12 > 0 and p.d21 > 0):
        raise DomainError("the dissipation needs positive cross-diffusion coefficients")
    total = 0.0
    if p.d11:
        total += 2 * p.d11 / p.d12 * _pair_term(u1, u1, p.sigma1.values, grid)
    if p.d22:
        total += 2 * p.d22 / p.d21 * _pair_term(u2, u2, p.sigma2.values, grid)
    if p.d1:
        total += 4 * p.d1 / p.d12 * w1p_seminorm(np.sqrt(u1), grid, 2) ** 2
    if p.d2:
        total += 4 * p.d2 / p.d21 * w1p_seminorm(np.sqrt(u2), grid, 2) ** 2
    total += 4 * _pair_term(u1, u2, p.rho1.values, grid)
    return total


def _cdf_l1(diff_density, h: float) -> float:
    """Exact integral of |F| where F' is piecewise constant and F(0) = 0."""
    nodes = np.concatenate(([0.0], np.cumsum(diff_density) * h))
    a, b = nodes[:-1], nodes[1:]
    same = a * b >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing = np.where(same, 0.0, (a**2 + b**2) / (2 * (np.abs(a) + np.abs(b))))
    area = np.where(same, 0.5 * (np.abs(a) + np.abs(b)), crossing)
    return float(h * area.sum())


def wasserstein1(f, g, grid, rtol: float = 1e-10) -> float:
    """W1 between two equal-mass piecewise-constant densities on ``[0, L)``.

    Uses the cumulative-distribution formula on the interval; periodicity is
    ignored.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_nonnegative(f, g)
    h = grid.dx
    mf, mg = h * f.sum(), h * g.sum()
    if abs(mf - mg) > rtol * max(abs(mf), abs(mg)):
        raise DomainError(f"masses differ: {mf!r} vs {mg!r}")
    return _cdf_l1(f - g, h)
