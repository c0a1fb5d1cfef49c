"""Finite volume operators of the nonlocal SKT system on periodic grids.

The implicit step for species ``j`` is

    (u_j - u_j_prev)/dt - Lap(mu_j u_j) - R_j(u1, u2) = 0

with ``mu1 = d1 + d11 sigma1*u1 + d12 rho1*u2`` and
``mu2 = d2 + d21 rho2*u1 + d22 sigma2*u2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .grid import ConfigurationError, PeriodicGrid1D, PeriodicGrid2D
from .kernels import BoundInapplicable, DiscreteKernel, laplacian_sup
from .norms import DomainError

# ---------------------------------------------------------------- reactions


@dataclass(frozen=True)
class Zero:
    def evaluate(self, u1, u2):
        return np.zeros_like(u1), np.zeros_like(u2)

    def jacobian(self, u1, u2):
        z = np.zeros_like(u1)
        return z, z, z, z


@dataclass(frozen=True)
class LotkaVolterra:
    """``R_j = u_j (a_j0 - a_j1 u1 - a_j2 u2)``."""

    a10: float = 0.0
    a11: float = 0.0
    a12: float = 0.0
    a20: float = 0.0
    a21: float = 0.0
    a22: float = 0.0

    def __post_init__(self):
        if min(self.a10, self.a11, self.a12, self.a20, self.a21, self.a22) < 0:
            raise ConfigurationError("Lotka-Volterra coefficients must be non-negative")

    def evaluate(self, u1, u2):
        return (
            u1 * (self.a10 - self.a11 * u1 - self.a12 * u2),
            u2 * (self.a20 - self.a21 * u1 - self.a22 * u2),
        )

    def jacobian(self, u1, u2):
        return (
            self.a10 - 2 * self.a11 * u1 - self.a12 * u2,
            -self.a12 * u1,
            -self.a21 * u2,
            self.a20 - self.a21 * u1 - 2 * self.a22 * u2,
        )


@dataclass(frozen=True)
class SegelLevin:
    """``R1 = a u1 + e u1^2 - b u1 u2``, ``R2 = -d u2^2 + c u1 u2``."""

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0
    e: float = 1.0 / 3.0

    def evaluate(self, u1, u2):
        return (
            self.a * u1 + self.e * u1**2 - self.b * u1 * u2,
            -self.d * u2**2 + self.c * u1 * u2,
        )

    def jacobian(self, u1, u2):
        return (
            self.a + 2 * self.e * u1 - self.b * u2,
            -self.b * u1,
            self.c * u2,
            -2 * self.d * u2 + self.c * u1,
        )

    def equilibrium(self) -> tuple[float, float]:
        den = self.b * self.c - self.d * self.e
        return self.a * self.d / den, self.a * self.c / den


@dataclass(frozen=True)
class MimuraNishiuraYamaguti:
    """``R1 = a u1 + e u1^2 - d u1^3 - b u1 u2``, ``R2 = -f u2 - g u2^2 + c u1 u2``."""

    a: float = 35.0 / 9.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0 / 9.0
    e: float = 16.0 / 9.0
    f: float = 1.0
    g: float = 2.0 / 5.0

    def evaluate(self, u1, u2):
        return (
            self.a * u1 + self.e * u1**2 - self.d * u1**3 - self.b * u1 * u2,
            -self.f * u2 - self.g * u2**2 + self.c * u1 * u2,
        )

    def jacobian(self, u1, u2):
        return (
            self.a + 2 * self.e * u1 - 3 * self.d * u1**2 - self.b * u2,
            -self.b * u1,
            self.c * u2,
            -self.f - 2 * self.g * u2 + self.c * u1,
        )


ReactionSpec = Union[Zero, LotkaVolterra, SegelLevin, MimuraNishiuraYamaguti]

# ---------------------------------------------------------------- params / state


@dataclass(frozen=True)
class SchemeParams:
    """Diffusion constants, kernel assignment and reaction of one run.

    ``d12`` or ``d21`` may be zero (some pattern-formation runs use this); the
    entropy structure then degenerates and :attr:`entropy_structure` is False.
    """

    sigma1: DiscreteKernel
    sigma2: DiscreteKernel
    rho1: DiscreteKernel
    rho2: DiscreteKernel
    d1: float = 0.0
    d2: float = 0.0
    d11: float = 0.0
    d12: float = 1.0
    d21: float = 1.0
    d22: float = 0.0
    reaction: ReactionSpec = field(default_factory=Zero)

    def __post_init__(self):
        for name in ("d1", "d2", "d11", "d12", "d21", "d22"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigurationError(f"{name} must be a finite non-negative number, got {v}")
        if len({k.grid for k in (self.sigma1, self.sigma2, self.rho1, self.rho2)}) > 1:
            raise ConfigurationError("all kernels must live on the same grid")

    @property
    def grid(self):
        return self.rho1.grid

    @property
    def coefficients(self) -> dict:
        return {n: getattr(self, n) for n in ("d1", "d2", "d11", "d12", "d21", "d22")}

    def symmetry_holds(self, rtol: float = 1e-12) -> bool:
        """Kernel symmetry: sigma_j even and rho2 the reflection of rho1."""
        if not (self.sigma1.is_even(rtol) and self.sigma2.is_even(rtol)):
            return False
        refl = self.rho1.reflected().values
        scale = max(float(np.abs(refl).max()), 1e-300)
        return bool(np.all(np.abs(refl - self.rho2.values) <= rtol * scale))

    @property
    def entropy_structure(self) -> bool:
        """Positive cross diffusion, symmetric kernels and no reaction."""
        return self.d12 > 0 and self.d21 > 0 and isinstance(self.reaction, Zero) and self.symmetry_holds()

    def with_(self, **changes) -> "SchemeParams":
        from dataclasses import replace

        return replace(self, **changes)


def make_params(grid, sigma1, sigma2=None, rho1=None, rho2=None, **coefficients) -> SchemeParams:
    """Build params from kernels; ``rho2`` defaults to the reflection of ``rho1``."""
    sigma2 = sigma1 if sigma2 is None else sigma2
    rho1 = sigma1 if rho1 is None else rho1
    rho2 = rho1.reflected() if rho2 is None else rho2
    return SchemeParams(sigma1=sigma1, sigma2=sigma2, rho1=rho1, rho2=rho2, **coefficients)


@dataclass
class State:
    u1: np.ndarray
    u2: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != self.u2.shape or self.u1.ndim != 1:
            raise ConfigurationError("u1 and u2 must be flat cell vectors of equal length")

    def copy(self) -> "State":
        return State(self.u1.copy(), self.u2.copy(), self.time)

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])


# ---------------------------------------------------------------- initial data


@dataclass(frozen=True)
class Box:
    """``base + height * indicator([a, b])`` in 1D, integrated exactly."""

    a: float
    b: float
    height: float = 1.0
    base: float = 0.0


@dataclass(frozen=True)
class Box2D:
    """``base + height * indicator([ax, bx] x [ay, by])``, integrated exactly."""

    ax: float
    bx: float
    ay: float
    by: float
    height: float = 1.0
    base: float = 0.0


InitialData = Union[Box, Box2D, float, Callable]


def _overlap(lo, hi, a, b, period):
    total = 0.0
    for image in (-1, 0, 1):
        total = total + np.clip(np.minimum(hi, b + image * period) - np.maximum(lo, a + image * period), 0, None)
    return total


def _gauss_average_1d(func, edges):
    nodes, weights = np.polynomial.legendre.leggauss(10)
    lo, hi = edges[:-1], edges[1:]
    pts = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * nodes[None, :]
    return 0.5 * (np.asarray(func(pts), dtype=float) * weights).sum(axis=1)


def cell_averages(data: InitialData, grid) -> np.ndarray:
    """Cell averages of a box, a constant, or a pointwise function."""
    if isinstance(data, Box):
        if data.base < 0 or data.base + data.height < 0:
            raise DomainError("initial data must be non-negative")
        if not isinstance(grid, PeriodicGrid1D):
            raise ConfigurationError("Box initial data needs a 1D grid")
        e = grid.edges
        values = data.base + data.height * _overlap(e[:-1], e[1:], data.a, data.b, grid.length) / grid.dx
    elif isinstance(data, Box2D):
        if data.base < 0 or data.base + data.height < 0:
            raise DomainError("initial data must be non-negative")
        if not isinstance(grid, PeriodicGrid2D):
            raise ConfigurationError("Box2D initial data needs a 2D grid")
        ex = np.arange(grid.nx + 1) * grid.dx
        ey = np.arange(grid.ny + 1) * grid.dy
        fx = _overlap(ex[:-1], ex[1:], data.ax, data.bx, grid.lx) / grid.dx
        fy = _overlap(ey[:-1], ey[1:], data.ay, data.by, grid.ly) / grid.dy
        values = (data.base + data.height * np.outer(fy, fx)).ravel()
    elif np.isscalar(data):
        if data < 0:
            raise DomainError("initial data must be non-negative")
        values = np.full(grid.size, float(data))
    elif callable(data):
        if isinstance(grid, PeriodicGrid2D):
            nodes, weights = np.polynomial.legendre.leggauss(10)
            px = ((np.arange(grid.nx) + 0.5)[:, None] + 0.5 * nodes[None, :]).ravel() * grid.dx
            py = ((np.arange(grid.ny) + 0.5)[:, None] + 0.5 * nodes[None, :]).ravel() * grid.dy
            vals = np.asarray(data(px[None, :], py[:, None]), dtype=float)
            if np.any(vals < 0):
                raise DomainError("initial data must be non-negative")
            vals = vals.reshape(grid.ny, 10, grid.nx, 10)
            values = (0.25 * np.einsum("aibj,i,j->ab", vals, weights, weights)).ravel()
        else:
            nodes = np.polynomial.legendre.leggauss(10)[0]
            e = grid.edges
            pts = 0.5 * (e[:-1] + e[1:])[:, None] + 0.5 * grid.dx * nodes[None, :]
            if np.any(np.asarray(data(pts)) < 0):
                raise DomainError("initial data must be non-negative")
            values = _gauss_average_1d(data, e)
    else:
        raise ConfigurationError(f"unsupported initial data {data!r}")
    return np.maximum(values, 0.0)


def initial_state(u1_fn: InitialData, u2_fn: InitialData, grid) -> State:
    return State(cell_averages(u1_fn, grid), cell_averages(u2_fn, grid), 0.0)


# ---------------------------------------------------------------- operators


def mu(state: State, params: SchemeParams) -> tuple[np.ndarray, np.ndarray]:
    p = params
    mu1 = np.full_like(state.u1, p.d1)
    mu2 = np.full_like(state.u2, p.d2)
    if p.d11:
        mu1 += p.d11 * p.sigma1.convolve(state.u1)
    if p.d12:
        mu1 += p.d12 * p.rho1.convolve(state.u2)
    if p.d21:
        mu2 += p.d21 * p.rho2.convolve(state.u1)
    if p.d22:
        mu2 += p.d22 * p.sigma2.convolve(state.u2)
    return mu1, mu2


def discrete_laplacian(w, grid) -> np.ndarray:
    return grid.laplacian @ np.asarray(w, dtype=float)


def fluxes(state: State, params: SchemeParams):
    """Two-point fluxes ``F_{i+1/2} = (u_i mu_i - u_{i+1} mu_{i+1}) / h`` per axis.

    Returns ``(F1, F2)``; in 1D each is a length-N vector indexed by the left
    cell, in 2D each is a tuple of per-axis arrays shaped like the grid.
    """
    grid = params.grid
    m1, m2 = mu(state, params)
    out = []
    for u, m in ((state.u1, m1), (state.u2, m2)):
        w = (u * m).reshape(grid.shape)
        per_axis = tuple((w - np.roll(w, -1, axis=a)) / h for a, h in enumerate(grid.spacings))
        out.append(per_axis[0] if grid.ndim == 1 else per_axis)
    return tuple(out)


def fluxes_centered(state: State, params: SchemeParams):
    """Same fluxes written as ``mu_{i+1/2} (u_i - u_{i+1})/h + u_{i+1/2} (mu_i - mu_{i+1})/h``."""
    grid = params.grid
    m1, m2 = mu(state, params)
    out = []
    for u, m in ((state.u1, m1), (state.u2, m2)):
        uf, mf = u.reshape(grid.shape), m.reshape(grid.shape)
        per_axis = []
        for a, h in enumerate(grid.spacings):
            un, mn = np.roll(uf, -1, axis=a), np.roll(mf, -1, axis=a)
            per_axis.append(0.5 * (mf + mn) * (uf - un) / h + 0.5 * (uf + un) * (mf - mn) / h)
        out.append(per_axis[0] if grid.ndim == 1 else tuple(per_axis))
    return tuple(out)


def flux_divergence(flux, grid) -> np.ndarray:
    """``sum_axes (F_{i+1/2} - F_{i-1/2}) / h``, flattened."""
    per_axis = (flux,) if grid.ndim == 1 else flux
    total = np.zeros(grid.shape)
    for a, (f, h) in enumerate(zip(per_axis, grid.spacings)):
        f = np.reshape(f, grid.shape)
        total += (f - np.roll(f, 1, axis=a)) / h
    return total.ravel()


def reaction(state: State, spec: ReactionSpec):
    return spec.evaluate(state.u1, state.u2)


def step_residual(candidate: State, previous: State, dt: float, params: SchemeParams):
    """Per-cell residuals ``(r1, r2)`` of the implicit step."""
    grid = params.grid
    m1, m2 = mu(candidate, params)
    r1, r2 = params.reaction.evaluate(candidate.u1, candidate.u2)
    res1 = (candidate.u1 - previous.u1) / dt - grid.laplacian @ (m1 * candidate.u1) - r1
    res2 = (candidate.u2 - previous.u2) / dt - grid.laplacian @ (m2 * candidate.u2) - r2
    return res1, res2


def mass(u, grid) -> float:
    return float(grid.cell_volume * np.sum(u))


# ---------------------------------------------------------------- structural bounds


@dataclass(frozen=True)
class MaxPrincipleBounds:
    lower: float
    upper: float
    dt_limit: float
    rate: float
    applicable: bool


def max_principle_rate(params: SchemeParams, mass1: float, mass2: float, combine: str = "min") -> float:
    """Kernel-Laplacian rate ``B`` of the maximum principle.

    ``combine="min"`` uses the published formula; ``"max"`` the per-species
    bound that the underlying L-infinity argument actually controls.
    """
    if combine not in ("min", "max"):
        raise ConfigurationError("combine must be 'min' or 'max'")
    pick = min if combine == "min" else max
    p = params

    def term(coef, m, kernel):
        return 0.0 if coef * m == 0 else coef * m * laplacian_sup(kernel)

    self_part = pick(term(p.d11, mass1, p.sigma1), term(p.d22, mass2, p.sigma2))
    cross_coef = pick(p.d12 * mass2, p.d21 * mass1)
    cross_part = 0.0 if cross_coef == 0 else cross_coef * laplacian_sup(p.rho1)
    return self_part + cross_part


def max_principle_bounds(params, mass1, mass2, gamma, Gamma, dt, k, combine: str = "min") -> MaxPrincipleBounds:
    """``e_k = gamma (1 + dt B)^-k`` and ``E_k = Gamma (1 - dt B)^-k``.

    Raises :class:`BoundInapplicable` for non-smooth kernels or ``dt >= 1/B``.
    """
    if gamma < 0 or Gamma < gamma:
        raise ConfigurationError("need 0 <= gamma <= Gamma")
    B = max_principle_rate(params, mass1, mass2, combine)
    dt_limit = np.inf if B == 0 else 1.0 / B
    if dt >= dt_limit:
        raise BoundInapplicable(f"dt = {dt} is not below the limit {dt_limit}")
    return MaxPrincipleBounds(
        lower=gamma * (1 + dt * B) ** (-k),
        upper=Gamma * (1 - dt * B) ** (-k),
        dt_limit=dt_limit,
        rate=B,
        applicable=True,
    )


def duality_functional(trajectory, params: SchemeParams, dt) -> float:
    """``sum_k dt_k sum_i vol (mu1 u1 + mu2 u2)(u1 + u2)`` over ``trajectory[1:]``.

    ``dt`` is a scalar or one value per step; the first state is the initial
    datum and is not summed.
    """
    states = list(trajectory)[1:]
    if not states:
        return 0.0
    dts = np.broadcast_to(np.asarray(dt, dtype=float), (len(states),))
    vol = params.grid.cell_volume
    total = 0.0
    for s, h in zip(states, dts):
        m1, m2 = mu(s, params)
        total += h * vol * float(np.sum((m1 * s.u1 + m2 * s.u2) * (s.u1 + s.u2)))
    return total


def duality_constant_A(params: SchemeParams, mass1: float, mass2: float) -> float:
    """``A = d1 + d2 + d11 m1 |sigma1|_1 + d22 m2 |sigma2|_1 + |rho|_1 (d12 m2 + d21 m1)``."""
    p = params
    return (
        p.d1
        + p.d2
        + p.d11 * mass1 * p.sigma1.integral
        + p.d22 * mass2 * p.sigma2.integral
        + p.rho1.integral * (p.d12 * mass2 + p.d21 * mass1)
    )
