"""Cell-averaged convolution kernels and periodic discrete convolution.

A discrete kernel stores one value per grid *offset*: ``values[j]`` is the
average of the continuous kernel over the cell of width ``dx`` centered at
offset ``j*dx`` (``j`` taken modulo ``N``).  The discrete convolution is

    (rho * u)_i = dx * sum_n rho[(i - n) % N] * u[n]

which is a circulant matrix-vector product.  The Dirac measure is the discrete
delta ``values = e_0 / dx`` so the local model is a special case of the
nonlocal one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import fft

from .grid import ConfigurationError, PeriodicGrid1D, PeriodicGrid2D

DIRECT_SUM_LIMIT = 256
GAUSS_POINTS = 10


@dataclass(frozen=True)
class Dirac:
    pass


@dataclass(frozen=True)
class Indicator:
    """``delta**-1`` times the indicator of ``[-delta/2, delta/2]``."""

    delta: float


@dataclass(frozen=True)
class SmoothCos:
    """``cos(2*pi*x/L) + 1`` on a torus of length ``L`` (integral ``L``)."""


@dataclass(frozen=True)
class Hunting:
    """Piecewise-quadratic kernel vanishing at 0, maximal at ``+-r``, support ``[-2r, 2r]``."""

    radius: float


@dataclass(frozen=True)
class Annulus2D:
    """Normalized indicator of ``r2_inner < x**2 + y**2 < r2_outer``.

    With ``quadrant_restricted`` only the part with ``x >= 0, y >= 0`` is kept,
    which breaks evenness on purpose.
    """

    r2_inner: float = 3.0 / 8.0
    r2_outer: float = 0.5
    quadrant_restricted: bool = False
    samples: int = 16


@dataclass(frozen=True)
class Custom:
    """Pointwise kernel ``func(x)`` (1D) or ``func(x, y)`` (2D) on offsets.

    ``smooth`` declares the function C^2, enabling sampled Laplacian bounds.
    """

    func: Callable = field(compare=False)
    smooth: bool = False
    normalize: bool = False


KernelSpec = Union[Dirac, Indicator, SmoothCos, Hunting, Annulus2D, Custom]


class DiscreteKernel:
    """Kernel values on grid offsets plus the convolution machinery."""

    def __init__(self, values, grid, *, is_dirac: bool = False, spec: KernelSpec | None = None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ConfigurationError(f"kernel shape {values.shape} does not match grid {grid.shape}")
        if np.any(values < 0):
            raise ConfigurationError("kernel values must be non-negative")
        values.setflags(write=False)
        self.values = values
        self.grid = grid
        self.is_dirac = is_dirac
        self.spec = spec

    def __repr__(self):
        name = type(self.spec).__name__ if self.spec is not None else "values"
        return f"DiscreteKernel({name}, grid={self.grid!r})"

    @property
    def integral(self) -> float:
        return self.grid.cell_volume * float(self.values.sum())

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.values))

    def reflected(self) -> "DiscreteKernel":
        """Kernel with ``values[j] -> values[-j]``."""
        flipped = np.roll(np.flip(self.values), 1, axis=tuple(range(self.values.ndim)))
        return DiscreteKernel(flipped, self.grid, is_dirac=self.is_dirac)

    def is_even(self, rtol: float = 1e-12) -> bool:
        other = self.reflected().values
        scale = max(float(np.abs(self.values).max()), 1e-300)
        return bool(np.all(np.abs(self.values - other) <= rtol * scale))

    @cached_property
    def _spectrum(self) -> np.ndarray:
        return fft.rfftn(self.values)

    @cached_property
    def dense_matrix(self) -> np.ndarray:
        """``C[i, n] = vol * values[i - n]`` on the flat cell index."""
        vol = self.grid.cell_volume
        if self.values.ndim == 1:
            return vol * sla.circulant(self.values)
        ny, nx = self.values.shape
        j, i = np.divmod(np.arange(ny * nx), nx)
        dj = (j[:, None] - j[None, :]) % ny
        di = (i[:, None] - i[None, :]) % nx
        return vol * self.values[dj, di]

    @cached_property
    def sparse_matrix(self) -> sp.csr_matrix:
        """Same operator as :attr:`dense_matrix`, built from the nonzero offsets."""
        n = self.grid.size
        offsets = np.argwhere(self.values != 0)
        cells = np.arange(n)
        rows, cols, data = [], [], []
        for off in offsets:
            rows.append(cells)
            cols.append(_shift(self.grid, cells, -off))
            data.append(np.full(n, self.values[tuple(off)]))
        if not rows:
            return sp.csr_matrix((n, n))
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        return (self.grid.cell_volume * mat).tocsr()

    def convolve(self, u) -> np.ndarray:
        """``out_i = vol * sum_n values[i - n] * u_n`` with periodic wrap."""
        u = np.asarray(u, dtype=float)
        n = self.grid.size
        if u.shape[0] != n:
            raise ConfigurationError(f"vector of length {u.shape[0]} does not live on a grid of {n} cells")
        if self.is_dirac:
            return u.copy()
        if n <= DIRECT_SUM_LIMIT:
            return self.dense_matrix @ u
        batch = u.shape[1:]
        field_ = u.reshape(self.grid.shape + batch)
        axes = tuple(range(len(self.grid.shape)))
        spec = self._spectrum.reshape(self._spectrum.shape + (1,) * len(batch))
        out = fft.irfftn(fft.rfftn(field_, axes=axes) * spec, s=self.grid.shape, axes=axes)
        return self.grid.cell_volume * out.reshape(u.shape)


def _shift(grid, cells, offset) -> np.ndarray:
    """Flat index of ``cell + offset`` (offset in array-axis order)."""
    if grid.ndim == 1:
        return (cells + int(offset[0])) % grid.size
    nx, ny = grid.nx, grid.ny
    j, i = np.divmod(cells, nx)
    return ((i + int(offset[1])) % nx) + nx * ((j + int(offset[0])) % ny)


def convolve(kernel: DiscreteKernel, u) -> np.ndarray:
    return kernel.convolve(u)


def signed_offsets(n: int, h: float) -> np.ndarray:
    """Offset of each index ``j`` as a representative in ``(-n*h/2, n*h/2]``."""
    j = np.arange(n)
    return np.where(j <= n // 2, j, j - n) * h


def _periodic_cell_averages(antiderivative, n: int, h: float, period: float) -> np.ndarray:
    """Exact cell averages of a compactly supported function, summed over periodic images."""
    centers = signed_offsets(n, h)
    total = np.zeros(n)
    for image in (-1, 0, 1):
        a = centers - h / 2 + image * period
        b = centers + h / 2 + image * period
        total += antiderivative(b) - antiderivative(a)
    return total / h


def _gauss_cell_averages_1d(func, n: int, h: float, period: float) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    centers = signed_offsets(n, h)
    pts = centers[:, None] + 0.5 * h * nodes[None, :]
    pts = (pts + period / 2) % period - period / 2
    return 0.5 * (func(pts) * weights).sum(axis=1)


def _hunting_antiderivative(r: float):
    def prim(x):
        x = np.asarray(x, dtype=float)
        s = np.abs(x)
        inner = s**3 / 3
        outer = r**3 / 3 + ((np.minimum(s, 2 * r) - 2 * r) ** 3 + r**3) / 3
        return np.sign(x) * np.where(s <= r, inner, outer)

    return prim


def hunting_normalization(radius: float) -> float:
    # integral of the unnormalized profile is 4 r^3 / 3
    return 3.0 / (4.0 * radius**3)


def hunting_profile(x, radius: float) -> np.ndarray:
    """Pointwise normalized hunting kernel (for plotting and tests)."""
    x = np.asarray(x, dtype=float)
    s = np.abs(x)
    val = np.where(s < radius, s**2, np.where(s < 2 * radius, (s - 2 * radius) ** 2, 0.0))
    return hunting_normalization(radius) * val


def discretize(spec: KernelSpec, grid) -> DiscreteKernel:
    """Cell-average a kernel specification on ``grid``."""
    if isinstance(spec, Dirac):
        values = np.zeros(grid.shape)
        values[(0,) * len(grid.shape)] = 1.0 / grid.cell_volume
        return DiscreteKernel(values, grid, is_dirac=True, spec=spec)

    if isinstance(grid, PeriodicGrid1D):
        n, h, period = grid.n_cells, grid.dx, grid.length
        if isinstance(spec, Indicator):
            if not 0 < spec.delta <= period:
                raise ConfigurationError(f"indicator width must lie in (0, L], got {spec.delta}")
            d = spec.delta

            def prim(x):
                return np.clip(x, -d / 2, d / 2) / d

            values = _periodic_cell_averages(prim, n, h, period)
        elif isinstance(spec, SmoothCos):
            nu = 2 * np.pi / period
            off = signed_offsets(n, h)
            values = 1.0 + np.cos(nu * off) * (2.0 * np.sin(nu * h / 2) / (nu * h))
        elif isinstance(spec, Hunting):
            r = spec.radius
            if not r > 0 or 4 * r > period:
                raise ConfigurationError(f"hunting kernel support 4r = {4 * r} exceeds the domain")
            values = hunting_normalization(r) * _periodic_cell_averages(_hunting_antiderivative(r), n, h, period)
            values = values / (h * values.sum())
        elif isinstance(spec, Custom):
            values = _gauss_cell_averages_1d(spec.func, n, h, period)
            if spec.normalize:
                values = values / (h * values.sum())
        else:
            raise ConfigurationError(f"{type(spec).__name__} kernels are not available in 1D")
        return DiscreteKernel(np.maximum(values, 0.0), grid, spec=spec)

    if isinstance(grid, PeriodicGrid2D):
        if isinstance(spec, Annulus2D):
            if not 0 <= spec.r2_inner < spec.r2_outer:
                raise ConfigurationError("annulus radii must satisfy 0 <= inner < outer")
            if 2 * np.sqrt(spec.r2_outer) > min(grid.lx, grid.ly):
                raise ConfigurationError("annulus does not fit in the periodic domain")

            def func(x, y):
                r2 = x**2 + y**2
                inside = (r2 > spec.r2_inner) & (r2 < spec.r2_outer)
                if spec.quadrant_restricted:
                    inside &= (x >= 0) & (y >= 0)
                return inside.astype(float)

            values = _sampled_cell_averages_2d(func, grid, spec.samples)
            values = values / (grid.cell_volume * values.sum())
        elif isinstance(spec, Custom):
            values = _gauss_cell_averages_2d(spec.func, grid)
            if spec.normalize:
                values = values / (grid.cell_volume * values.sum())
        else:
            raise ConfigurationError(f"{type(spec).__name__} kernels are not available in 2D")
        return DiscreteKernel(np.maximum(values, 0.0), grid, spec=spec)

    raise ConfigurationError(f"kernels need a periodic grid, got {type(grid).__name__}")


def _sampled_cell_averages_2d(func, grid: PeriodicGrid2D, samples: int) -> np.ndarray:
    # midpoint rule on a samples x samples subgrid of each cell
    sub = (np.arange(samples) + 0.5) / samples - 0.5
    ox = signed_offsets(grid.nx, grid.dx)
    oy = signed_offsets(grid.ny, grid.dy)
    px = (ox[:, None] + grid.dx * sub[None, :]).ravel()
    py = (oy[:, None] + grid.dy * sub[None, :]).ravel()
    vals = func(px[None, :], py[:, None])
    return vals.reshape(grid.ny, samples, grid.nx, samples).mean(axis=(1, 3))


def _gauss_cell_averages_2d(func, grid: PeriodicGrid2D) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    ox = signed_offsets(grid.nx, grid.dx)
    oy = signed_offsets(grid.ny, grid.dy)
    px = (ox[:, None] + 0.5 * grid.dx * nodes[None, :]).ravel()
    py = (oy[:, None] + 0.5 * grid.dy * nodes[None, :]).ravel()
    px = (px + grid.lx / 2) % grid.lx - grid.lx / 2
    py = (py + grid.ly / 2) % grid.ly - grid.ly / 2
    vals = func(px[None, :], py[:, None]).reshape(grid.ny, GAUSS_POINTS, grid.nx, GAUSS_POINTS)
    return 0.25 * np.einsum("aibj,i,j->ab", vals, weights, weights)


class BoundInapplicable(Exception):
    """A structural bound's hypotheses do not hold for the given inputs."""


def laplacian_sup(kernel: DiscreteKernel, samples: int = 10_000) -> float:
    """Sup norm of the second derivative of the continuous kernel (1D only)."""
    spec, grid = kernel.spec, kernel.grid
    if not isinstance(grid, PeriodicGrid1D):
        raise BoundInapplicable("kernel Laplacian bounds are implemented in 1D only")
    if isinstance(spec, SmoothCos):
        return (2 * np.pi / grid.length) ** 2
    if isinstance(spec, Custom) and spec.smooth:
        h = grid.length / samples
        x = np.arange(samples) * h - grid.length / 2
        f = spec.func
        second = (f(x + h) - 2 * f(x) + f(x - h)) / h**2
        scale = 1.0
        if spec.normalize:
            scale = 1.0 / (grid.dx * _gauss_cell_averages_1d(f, grid.n_cells, grid.dx, grid.length).sum())
        return float(np.abs(second).max()) * scale
    raise BoundInapplicable(f"kernel {spec!r} is not declared twice continuously differentiable")
