"""Uniform meshes: periodic 1D/2D tori, the bounded unit interval, time grids.

Cell ``i`` of a periodic 1D grid is the interval ``[i*dx, (i+1)*dx)``, so
grids whose cell counts differ by an integer factor are nested.  Kernel
offsets are handled separately (see :mod:`nonlocal_skt.kernels`): the offset
between cells ``i`` and ``n`` is always ``(i - n)*dx``.

2D grids store fields as flat arrays in row-major order, index ``i + nx*j``
for cell ``(i, j)``, i.e. ``field.reshape(ny, nx)[j, i]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class ConfigurationError(ValueError):
    """Invalid grid, kernel or run configuration."""


@dataclass(frozen=True)
class PeriodicGrid1D:
    n_cells: int
    length: float

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ConfigurationError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        if not self.length > 0:
            raise ConfigurationError(f"length must be positive, got {self.length}")

    ndim = 1

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def size(self) -> int:
        return self.n_cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_cells,)

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.dx,)

    @property
    def cell_volume(self) -> float:
        return self.dx

    @property
    def volume(self) -> float:
        return self.length

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @cached_property
    def edges(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.dx

    @property
    def widths(self) -> np.ndarray:
        return np.full(self.n_cells, self.dx)

    def neighbor(self, i: int, step: int) -> int:
        return (i + step) % self.n_cells

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Periodic 3-point Laplacian ``(w[i+1] - 2 w[i] + w[i-1]) / dx**2``."""
        return _periodic_second_difference(self.n_cells, self.dx).tocsr()


@dataclass(frozen=True)
class PeriodicGrid2D:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        for name in ("nx", "ny"):
            v = getattr(self, name)
            if int(v) != v or v < 2:
                raise ConfigurationError(f"{name} must be an integer >= 2, got {v}")
        for name in ("lx", "ly"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    ndim = 2

    @property
    def dx(self) -> float:
        return self.lx / self.nx

    @property
    def dy(self) -> float:
        return self.ly / self.ny

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, ...]:
        # array layout (rows = y, columns = x)
        return (self.ny, self.nx)

    @property
    def spacings(self) -> tuple[float, ...]:
        # ordered like ``shape``
        return (self.dy, self.dx)

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy

    @property
    def volume(self) -> float:
        return self.lx * self.ly

    @cached_property
    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates ``(X, Y)``, each of shape ``(ny, nx)``."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y)

    def index(self, i: int, j: int) -> int:
        return (i % self.nx) + self.nx * (j % self.ny)

    def neighbor(self, cell: int, step: tuple[int, int]) -> int:
        i, j = cell % self.nx, cell // self.nx
        return self.index(i + step[0], j + step[1])

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Periodic 5-point Laplacian on the row-major linearization."""
        lx = _periodic_second_difference(self.nx, self.dx)
        ly = _periodic_second_difference(self.ny, self.dy)
        return (sp.kron(sp.identity(self.ny), lx) + sp.kron(ly, sp.identity(self.nx))).tocsr()


@dataclass(frozen=True)
class BoundedGrid1D:
    """Uniform mesh of (0, 1); cell ``c`` is ``[c*dx, (c+1)*dx]``."""

    n_cells: int
    length: float = field(default=1.0, init=False)

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ConfigurationError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    ndim = 1

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def size(self) -> int:
        return self.n_cells

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_cells,)

    @property
    def spacings(self) -> tuple[float, ...]:
        return (self.dx,)

    @property
    def cell_volume(self) -> float:
        return self.dx

    @property
    def volume(self) -> float:
        return 1.0

    @cached_property
    def interfaces(self) -> np.ndarray:
        """All interface points, from 0 to 1 inclusive."""
        return np.arange(self.n_cells + 1) * self.dx

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    @cached_property
    def edges(self) -> np.ndarray:
        return self.interfaces


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    n_steps: int

    def __post_init__(self):
        if not self.t_final > 0:
            raise ConfigurationError("t_final must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError("n_steps must be a positive integer")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def _periodic_second_difference(n: int, h: float) -> sp.spmatrix:
    main = np.full(n, -2.0)
    off = np.ones(n)
    mat = sp.diags([off[:-1], main, off[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
    # n == 2: both neighbours are the same cell
    mat[0, n - 1] += 1.0
    mat[n - 1, 0] += 1.0
    return mat.tocsr() / h**2


def make_periodic_1d(n_cells: int, length: float) -> PeriodicGrid1D:
    return PeriodicGrid1D(n_cells, length)


def make_periodic_2d(nx: int, ny: int, lx: float, ly: float) -> PeriodicGrid2D:
    return PeriodicGrid2D(nx, ny, lx, ly)


def project_to_coarser(fine_values, coarse: PeriodicGrid1D, fine: PeriodicGrid1D | None = None) -> np.ndarray:
    """Average fine-grid cell values onto a nested coarse grid.

    ``fine`` is optional; when given it must share the coarse grid's length.
    The projection is mass preserving: ``dx_c * sum(coarse) == dx_f * sum(fine)``.
    """
    fine_values = np.asarray(fine_values, dtype=float)
    n_fine = fine_values.shape[0]
    if fine is not None:
        if not np.isclose(fine.length, coarse.length, rtol=1e-14, atol=0.0):
            raise ConfigurationError("fine and coarse grids have different lengths")
        if fine.n_cells != n_fine:
            raise ConfigurationError("fine values do not match the fine grid")
    if n_fine % coarse.n_cells:
        raise ConfigurationError(
            f"fine grid ({n_fine} cells) is not nested in coarse grid ({coarse.n_cells} cells)"
        )
    ratio = n_fine // coarse.n_cells
    return fine_values.reshape(coarse.n_cells, ratio).mean(axis=1)
