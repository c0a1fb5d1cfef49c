"""Linear discrete Kolmogorov equation ``dz/dt = Lap(mu z)`` and its dual.

Forward step: ``M^k z^k = z^{k-1}`` with
``M^k = I - dt Lap diag(mu^k)``; dual step: ``(M^k)^T v^k = v^{k+1} + dt S^k``.
``M^k`` is a periodic tridiagonal M-matrix with unit column sums.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .grid import ConfigurationError, PeriodicGrid1D
from .kernels import BoundInapplicable


@dataclass
class KolmogorovProblem:
    grid: PeriodicGrid1D
    mu: np.ndarray  # (n_steps, N); row k-1 holds mu^k
    dt: float
    z0: np.ndarray

    def __post_init__(self):
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=float))
        self.z0 = np.asarray(self.z0, dtype=float)
        n = self.grid.n_cells
        if self.mu.shape[1] != n or self.z0.shape != (n,):
            raise ConfigurationError("mu and z0 must be cell vectors of the grid")
        if np.any(self.mu < 0):
            raise ConfigurationError("mu must be non-negative")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")

    @property
    def n_steps(self) -> int:
        return self.mu.shape[0]

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt


def smooth_problem(n_cells: int, n_steps: int = 20, dt: float = 1e-3, length: float = 1.0, amplitude: float = 0.5):
    """Positive mobility ``1 + a sin(2 pi x / L) cos(t)`` with ``z0 = 1 + cos(2 pi x / L) / 2``."""
    grid = PeriodicGrid1D(n_cells, length)
    x = grid.centers
    t = dt * np.arange(1, n_steps + 1)[:, None]
    mu = 1.0 + amplitude * np.sin(2 * np.pi * x / length)[None, :] * np.cos(t)
    return KolmogorovProblem(grid, mu, dt, 1.0 + 0.5 * np.cos(2 * np.pi * x / length))


# ---------------------------------------------------------------- linear algebra


def _m_diagonals(mu_k, dt, grid):
    """``(sub, diag, sup)`` with row ``i``: sub[i] z[i-1] + diag[i] z[i] + sup[i] z[i+1]."""
    c = dt / grid.dx**2
    mu_k = np.asarray(mu_k, dtype=float)
    return -c * np.roll(mu_k, 1), 1 + 2 * c * mu_k, -c * np.roll(mu_k, -1)


def assemble_m_matrix(mu_k, dt, grid) -> sp.csr_matrix:
    n = grid.n_cells
    sub, diag, sup = _m_diagonals(mu_k, dt, grid)
    rows = np.concatenate([np.arange(n)] * 3)
    cols = np.concatenate([(np.arange(n) - 1) % n, np.arange(n), (np.arange(n) + 1) % n])
    # duplicates (n == 2) are summed by the COO -> CSR conversion
    return sp.coo_matrix((np.concatenate([sub, diag, sup]), (rows, cols)), shape=(n, n)).tocsr()


def periodic_tridiagonal_solve(sub, diag, sup, rhs) -> np.ndarray:
    """Solve a cyclic tridiagonal system (banded LU plus a Sherman-Morrison correction)."""
    sub, diag, sup = (np.asarray(a, dtype=float) for a in (sub, diag, sup))
    rhs = np.asarray(rhs, dtype=float)
    n = diag.size
    if n < 3:
        dense = np.zeros((n, n))
        for i in range(n):
            dense[i, i] += diag[i]
            dense[i, (i - 1) % n] += sub[i]
            dense[i, (i + 1) % n] += sup[i]
        return np.linalg.solve(dense, rhs)
    alpha = sub[0]  # entry (0, n-1)
    beta = sup[-1]  # entry (n-1, 0)
    gamma = -diag[0]
    b = diag.copy()
    b[0] -= gamma
    b[-1] -= alpha * beta / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1] = b
    ab[2, :-1] = sub[1:]
    u = np.zeros(n)
    u[0], u[-1] = gamma, beta
    v0, vn = 1.0, alpha / gamma
    rhs2 = rhs.reshape(n, -1)
    sol = sla.solve_banded((1, 1), ab, np.column_stack([rhs2, u]), check_finite=False)
    y, q = sol[:, :-1], sol[:, -1]
    factor = (v0 * y[0] + vn * y[-1]) / (1 + v0 * q[0] + vn * q[-1])
    return (y - np.outer(q, factor)).reshape(rhs.shape)


def forward_step(z_prev, mu_k, dt, grid) -> np.ndarray:
    """Solve ``M^k z = z_prev``."""
    return periodic_tridiagonal_solve(*_m_diagonals(mu_k, dt, grid), z_prev)


def transpose_step(rhs, mu_k, dt, grid) -> np.ndarray:
    """Solve ``(M^k)^T v = rhs``."""
    sub, diag, sup = _m_diagonals(mu_k, dt, grid)
    # (M^T)[i, i-1] = M[i-1, i] = sup[i-1]; (M^T)[i, i+1] = M[i+1, i] = sub[i+1]
    return periodic_tridiagonal_solve(np.roll(sup, 1), diag, np.roll(sub, -1), rhs)


def forward_solve(problem: KolmogorovProblem) -> np.ndarray:
    """Trajectory ``z^0..z^{N_T}`` as an ``(N_T + 1, N)`` array."""
    out = np.empty((problem.n_steps + 1, problem.grid.n_cells))
    out[0] = problem.z0
    for k in range(problem.n_steps):
        out[k + 1] = forward_step(out[k], problem.mu[k], problem.dt, problem.grid)
    return out


def _lap(w, grid) -> np.ndarray:
    return (np.roll(w, -1) - 2 * w + np.roll(w, 1)) / grid.dx**2


def laplacian_parts(problem: KolmogorovProblem):
    """Per-step ``(||[Lap mu]_+||_inf, ||[Lap mu]_-||_inf)``."""
    lap = np.array([_lap(m, problem.grid) for m in problem.mu])
    return np.maximum(lap, 0).max(axis=1), np.abs(np.minimum(lap, 0)).max(axis=1)


def _check_dt(problem, plus):
    worst = float(plus.max())
    if worst > 0 and problem.dt >= 1.0 / worst:
        raise BoundInapplicable(f"dt = {problem.dt} is not below 1/max||[Lap mu]_+|| = {1 / worst}")


# ---------------------------------------------------------------- estimates


@dataclass
class LinfBoundsReport:
    lower: np.ndarray
    upper: np.ndarray
    zmin: np.ndarray
    zmax: np.ndarray
    passed: np.ndarray

    @property
    def all_passed(self) -> bool:
        return bool(self.passed.all())


def linf_bounds_check(problem: KolmogorovProblem, gamma: float, Gamma: float, rtol: float = 1e-12) -> LinfBoundsReport:
    """Product bounds ``gamma P_-(k) <= z^k <= Gamma P_+(k)`` for ``k = 0..N_T``."""
    plus, minus = laplacian_parts(problem)
    _check_dt(problem, plus)
    z = forward_solve(problem)
    if z[0].min() < gamma * (1 - rtol) or z[0].max() > Gamma * (1 + rtol):
        raise ConfigurationError("z0 is not bracketed by (gamma, Gamma)")
    lower = gamma * np.concatenate([[1.0], np.cumprod(1.0 / (1 + problem.dt * minus))])
    upper = Gamma * np.concatenate([[1.0], np.cumprod(1.0 / (1 - problem.dt * plus))])
    zmin, zmax = z.min(axis=1), z.max(axis=1)
    slack = rtol * max(abs(Gamma), 1.0)
    passed = (zmin >= lower - slack) & (zmax <= upper + slack)
    return LinfBoundsReport(lower, upper, zmin, zmax, passed)


@dataclass
class EstimateReport:
    lhs: np.ndarray
    rhs: np.ndarray
    passed: np.ndarray

    @property
    def all_passed(self) -> bool:
        return bool(self.passed.all())


def energy_estimate_check(problem: KolmogorovProblem, rtol: float = 1e-12) -> EstimateReport:
    """``|z^k|^2 + sum_n dt sum_i (mu_i + mu_{i+1}) (z_{i+1} - z_i)^2 / dx <= P_+(k) |z^0|^2``.

    Index ``k`` runs over ``0..N_T``.
    """
    plus, _ = laplacian_parts(problem)
    _check_dt(problem, plus)
    grid, dt = problem.grid, problem.dt
    z = forward_solve(problem)
    l2 = grid.dx * np.sum(z**2, axis=1)
    grad = np.array(
        [np.sum((m + np.roll(m, -1)) * (np.roll(zk, -1) - zk) ** 2) / grid.dx for m, zk in zip(problem.mu, z[1:])]
    )
    lhs = l2 + np.concatenate([[0.0], np.cumsum(dt * grad)])
    rhs = np.concatenate([[1.0], np.cumprod(1.0 / (1 - dt * plus))]) * l2[0]
    passed = lhs <= rhs * (1 + rtol) + 1e-300
    return EstimateReport(lhs, rhs, passed)


@dataclass
class DualSolution:
    v: np.ndarray  # (N_T, N); row k-1 holds v^k
    estimate: EstimateReport | None


def dual_solve(problem: KolmogorovProblem, sources, terminal=None, rtol: float = 1e-12) -> DualSolution:
    """Backward sweep ``(M^k)^T v^k = v^{k+1} + dt S^k`` for ``k = N_T..1``.

    With zero terminal data and ``mu > 0`` also evaluates, for each ``k``,
    ``|v^k|_{1,2}^2 + sum_{n>=k} dt sum_i dx mu^n_i (Lap v^n)_i^2`` against
    ``sum_n dt sum_i dx (S^n_i)^2 / mu^n_i``.
    """
    grid, dt = problem.grid, problem.dt
    S = np.atleast_2d(np.asarray(sources, dtype=float))
    if S.shape != problem.mu.shape:
        raise ConfigurationError("sources must have one cell vector per step")
    nxt = np.zeros(grid.n_cells) if terminal is None else np.asarray(terminal, dtype=float)
    v = np.empty_like(S)
    for k in range(problem.n_steps - 1, -1, -1):
        v[k] = transpose_step(nxt + dt * S[k], problem.mu[k], dt, grid)
        nxt = v[k]

    estimate = None
    zero_terminal = terminal is None or not np.any(terminal)
    if zero_terminal and np.all(problem.mu > 0):
        semi = np.sum((np.roll(v, -1, axis=1) - v) ** 2, axis=1) / grid.dx
        lapv = np.array([_lap(vk, grid) for vk in v])
        tail = dt * grid.dx * np.sum(problem.mu * lapv**2, axis=1)
        lhs = semi + np.cumsum(tail[::-1])[::-1]
        total = float(dt * grid.dx * np.sum(S**2 / problem.mu))
        rhs = np.full_like(lhs, total)
        estimate = EstimateReport(lhs, rhs, lhs <= rhs * (1 + rtol) + 1e-300)
    return DualSolution(v, estimate)


@dataclass
class DualityReport:
    lhs: float
    reference: float
    ratio: float
    identity_error: float


def duality_inequality_check(problem: KolmogorovProblem) -> DualityReport:
    """``||mu^{1/2} z||_{L2(Q_T)}`` against ``(1 + ||mu||_{L1(Q_T)}^{1/2}) ||z^0||_{L2}``.

    Also verifies the duality identity ``sum dt dx z^k S^k = sum dx z^0 v^1``
    with the source ``S = mu z`` used in the proof.
    """
    if np.any(problem.mu <= 0):
        raise ConfigurationError("the duality estimate needs mu > 0")
    grid, dt = problem.grid, problem.dt
    z = forward_solve(problem)
    zk = z[1:]
    lhs = float(np.sqrt(dt * grid.dx * np.sum(problem.mu * zk**2)))
    mu_l1 = float(dt * grid.dx * np.sum(problem.mu))
    z0_l2 = float(np.sqrt(grid.dx * np.sum(problem.z0**2)))
    reference = (1 + np.sqrt(mu_l1)) * z0_l2
    ratio = lhs / reference if reference > 0 else 0.0
    dual = dual_solve(problem, problem.mu * zk)
    left = dt * grid.dx * np.sum(zk * problem.mu * zk)
    right = grid.dx * np.dot(problem.z0, dual.v[0])
    scale = max(abs(left), abs(right), 1e-300)
    return DualityReport(lhs, reference, ratio, float(abs(left - right) / scale))


def discrete_gronwall(u0: float, a, dt: float) -> np.ndarray:
    """``u0 prod_{k<=n} (1 - dt a_k)^{-1}`` for ``n = 0..len(a)`` (``a`` starts at ``a_1``)."""
    a = np.asarray(a, dtype=float)
    if u0 < 0 or np.any(a < 0):
        raise ConfigurationError("u0 and a must be non-negative")
    if a.size and dt * a.max() >= 1:
        raise ConfigurationError("discrete Gronwall needs dt < 1 / sup a")
    return u0 * np.concatenate([[1.0], np.cumprod(1.0 / (1 - dt * a))])
