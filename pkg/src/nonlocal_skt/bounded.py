"""Nonlocal cross-diffusion on (0, 1) with no-flux boundaries.

Cells are numbered ``0..l-1``; interior interface ``m`` (``0..l-2``) sits at
``y_m = (m + 1) dx`` between cells ``m`` and ``m + 1``.  With the difference
operator ``(D u)_m = u_m - u_{m+1}``, the average ``(A u)_m = (u_m + u_{m+1})/2``
and ``Gm[m, q] = G(y_m, y_q)``:

    mu2 = dx Gm (A u2),   mu2~ = Gm (D u2),
    mu1 = dx Gm^T (A u1), mu1~ = Gm^T (D u1),
    F1 = (d1 + d12 mu2) (D u1)/dx + d12 (A u1) mu2~,
    F2 = (d2 + d21 mu1) (D u2)/dx + d21 (A u2) mu1~,

and ``(u - u_prev)/dt + D^T F / dx = 0``.  Boundary fluxes vanish; interfaces
on the boundary carry ``G = 0`` and drop out of the sums.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .grid import BoundedGrid1D, ConfigurationError
from .newton import SolverConfig, SolverFailure, StepOutcome, log_update
from .norms import DomainError, entropy_density
from .scheme import State


def sine_kernel(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


@dataclass(frozen=True)
class BoundaryKernel:
    func: Callable = field(default=sine_kernel, compare=False)

    def interface_matrix(self, grid: BoundedGrid1D, check: bool = True) -> np.ndarray:
        y = grid.interfaces[1:-1]
        G = np.asarray(self.func(y[:, None], y[None, :]), dtype=float) * np.ones((y.size, y.size))
        if check:
            if np.any(G < 0):
                raise ConfigurationError("boundary kernel must be non-negative")
            edge = np.array([0.0, 1.0])
            probe = np.linspace(0, 1, 17)
            vals = np.concatenate(
                [np.ravel(self.func(edge[:, None], probe[None, :])), np.ravel(self.func(probe[:, None], edge[None, :]))]
            )
            if np.any(np.abs(vals) > 1e-12):
                raise ConfigurationError("boundary kernel must vanish on the boundary of the square")
        return G


@dataclass(frozen=True)
class BoundedParams:
    grid: BoundedGrid1D
    d1: float = 0.0
    d2: float = 0.0
    d12: float = 1.0
    d21: float = 1.0
    kernel: BoundaryKernel = field(default_factory=BoundaryKernel)

    def __post_init__(self):
        if self.d1 < 0 or self.d2 < 0:
            raise ConfigurationError("d1, d2 must be non-negative")
        if not (self.d12 > 0 and self.d21 > 0):
            raise ConfigurationError("d12, d21 must be positive")

    @cached_property
    def G(self) -> np.ndarray:
        return self.kernel.interface_matrix(self.grid)

    @cached_property
    def D(self) -> np.ndarray:
        n = self.grid.n_cells
        return np.eye(n - 1, n) - np.eye(n - 1, n, k=1)

    @cached_property
    def A(self) -> np.ndarray:
        n = self.grid.n_cells
        return 0.5 * (np.eye(n - 1, n) + np.eye(n - 1, n, k=1))


def _diff(u):
    return u[:-1] - u[1:]


def _avg(u):
    return 0.5 * (u[:-1] + u[1:])


@dataclass
class BoundedMu:
    mu2: np.ndarray
    mu1: np.ndarray
    mu2_tilde: np.ndarray
    mu1_tilde: np.ndarray


def bounded_mu(state: State, params: BoundedParams) -> BoundedMu:
    G, dx = params.G, params.grid.dx
    return BoundedMu(
        mu2=dx * G @ _avg(state.u2),
        mu1=dx * G.T @ _avg(state.u1),
        mu2_tilde=G @ _diff(state.u2),
        mu1_tilde=G.T @ _diff(state.u1),
    )


def bounded_fluxes(state: State, params: BoundedParams):
    """Fluxes at all ``l + 1`` interfaces (the two boundary entries are zero)."""
    p, dx = params, params.grid.dx
    m = bounded_mu(state, p)
    f1 = (p.d1 + p.d12 * m.mu2) * _diff(state.u1) / dx + p.d12 * _avg(state.u1) * m.mu2_tilde
    f2 = (p.d2 + p.d21 * m.mu1) * _diff(state.u2) / dx + p.d21 * _avg(state.u2) * m.mu1_tilde
    pad = lambda f: np.concatenate([[0.0], f, [0.0]])  # noqa: E731
    return pad(f1), pad(f2)


def bounded_residual(candidate: State, previous: State, dt: float, params: BoundedParams):
    dx = params.grid.dx
    f1, f2 = bounded_fluxes(candidate, params)
    return (
        (candidate.u1 - previous.u1) / dt + np.diff(f1) / dx,
        (candidate.u2 - previous.u2) / dt + np.diff(f2) / dx,
    )


def bounded_jacobian(state: State, dt: float, params: BoundedParams) -> np.ndarray:
    """Dense Jacobian of :func:`bounded_residual` with respect to the densities."""
    p, dx = params, params.grid.dx
    G, D, A = p.G, p.D, p.A
    m = bounded_mu(state, p)
    u1, u2 = state.u1, state.u2
    f11 = ((p.d1 + p.d12 * m.mu2) / dx)[:, None] * D + p.d12 * m.mu2_tilde[:, None] * A
    f12 = p.d12 * (_diff(u1)[:, None] * (G @ A) + _avg(u1)[:, None] * (G @ D))
    f22 = ((p.d2 + p.d21 * m.mu1) / dx)[:, None] * D + p.d21 * m.mu1_tilde[:, None] * A
    f21 = p.d21 * (_diff(u2)[:, None] * (G.T @ A) + _avg(u2)[:, None] * (G.T @ D))
    n = u1.size
    eye = np.eye(n) / dt
    Dt = D.T / dx
    return np.block([[eye + Dt @ f11, Dt @ f12], [Dt @ f21, eye + Dt @ f22]])


def _rounding_floor(cand: State, dt: float, params: BoundedParams) -> float:
    p, dx = params, params.grid.dx
    umax = max(cand.u1.max(), cand.u2.max())
    mu_max = max(p.d1, p.d2) + max(p.d12, p.d21) * np.abs(p.G).max() * umax
    return 100 * np.finfo(float).eps * (umax / dt + 4 * mu_max * umax / dx**2)


def bounded_step(previous: State, dt: float, params: BoundedParams, config: SolverConfig = SolverConfig()) -> StepOutcome:
    """One implicit step by safeguarded Newton in log variables (dense LU)."""
    u_prev = previous.stacked
    if np.any(u_prev < 0):
        raise DomainError("previous state must be non-negative")
    n = previous.u1.size
    time = previous.time + dt
    floors = [config.density_floor * (u.mean() if u.mean() > 0 else 1.0) for u in (previous.u1, previous.u2)]
    u = np.concatenate([np.maximum(previous.u1, floors[0]), np.maximum(previous.u2, floors[1])])
    w = np.log(u)

    def evaluate(w):
        cand = State(np.exp(w[:n]), np.exp(w[n:]), time)
        return cand, np.concatenate(bounded_residual(cand, previous, dt, params))

    cand, r = evaluate(w)
    r0 = float(np.abs(r).max())
    res = r0
    for it in range(config.max_iterations + 1):
        res = float(np.abs(r).max())
        if not np.isfinite(res):
            break
        if res <= max(config.tolerance * r0, _rounding_floor(cand, dt, params)):
            return StepOutcome(cand, it, res, r0, dt, dt)
        if it == config.max_iterations:
            break
        du = sla.solve(bounded_jacobian(cand, dt, params), -r, check_finite=False)
        if not np.all(np.isfinite(du)):
            break
        w = w + log_update(du, cand.stacked, config)
        cand, r = evaluate(w)
    return StepOutcome(cand, config.max_iterations, res, r0, dt, dt / 2, converged=False, message="Newton did not converge")


def bounded_advance(initial: State, dt: float, n_steps: int, params: BoundedParams, config: SolverConfig = SolverConfig()):
    """Fixed-step run; returns ``(trajectory, outcomes)``."""
    traj, outs = [initial], []
    for _ in range(n_steps):
        out = bounded_step(traj[-1], dt, params, config)
        if not out.converged:
            raise SolverFailure(f"bounded step failed at t={traj[-1].time:.6g}", traj, outs, out)
        traj.append(out.state)
        outs.append(out)
    return traj, outs


def bounded_entropy(state: State, params: BoundedParams) -> float:
    dx = params.grid.dx
    return float(dx * (entropy_density(state.u1, params.d12).sum() + entropy_density(state.u2, params.d21).sum()))


@dataclass
class BoundedEntropyRow:
    k: int
    lhs: float
    rhs: float
    passed: bool


def bounded_entropy_check(trajectory, params: BoundedParams, dt: float, residuals=None) -> list[BoundedEntropyRow]:
    """``(H^k - H^{k-1})/dt + 4 d1/d12 sum (dsqrt u1)^2/dx + 4 d2/d21 sum (dsqrt u2)^2/dx <= slack``.

    ``residuals`` (final Newton residuals per step) sets the slack
    ``10 |Omega| |r|_inf (1 + |X|_inf) + 1e-12 max(1, H^{k-1}) / dt``; without it
    only the rounding term is allowed.
    """
    p, dx = params, params.grid.dx
    rows = []
    h_prev = bounded_entropy(trajectory[0], p)
    for k in range(1, len(trajectory)):
        s = trajectory[k]
        if np.any(s.u1 <= 0) or np.any(s.u2 <= 0):
            raise DomainError("the entropy check needs a positive trajectory")
        h = bounded_entropy(s, p)
        diss = (
            4 * p.d1 / p.d12 * np.sum(_diff(np.sqrt(s.u1)) ** 2) / dx
            + 4 * p.d2 / p.d21 * np.sum(_diff(np.sqrt(s.u2)) ** 2) / dx
        )
        lhs = (h - h_prev) / dt + diss
        rhs = 1e-12 * max(1.0, abs(h_prev)) / dt
        if residuals is not None:
            X = np.concatenate([np.log(s.u1) / p.d12, np.log(s.u2) / p.d21])
            rhs += 10 * residuals[k - 1] * (1 + np.abs(X).max())
        rows.append(BoundedEntropyRow(k, float(lhs), float(rhs), bool(lhs <= rhs)))
        h_prev = h
    return rows


def log_mean(a, b):
    """Logarithmic mean ``(a - b)/(log a - log b)`` with value ``a`` when ``a == b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (a - b) / (np.log(a) - np.log(b))
    return np.where(np.isclose(a, b, rtol=1e-12, atol=0), 0.5 * (a + b), out)


def a_matrix(u1, u2, i: int, n: int) -> np.ndarray:
    """2x2 matrix coupling interface ``i`` of species 1 and interface ``n`` of species 2."""
    u1, u2 = np.asarray(u1, dtype=float), np.asarray(u2, dtype=float)
    if np.any(u1 <= 0) or np.any(u2 <= 0):
        raise DomainError("the coupling matrix needs positive states")
    u1h, u2h = 0.5 * (u1[i] + u1[i + 1]), 0.5 * (u2[n] + u2[n + 1])
    l1, l2 = log_mean(u1[i], u1[i + 1]), log_mean(u2[n], u2[n + 1])
    return np.array([[u2h / l1, u1h / l1], [u2h / l2, u1h / l2]])
