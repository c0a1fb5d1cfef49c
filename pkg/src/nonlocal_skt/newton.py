"""Newton solver for the implicit step in logarithmic (entropy) variables.

The unknowns are ``w_j = log u_j``; the entropy variables ``X_j = w_j / d``
differ by a constant diagonal scaling, which leaves Newton iterates unchanged
and keeps the solver usable when a cross-diffusion coefficient vanishes.

Linear systems are solved in one of three ways:

* ``sparse``: sparse LU, exact whenever every kernel has a narrow support;
* ``dense``: dense LU of the full Jacobian;
* ``krylov``: GMRES on the matrix-free Jacobian (FFT convolutions),
  preconditioned by sparse LU of its local part.

Above ``reuse_limit`` unknowns the sparse LU is kept between Newton
iterations and time steps (same ``dt``) and used as a GMRES preconditioner;
it is refactored once GMRES needs more than ``refactor_iterations`` steps.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ConfigurationError
from .norms import DomainError
from .scheme import SchemeParams, State, mu, step_residual

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-10
    max_iterations: int = 50
    max_dt_halvings: int = 20
    linear_solver: str = "auto"  # auto | sparse | dense | krylov
    dense_limit: int = 512  # max unknowns for dense LU under "auto"
    narrow_kernel_nnz: int | None = None  # None: 128 in 1D, 9 in 2D
    krylov_restart: int = 60
    krylov_inner_tol: float = 1e-8
    krylov_maxiter: int = 20
    reuse_limit: int = 4096  # reuse the LU preconditioner above this many unknowns
    refactor_iterations: int = 12
    max_log_step: float = 30.0
    min_ratio: float = 1e-2
    density_floor: float = 1e-14

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be >= 1")
        if self.max_dt_halvings < 0:
            raise ConfigurationError("max_dt_halvings must be >= 0")
        if self.linear_solver not in ("auto", "sparse", "dense", "krylov"):
            raise ConfigurationError(f"unknown linear solver {self.linear_solver!r}")


@dataclass
class StepOutcome:
    state: State
    iterations: int
    final_residual: float
    initial_residual: float
    dt_used: float
    dt_next: float
    halvings: int = 0
    converged: bool = True
    linear_iterations: int = 0
    message: str = ""


class SolverFailure(RuntimeError):
    """Hard failure after exhausting dt halvings; carries the accepted prefix."""

    def __init__(self, message, trajectory=None, records=None, outcome=None):
        super().__init__(message)
        self.trajectory = trajectory or []
        self.records = records or []
        self.outcome = outcome


# ---------------------------------------------------------------- variables


def entropy_variables(state: State, d12: float, d21: float) -> np.ndarray:
    if np.any(state.u1 <= 0) or np.any(state.u2 <= 0):
        raise DomainError("entropy variables need strictly positive densities")
    if not (d12 > 0 and d21 > 0):
        raise DomainError("entropy variables need positive d12 and d21")
    return np.concatenate([np.log(state.u1) / d12, np.log(state.u2) / d21])


def from_entropy_variables(X, d12: float, d21: float, time: float = 0.0) -> State:
    X = np.asarray(X, dtype=float)
    n = X.size // 2
    return State(np.exp(d12 * X[:n]), np.exp(d21 * X[n:]), time)


# ---------------------------------------------------------------- Jacobian


def _narrow_limit(config: SolverConfig, grid) -> int:
    if config.narrow_kernel_nnz is not None:
        return config.narrow_kernel_nnz
    return 128 if grid.ndim == 1 else 9


def _coupling_terms(params: SchemeParams, state: State):
    """``(row, col, coefficient, kernel, u_row)`` for each nonlocal Jacobian block."""
    p = params
    terms = [
        (0, 0, p.d11, p.sigma1, state.u1),
        (0, 1, p.d12, p.rho1, state.u1),
        (1, 0, p.d21, p.rho2, state.u2),
        (1, 1, p.d22, p.sigma2, state.u2),
    ]
    return [t for t in terms if t[2] != 0]


class _Jacobian:
    """Jacobian of the step residual in density variables, split local/wide."""

    def __init__(self, state: State, dt: float, params: SchemeParams, narrow_nnz: int):
        grid = params.grid
        n = grid.size
        L = grid.laplacian
        m1, m2 = mu(state, params)
        j11, j12, j21, j22 = params.reaction.jacobian(state.u1, state.u2)
        eye = sp.identity(n, format="csr") / dt
        blocks = [
            [eye - L @ sp.diags(m1) - sp.diags(j11), -sp.diags(j12)],
            [-sp.diags(j21), eye - L @ sp.diags(m2) - sp.diags(j22)],
        ]
        self.wide = []
        for row, col, coef, kernel, u_row in _coupling_terms(params, state):
            if kernel.is_dirac or kernel.nnz <= narrow_nnz:
                blocks[row][col] = blocks[row][col] - coef * (L @ sp.diags(u_row) @ kernel.sparse_matrix)
            else:
                self.wide.append((row, col, coef, kernel, u_row))
        self.local = sp.bmat(blocks, format="csc")
        self.n = n
        self.L = L

    def matvec(self, v):
        out = self.local @ v
        n = self.n
        for row, col, coef, kernel, u_row in self.wide:
            out[row * n : (row + 1) * n] -= coef * (self.L @ (u_row * kernel.convolve(v[col * n : (col + 1) * n])))
        return out

    def dense(self) -> np.ndarray:
        J = self.local.toarray()
        n = self.n
        for row, col, coef, kernel, u_row in self.wide:
            J[row * n : (row + 1) * n, col * n : (col + 1) * n] -= coef * (self.L @ (u_row[:, None] * kernel.dense_matrix))
        return J


def residual_jacobian(state: State, dt: float, params: SchemeParams, variables: str = "density") -> np.ndarray:
    """Dense Jacobian of the step residual (for tests and small problems).

    ``variables`` selects derivatives with respect to the densities, their
    logarithms, or the entropy variables ``X``.
    """
    J = _Jacobian(state, dt, params, narrow_nnz=-1).dense()
    u = state.stacked
    if variables == "density":
        return J
    if variables == "log":
        return J * u[None, :]
    if variables == "entropy":
        n = state.u1.size
        scale = np.concatenate([np.full(n, params.d12), np.full(n, params.d21)])
        return J * (u * scale)[None, :]
    raise ConfigurationError(f"unknown variables {variables!r}")


def _factor(matrix):
    return spla.splu(matrix, permc_spec="MMD_AT_PLUS_A")


class _FactorCache:
    """Most recent LU of a local Jacobian, tagged by problem and ``dt``."""

    def __init__(self):
        self.key = None
        self.lu = None

    def get(self, key):
        return self.lu if key == self.key else None

    def put(self, key, lu):
        self.key, self.lu = key, lu


_CACHE = _FactorCache()


def _gmres(jac: _Jacobian, rhs, lu, config: SolverConfig):
    size = rhs.size
    op = spla.LinearOperator((size, size), matvec=jac.matvec, dtype=float)
    prec = spla.LinearOperator((size, size), matvec=lu.solve, dtype=float)
    count = [0]

    def _cb(_):
        count[0] += 1

    sol, info = spla.gmres(
        op,
        rhs,
        x0=lu.solve(rhs),
        rtol=config.krylov_inner_tol,
        atol=0.0,
        restart=config.krylov_restart,
        maxiter=config.krylov_maxiter,
        M=prec,
        callback=_cb,
        callback_type="pr_norm",
    )
    return (sol if info == 0 else None), count[0]


def _linear_solve(jac: _Jacobian, rhs: np.ndarray, config: SolverConfig, cache_key=None):
    """Return ``(solution, inner_iterations)`` or ``(None, it)`` on failure."""
    mode = config.linear_solver
    size = rhs.size
    if mode == "auto":
        if size > config.reuse_limit and cache_key is not None:
            mode = "reuse"
        elif not jac.wide:
            mode = "sparse"
        elif size <= config.dense_limit:
            mode = "dense"
        else:
            mode = "krylov"
    if mode == "sparse" and jac.wide:
        mode = "dense" if size <= config.dense_limit else "krylov"
    if mode == "sparse":
        return _factor(jac.local).solve(rhs), 0
    if mode == "dense":
        return sla.solve(jac.dense(), rhs, check_finite=False), 0
    if mode == "krylov":
        return _gmres(jac, rhs, _factor(jac.local), config)

    lu = _CACHE.get(cache_key)
    total = 0
    if lu is not None:
        sol, total = _gmres(jac, rhs, lu, config)
        if sol is not None and total <= config.refactor_iterations:
            return sol, total
    lu = _factor(jac.local)
    _CACHE.put(cache_key, lu)
    sol, it = _gmres(jac, rhs, lu, config)
    return sol, total + it


# ---------------------------------------------------------------- Newton


def log_update(du, u, config: SolverConfig) -> np.ndarray:
    """Log-variable increment for the density Newton step ``du``.

    Implements ``u <- max(u + du, min_ratio * u)``; near the root this agrees
    with the plain log-variable Newton step to second order.
    """
    ratio = np.maximum(1.0 + du / u, config.min_ratio)
    return np.clip(np.log(ratio), -config.max_log_step, config.max_log_step)


def _first_guess(previous: State, floor_factor: float) -> np.ndarray:
    out = []
    for u in (previous.u1, previous.u2):
        if np.any(u < 0):
            raise DomainError("previous state must be non-negative")
        floor = floor_factor * (float(u.mean()) if u.mean() > 0 else 1.0)
        out.append(np.log(np.maximum(u, floor)))
    return np.concatenate(out)


def _residual_vec(w, previous, dt, params, time):
    n = previous.u1.size
    cand = State(np.exp(w[:n]), np.exp(w[n:]), time)
    r1, r2 = step_residual(cand, previous, dt, params)
    return cand, np.concatenate([r1, r2])


def _rounding_floor(cand: State, dt: float, params: SchemeParams) -> float:
    """Residual level reachable in floating point for this state."""
    grid = params.grid
    m1, m2 = mu(cand, params)
    lap_scale = sum(4.0 / h**2 for h in grid.spacings)
    r1, r2 = params.reaction.evaluate(cand.u1, cand.u2)
    scale = (
        max(cand.u1.max(), cand.u2.max()) / dt
        + lap_scale * max(np.abs(m1 * cand.u1).max(), np.abs(m2 * cand.u2).max())
        + max(np.abs(r1).max(), np.abs(r2).max())
    )
    return 100 * _EPS * scale


def newton_step_solve(previous: State, dt: float, params: SchemeParams, config: SolverConfig = SolverConfig()) -> StepOutcome:
    """One implicit step; ``converged=False`` signals the caller to reduce dt."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    time = previous.time + dt
    narrow = _narrow_limit(config, params.grid)
    w = _first_guess(previous, config.density_floor)
    cand, r = _residual_vec(w, previous, dt, params, time)
    r0 = float(np.abs(r).max())
    target = config.tolerance * r0
    res = r0
    lin_total = 0
    for it in range(config.max_iterations + 1):
        res = float(np.abs(r).max())
        if not np.isfinite(res):
            break
        if res <= max(target, _rounding_floor(cand, dt, params)):
            return StepOutcome(cand, it, res, r0, dt, dt, linear_iterations=lin_total)
        if it == config.max_iterations:
            break
        jac = _Jacobian(cand, dt, params, narrow)
        du, lin_it = _linear_solve(jac, -r, config, cache_key=(id(params), params.grid.size, dt))
        lin_total += lin_it
        if du is None or not np.all(np.isfinite(du)):
            break
        w = w + log_update(du, cand.stacked, config)
        if np.any(w > 700):
            break
        cand, r = _residual_vec(w, previous, dt, params, time)
    return StepOutcome(
        cand, config.max_iterations, res, r0, dt, dt / 2, converged=False,
        linear_iterations=lin_total, message="Newton did not converge",
    )


StepFunction = Callable[[State, float, SchemeParams, SolverConfig], StepOutcome]


def adaptive_advance(
    initial: State,
    t_final: float,
    dt_initial: float,
    params: SchemeParams,
    config: SolverConfig = SolverConfig(),
    *,
    step: StepFunction = newton_step_solve,
    keep_trajectory: bool = True,
    callback: Callable[[State, State, StepOutcome], None] | None = None,
):
    """Advance to ``t_final`` with halving on failure and doubling after refinement.

    Returns ``(trajectory, outcomes)``; the trajectory starts with ``initial``
    (only the first and last states when ``keep_trajectory`` is False).
    ``callback(previous, current, outcome)`` is invoked after each accepted step.
    """
    if not t_final > initial.time:
        raise ConfigurationError("t_final must exceed the initial time")
    if not dt_initial > 0:
        raise ConfigurationError("dt_initial must be positive")
    trajectory = [initial]
    outcomes: list[StepOutcome] = []
    current = initial
    dt = dt_initial
    span = t_final - initial.time
    while True:
        remaining = t_final - current.time
        if remaining <= 1e-13 * span:
            break
        halvings = 0
        while True:
            trial = min(dt, remaining)
            # avoid a sliver step at the end
            if remaining - trial <= 1e-10 * span:
                trial = remaining
            outcome = step(current, trial, params, config)
            if outcome.converged:
                break
            halvings += 1
            if halvings > config.max_dt_halvings:
                raise SolverFailure(
                    f"step at t={current.time:.6g} failed after {config.max_dt_halvings} dt halvings",
                    trajectory=trajectory,
                    records=outcomes,
                    outcome=outcome,
                )
            dt = trial / 2
        outcome.halvings = halvings
        new_state = outcome.state
        if remaining - trial <= 1e-10 * span:
            new_state.time = t_final
        else:
            new_state.time = current.time + trial
        outcome.dt_next = min(2 * trial, dt_initial) if halvings else dt
        dt = outcome.dt_next
        outcomes.append(outcome)
        if callback is not None:
            callback(current, new_state, outcome)
        if keep_trajectory:
            trajectory.append(new_state)
        current = new_state
    if not keep_trajectory and current is not initial:
        trajectory.append(current)
    return trajectory, outcomes


def solver_slack(outcome: StepOutcome, state: State, params: SchemeParams, h_prev: float) -> float:
    """Entropy-inequality slack allowed for an inexact solve.

    The entropy balance of an exact step differs from the computed one by
    ``dt * vol * sum(r * X)``, bounded by ``dt * |Omega| * |r|_inf * |X|_inf``.
    """
    grid = params.grid
    X = entropy_variables(state, params.d12, params.d21)
    bound = outcome.dt_used * grid.volume * outcome.final_residual * (1 + float(np.abs(X).max()))
    return 10 * bound + 1e-12 * max(1.0, abs(h_prev))
