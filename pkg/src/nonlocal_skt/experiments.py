"""Drivers for the three numerical studies: convergence, localization, Turing patterns."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels as K
from .diagnostics import Recorder, fmt, write_diagnostics_csv, write_field_csv
from .grid import ConfigurationError, PeriodicGrid1D, PeriodicGrid2D, project_to_coarser
from .newton import SolverConfig, adaptive_advance, newton_step_solve
from .norms import lp_norm, wasserstein1
from .scheme import (
    Box,
    Box2D,
    MimuraNishiuraYamaguti,
    SchemeParams,
    SegelLevin,
    State,
    initial_state,
    make_params,
)

log = logging.getLogger(__name__)

KERNEL_NAMES = ("smooth", "indicator", "dirac", "hunting", "annulus", "annulus_quadrant")


def make_kernel(name: str, grid, *, delta: float | None = None, radius: float | None = None) -> K.DiscreteKernel:
    """Discretize a kernel by name (``indicator`` uses ``delta``, ``hunting`` uses ``radius``)."""
    if name == "smooth":
        return K.discretize(K.SmoothCos(), grid)
    if name == "dirac":
        return K.discretize(K.Dirac(), grid)
    if name == "indicator":
        return K.discretize(K.Indicator(grid.length / 4 if delta is None else delta), grid)
    if name == "hunting":
        return K.discretize(K.Hunting(10 * grid.length / 49 if radius is None else radius), grid)
    if name == "annulus":
        return K.discretize(K.Annulus2D(), grid)
    if name == "annulus_quadrant":
        return K.discretize(K.Annulus2D(quadrant_restricted=True), grid)
    raise ConfigurationError(f"unknown kernel {name!r}; expected one of {KERNEL_NAMES}")


def test1_initial_data(ic: str, length: float):
    """Indicator pair or smooth pair on a torus of length ``length``."""
    nu = 2 * np.pi / length
    if ic == "indicator":
        return Box(length / 9, length / 3), Box(length / 3, 3 * length / 4)
    if ic == "smooth":
        return (lambda x: np.cos(nu * x) + 1), (lambda x: np.sin(nu * x) + 1)
    raise ConfigurationError(f"unknown initial data {ic!r}; expected 'indicator' or 'smooth'")


def fit_order(h, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if h.size < 2 or np.any(h <= 0) or np.any(errors <= 0):
        raise ConfigurationError("order fitting needs at least two positive points")
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


def _slope_or_nan(h, errors) -> float:
    try:
        return fit_order(h, errors)
    except ConfigurationError:
        return float("nan")


def _write_table(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def simulate(
    params: SchemeParams,
    initial: State,
    t_final: float,
    dt: float,
    config: SolverConfig = SolverConfig(),
    *,
    compute_dissipation: bool | None = None,
    snapshot_times=(),
    snapshot_sink=None,
):
    """Run one simulation; returns ``(final_state, recorder)``."""
    rec = Recorder(params, compute_dissipation, snapshot_times, snapshot_sink)
    traj, _ = adaptive_advance(initial, t_final, dt, params, config, keep_trajectory=False, callback=rec)
    return traj[-1], rec


# ---------------------------------------------------------------- convergence


@dataclass(frozen=True)
class ConvergenceStudy:
    kernel: str = "smooth"
    ic: str = "indicator"
    length: float = 25.0
    t_final: float = 5.0
    levels: int = 6
    n0: int = 32
    dt0: float = 5.0
    d1: float = 0.0
    d2: float = 0.0
    d11: float = 0.0
    d12: float = 1.0
    d21: float = 2.0
    d22: float = 0.0
    aggregation: str = "max"  # max | sum over the two species
    fit_levels: int | None = None  # default: every level except the reference
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.kernel not in ("smooth", "indicator", "dirac"):
            raise ConfigurationError(f"convergence kernel must be smooth, indicator or dirac, got {self.kernel!r}")
        if self.ic not in ("smooth", "indicator"):
            raise ConfigurationError(f"convergence initial data must be smooth or indicator, got {self.ic!r}")
        if self.levels < 3:
            raise ConfigurationError("need at least 3 levels")
        if self.aggregation not in ("max", "sum"):
            raise ConfigurationError("aggregation must be 'max' or 'sum'")

    def n_cells(self, k: int) -> int:
        return self.n0 * 2 ** (k - 1)

    def dt(self, k: int) -> float:
        return self.dt0 * 4.0 ** (-(k - 1))

    def build(self, k: int):
        grid = PeriodicGrid1D(self.n_cells(k), self.length)
        rho = make_kernel(self.kernel, grid)
        params = make_params(
            grid, rho, d1=self.d1, d2=self.d2, d11=self.d11, d12=self.d12, d21=self.d21, d22=self.d22
        )
        u1, u2 = test1_initial_data(self.ic, self.length)
        return grid, params, initial_state(u1, u2, grid)


@dataclass
class ConvergenceResult:
    study: ConvergenceStudy
    n_cells: list[int]
    dx: list[float]
    dt: list[float]
    errors: list[float]  # len = levels - 1
    order: float
    finals: list[State]
    recorders: list[Recorder]

    @property
    def error_second_finest(self) -> float:
        return self.errors[-1]

    def table_rows(self):
        return [(k + 1, n, h, dt, e) for k, (n, h, dt, e) in enumerate(zip(self.n_cells, self.dx, self.dt, self.errors))]


def run_convergence(study: ConvergenceStudy, out_dir=None, name: str = "converge") -> ConvergenceResult:
    """Run the mesh ladder and fit the order against the finest level."""
    finals, grids, recs = [], [], []
    for k in range(1, study.levels + 1):
        grid, params, init = study.build(k)
        log.info("convergence %s/%s: level %d (N=%d)", study.kernel, study.ic, k, grid.n_cells)
        final, rec = simulate(params, init, study.t_final, study.dt(k), study.solver)
        finals.append(final)
        grids.append(grid)
        recs.append(rec)
        if out_dir is not None:
            write_diagnostics_csv(Path(out_dir) / f"{name}_diag_N{grid.n_cells}.csv", rec.records)
            write_field_csv(Path(out_dir) / f"{name}_field_N{grid.n_cells}_{fmt(study.t_final)}.csv", grid, final)
    ref, ref_grid = finals[-1], grids[-1]
    errors = []
    for final, grid in zip(finals[:-1], grids[:-1]):
        e1 = np.abs(final.u1 - project_to_coarser(ref.u1, grid, ref_grid)).max()
        e2 = np.abs(final.u2 - project_to_coarser(ref.u2, grid, ref_grid)).max()
        errors.append(float(max(e1, e2) if study.aggregation == "max" else e1 + e2))
    dx = [g.dx for g in grids[:-1]]
    m = study.fit_levels or len(errors)
    order = fit_order(dx[:m], errors[:m])
    result = ConvergenceResult(
        study, [g.n_cells for g in grids[:-1]], dx, [study.dt(k) for k in range(1, study.levels)], errors, order, finals, recs
    )
    if out_dir is not None:
        _write_table(Path(out_dir) / f"{name}_table.csv", ["k", "N", "dx", "dt", "error"], result.table_rows())
        with (Path(out_dir) / f"{name}_table.csv").open("a") as fh:
            fh.write(f"# order,{fmt(order)}\n")
    return result


# ---------------------------------------------------------------- localization

DEFAULT_DELTAS = (1.0, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.04, 0.03, 0.02, 0.01, 0.005, 0.003)


@dataclass(frozen=True)
class LocalizationStudy:
    ic: str = "smooth"
    deltas: tuple = DEFAULT_DELTAS  # delta / L, descending
    length: float = 25.0
    t_final: float = 1.0
    n_cells: int = 1024
    dt: float = 1e-2
    d12: float = 1.0
    d21: float = 2.0
    fit_max: float = 1.0  # slopes fitted on delta/L <= fit_max (all points by default)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if list(self.deltas) != sorted(self.deltas, reverse=True):
            raise ConfigurationError("deltas must be given in descending order")
        if any(not 0 < d <= 1 for d in self.deltas):
            raise ConfigurationError("delta / L must lie in (0, 1]")


@dataclass
class LocalizationResult:
    study: LocalizationStudy
    deltas: np.ndarray
    w1: np.ndarray
    l1: np.ndarray
    linf: np.ndarray
    slopes: dict
    slopes_all: dict
    local: State
    finals: list


def run_localization(study: LocalizationStudy, out_dir=None, name: str = "localize") -> LocalizationResult:
    grid = PeriodicGrid1D(study.n_cells, study.length)
    u1, u2 = test1_initial_data(study.ic, study.length)
    init = initial_state(u1, u2, grid)

    def run(kernel, tag):
        params = make_params(grid, kernel, d12=study.d12, d21=study.d21)
        final, rec = simulate(params, init, study.t_final, study.dt, study.solver, compute_dissipation=False)
        if out_dir is not None:
            write_diagnostics_csv(Path(out_dir) / f"{name}_diag_{tag}.csv", rec.records)
            write_field_csv(Path(out_dir) / f"{name}_field_{tag}_{fmt(study.t_final)}.csv", grid, final)
        return final

    log.info("localization %s: local baseline", study.ic)
    local = run(make_kernel("dirac", grid), "local")
    rows, finals = [], []
    for frac in study.deltas:
        log.info("localization %s: delta/L = %g", study.ic, frac)
        final = run(make_kernel("indicator", grid, delta=frac * study.length), f"delta{frac:g}")
        finals.append(final)
        w = wasserstein1(final.u1, local.u1, grid, rtol=1e-8) + wasserstein1(final.u2, local.u2, grid, rtol=1e-8)
        l1 = lp_norm(final.u1 - local.u1, grid, 1) + lp_norm(final.u2 - local.u2, grid, 1)
        li = lp_norm(final.u1 - local.u1, grid, np.inf) + lp_norm(final.u2 - local.u2, grid, np.inf)
        rows.append((frac, w, l1, li))
    arr = np.array(rows)
    deltas = arr[:, 0]
    window = deltas <= study.fit_max + 1e-15
    slopes, slopes_all = {}, {}
    for j, key in enumerate(("W1", "L1", "Linf"), start=1):
        slopes[key] = _slope_or_nan(deltas[window], arr[window, j])
        slopes_all[key] = _slope_or_nan(deltas, arr[:, j])
    if out_dir is not None:
        _write_table(Path(out_dir) / f"{name}_table.csv", ["delta_over_L", "W1", "L1", "Linf"], rows)
        with (Path(out_dir) / f"{name}_table.csv").open("a") as fh:
            for key in slopes:
                fh.write(f"# slope_{key},{fmt(slopes[key])},all_points,{fmt(slopes_all[key])}\n")
    return LocalizationResult(study, deltas, arr[:, 1], arr[:, 2], arr[:, 3], slopes, slopes_all, local, finals)


# ---------------------------------------------------------------- Turing

TURING_1D_CASES = {
    "A": dict(d1=0.05, d2=2.0, d21=0.0),
    "B": dict(d1=0.05, d2=0.0, d21=1.0),
}
TURING_2D_CASES = {
    "linear": dict(d1=0.001, d2=4.0, d21=0.0, kernel="dirac"),
    "sym": dict(d1=0.001, d2=0.0, d21=0.4, kernel="annulus"),
    "quadrant": dict(d1=0.001, d2=0.0, d21=0.4, kernel="annulus_quadrant"),
}


@dataclass(frozen=True)
class TuringStudy:
    variant: str = "1d"  # 1d | 2d
    case: str = "B"  # A | B (1d); linear | sym | quadrant (2d)
    epsilon: float = 1e-2
    t_final: float | None = None
    dt: float | None = None
    resolution: float = 1.0  # cell-count multiplier (0.5 = half resolution)
    snapshot_times: tuple = ()
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.variant == "1d" and self.case not in TURING_1D_CASES:
            raise ConfigurationError(f"1d Turing case must be one of {sorted(TURING_1D_CASES)}")
        if self.variant == "2d" and self.case not in TURING_2D_CASES:
            raise ConfigurationError(f"2d Turing case must be one of {sorted(TURING_2D_CASES)}")
        if self.variant not in ("1d", "2d"):
            raise ConfigurationError("variant must be '1d' or '2d'")

    @classmethod
    def smoke_2d(cls, case: str, **kw) -> "TuringStudy":
        """Half-resolution 2D variant with a doubled time step."""
        return cls(variant="2d", case=case, resolution=0.5, dt=0.02, **kw)

    @property
    def final_time(self) -> float:
        if self.t_final is not None:
            return self.t_final
        return 500.0 if self.variant == "1d" else 20.0

    @property
    def time_step(self) -> float:
        if self.dt is not None:
            return self.dt
        return 0.1 if self.variant == "1d" else 0.01

    def build(self, perturbed: bool = True):
        """``(grid, params, initial_state, equilibrium)``."""
        eps = self.epsilon if perturbed else 0.0
        if self.variant == "1d":
            L = 25.0
            grid = PeriodicGrid1D(max(2, int(round(500 * self.resolution))), L)
            reaction = SegelLevin()
            eq = reaction.equilibrium()
            c = TURING_1D_CASES[self.case]
            rho2 = make_kernel("hunting", grid, radius=10 * L / 49)
            dirac = make_kernel("dirac", grid)
            params = SchemeParams(
                sigma1=dirac, sigma2=dirac, rho1=dirac, rho2=rho2,
                d1=c["d1"], d2=c["d2"], d12=0.0, d21=c["d21"], reaction=reaction,
            )
            init = initial_state(Box(L / 9, L / 3, height=eps, base=eq[0]), eq[1], grid)
        else:
            lx, ly = 4.0, 3.0
            grid = PeriodicGrid2D(
                max(2, int(round(133 * self.resolution))), max(2, int(round(100 * self.resolution))), lx, ly
            )
            reaction = MimuraNishiuraYamaguti()
            eq = (5.0, 10.0)
            c = TURING_2D_CASES[self.case]
            rho2 = make_kernel(c["kernel"], grid)
            dirac = make_kernel("dirac", grid)
            params = SchemeParams(
                sigma1=dirac, sigma2=dirac, rho1=dirac, rho2=rho2,
                d1=c["d1"], d2=c["d2"], d12=0.0, d21=c["d21"], reaction=reaction,
            )
            box = Box2D(lx / 9, 4 * lx / 9, 7 * ly / 9, 8 * ly / 9, height=eps, base=eq[0])
            init = initial_state(box, eq[1], grid)
        return grid, params, init, eq


@dataclass
class TuringResult:
    study: TuringStudy
    final: State
    equilibrium: tuple
    departure: float  # final |u1 - eq|_inf
    stationary_error: float  # unperturbed run, 10 steps
    n_extrema: int
    recorder: Recorder


def count_extrema(values) -> int:
    """Number of strict local maxima of a periodic 1D profile."""
    v = np.asarray(values, dtype=float)
    return int(np.sum((v > np.roll(v, 1)) & (v > np.roll(v, -1))))


def equilibrium_drift(params: SchemeParams, grid, eq, dt: float, steps: int = 10, config: SolverConfig = SolverConfig()) -> float:
    """Largest deviation from a homogeneous equilibrium after ``steps`` solver steps."""
    state = State(np.full(grid.size, eq[0]), np.full(grid.size, eq[1]))
    worst = 0.0
    for _ in range(steps):
        out = newton_step_solve(state, dt, params, config)
        if not out.converged:
            return float("inf")
        state = out.state
        worst = max(worst, float(np.abs(state.u1 - eq[0]).max()), float(np.abs(state.u2 - eq[1]).max()))
    return worst


def run_turing(study: TuringStudy, out_dir=None, name: str | None = None) -> TuringResult:
    name = name or f"turing{study.variant}"
    run = study.case
    grid, params, init, eq = study.build(perturbed=True)
    drift = equilibrium_drift(params, grid, eq, study.time_step, 10, study.solver)

    sink = None
    if out_dir is not None:
        def sink(t, state):
            write_field_csv(Path(out_dir) / f"{name}_field_{run}_{fmt(t)}.csv", grid, state)

    final, rec = simulate(
        params, init, study.final_time, study.time_step, study.solver,
        compute_dissipation=False, snapshot_times=study.snapshot_times, snapshot_sink=sink,
    )
    departure = float(np.abs(final.u1 - eq[0]).max())
    profile = final.u1 if grid.ndim == 1 else final.u1.reshape(grid.shape)[grid.ny // 2]
    result = TuringResult(study, final, eq, departure, drift, count_extrema(profile), rec)
    if out_dir is not None:
        write_diagnostics_csv(Path(out_dir) / f"{name}_diag_{run}.csv", rec.records)
        write_field_csv(Path(out_dir) / f"{name}_field_{run}_{fmt(study.final_time)}.csv", grid, final)
        _write_table(
            Path(out_dir) / f"{name}_table.csv",
            ["case", "min1", "max1", "min2", "max2", "departure", "stationary_error", "n_extrema"],
            [],
        )
        with (Path(out_dir) / f"{name}_table.csv").open("a", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(
                [run] + [fmt(v) for v in (final.u1.min(), final.u1.max(), final.u2.min(), final.u2.max(), departure, drift)]
                + [result.n_extrema]
            )
    return result


def with_solver(study, **changes):
    """Copy of a study with solver settings changed."""
    return replace(study, solver=replace(study.solver, **changes))
