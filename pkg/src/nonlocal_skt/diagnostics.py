"""Per-step structural measurements and their CSV output."""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .newton import StepOutcome, solver_slack
from .norms import dissipation, entropy
from .scheme import SchemeParams, State, mass, mu

DIAG_HEADER = [
    "k", "t", "mass1", "mass2", "H", "D", "entropy_balance",
    "min1", "max1", "min2", "max2", "newton_iters", "dt",
]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


@dataclass
class DiagnosticsRecord:
    k: int
    t: float
    mass1: float
    mass2: float
    H: float | None
    D: float | None
    entropy_balance: float | None
    min1: float
    max1: float
    min2: float
    max2: float
    newton_iters: int
    dt: float
    slack: float | None = None
    duality_increment: float = 0.0
    final_residual: float = 0.0
    halvings: int = 0

    def row(self) -> list[str]:
        return [fmt(getattr(self, name)) for name in DIAG_HEADER]


def _entropy_or_none(state: State, params: SchemeParams):
    if params.d12 > 0 and params.d21 > 0 and state.u1.min() >= 0 and state.u2.min() >= 0:
        return entropy(state.u1, state.u2, params.d12, params.d21, params.grid)
    return None


def record(
    previous: State,
    current: State,
    params: SchemeParams,
    dt: float,
    outcome: StepOutcome | None = None,
    compute_dissipation: bool = True,
    k: int = 0,
    h_prev: float | None = None,
) -> DiagnosticsRecord:
    """Measure one accepted step ``previous -> current``.

    ``H``, ``D`` and the balance ``H^k + dt D^k - H^{k-1}`` are left empty when
    the entropy is undefined (a vanishing cross-diffusion coefficient).
    """
    grid = params.grid
    H = _entropy_or_none(current, params)
    if h_prev is None:
        h_prev = _entropy_or_none(previous, params)
    D = None
    balance = None
    slack = None
    if H is not None:
        if compute_dissipation:
            D = dissipation(current.u1, current.u2, params, grid)
            balance = H + dt * D - h_prev
        else:
            balance = H - h_prev
        if outcome is not None and current.u1.min() > 0 and current.u2.min() > 0:
            slack = solver_slack(outcome, current, params, h_prev)
    m1, m2 = mu(current, params)
    duality = dt * grid.cell_volume * float(np.sum((m1 * current.u1 + m2 * current.u2) * (current.u1 + current.u2)))
    return DiagnosticsRecord(
        k=k,
        t=current.time,
        mass1=mass(current.u1, grid),
        mass2=mass(current.u2, grid),
        H=H,
        D=D,
        entropy_balance=balance,
        min1=float(current.u1.min()),
        max1=float(current.u1.max()),
        min2=float(current.u2.min()),
        max2=float(current.u2.max()),
        newton_iters=outcome.iterations if outcome else 0,
        dt=dt,
        slack=slack,
        duality_increment=duality,
        final_residual=outcome.final_residual if outcome else 0.0,
        halvings=outcome.halvings if outcome else 0,
    )


class Recorder:
    """Callback for :func:`nonlocal_skt.newton.adaptive_advance` collecting records."""

    def __init__(self, params: SchemeParams, compute_dissipation: bool | None = None, snapshot_times=(), snapshot_sink=None):
        self.params = params
        if compute_dissipation is None:
            compute_dissipation = params.grid.size <= 512
        self.compute_dissipation = compute_dissipation
        self.records: list[DiagnosticsRecord] = []
        self._h_prev = None
        self.snapshot_times = sorted(snapshot_times)
        self.snapshot_sink = snapshot_sink

    def __call__(self, previous: State, current: State, outcome: StepOutcome):
        if not self.records:
            self._h_prev = _entropy_or_none(previous, self.params)
        rec = record(
            previous, current, self.params, outcome.dt_used, outcome,
            self.compute_dissipation, k=len(self.records) + 1, h_prev=self._h_prev,
        )
        self._h_prev = rec.H
        self.records.append(rec)
        if self.snapshot_sink is not None:
            for t in self.snapshot_times:
                if previous.time < t - 1e-12 <= current.time or abs(current.time - t) <= 1e-12:
                    self.snapshot_sink(t, current)

    @property
    def duality_sum(self) -> float:
        return float(sum(r.duality_increment for r in self.records))


def mass_drift(records, initial: State, grid) -> float:
    """Largest relative mass change over a run (both species)."""
    m0 = np.array([mass(initial.u1, grid), mass(initial.u2, grid)])
    worst = 0.0
    for r in records:
        diff = np.abs(np.array([r.mass1, r.mass2]) - m0) / np.maximum(m0, 1e-300)
        worst = max(worst, float(diff.max()))
    return worst


def entropy_violations(records) -> list[DiagnosticsRecord]:
    """Records whose entropy balance exceeds the solver slack."""
    return [r for r in records if r.entropy_balance is not None and r.slack is not None and r.entropy_balance > r.slack]


def write_diagnostics_csv(path, records) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_HEADER)
        for r in records:
            w.writerow(r.row())
    return path


def write_field_csv(path, grid, state: State) -> Path:
    """Snapshot with columns ``x,u1,u2`` (1D) or ``x,y,u1,u2`` (2D)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if grid.ndim == 1:
            w.writerow(["x", "u1", "u2"])
            for x, a, b in zip(grid.centers, state.u1, state.u2):
                w.writerow([fmt(x), fmt(a), fmt(b)])
        else:
            X, Y = grid.centers
            w.writerow(["x", "y", "u1", "u2"])
            for x, y, a, b in zip(X.ravel(), Y.ravel(), state.u1, state.u2):
                w.writerow([fmt(x), fmt(y), fmt(a), fmt(b)])
    return path


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Load a numeric CSV written by this module (empty fields become NaN)."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
    return cols


def record_field_names() -> list[str]:
    return [f.name for f in fields(DiagnosticsRecord)]
