import numpy as np
import pytest

from nonlocal_skt.diagnostics import (
    DIAG_HEADER,
    Recorder,
    entropy_violations,
    mass_drift,
    read_csv_columns,
    record,
    write_diagnostics_csv,
    write_field_csv,
)
from nonlocal_skt.grid import PeriodicGrid2D
from nonlocal_skt.newton import adaptive_advance
from nonlocal_skt.scheme import State, initial_state


def test_equilibrium_record(small_params):
    s = State(np.full(16, 1.5), np.full(16, 0.5), 0.0)
    r = record(s, State(s.u1.copy(), s.u2.copy(), 0.1), small_params, 0.1)
    assert r.entropy_balance == pytest.approx(0.0, abs=1e-14)
    assert r.D == pytest.approx(0.0, abs=1e-14)
    assert r.mass1 == pytest.approx(small_params.grid.dx * s.u1.sum(), abs=1e-15)


def test_dissipation_can_be_skipped(small_params):
    s = State(np.full(16, 1.0), np.full(16, 1.0))
    assert record(s, s, small_params, 0.1, compute_dissipation=False).D is None


def test_recorder_and_csv(tmp_path, small_params):
    g = small_params.grid
    s0 = initial_state(lambda x: 1 + 0.5 * np.cos(2 * np.pi * x / 25), lambda x: 1 + 0.5 * np.sin(2 * np.pi * x / 25), g)
    snaps = []
    rec = Recorder(small_params, snapshot_times=(0.2,), snapshot_sink=lambda t, s: snaps.append(t))
    adaptive_advance(s0, 0.5, 0.1, small_params, callback=rec)
    assert len(rec.records) == 5 and snaps == [0.2]
    assert mass_drift(rec.records, s0, g) < 1e-12
    assert not entropy_violations(rec.records)
    H = [r.H for r in rec.records]
    assert np.all(np.diff(H) <= 0)
    path = write_diagnostics_csv(tmp_path / "d.csv", rec.records)
    assert path.read_text().splitlines()[0] == ",".join(DIAG_HEADER)
    cols = read_csv_columns(path)
    assert np.allclose(cols["H"], H, rtol=0, atol=0)
    assert rec.duality_sum > 0


def test_missing_entropy_written_as_empty(tmp_path, small_params):
    p = small_params.with_(d21=0.0)
    s = State(np.ones(16), np.ones(16))
    r = record(s, s, p, 0.1)
    assert r.H is None
    path = write_diagnostics_csv(tmp_path / "d.csv", [r])
    assert ",,," in path.read_text().splitlines()[1]
    assert np.isnan(read_csv_columns(path)["H"][0])


def test_field_csv_2d(tmp_path):
    g = PeriodicGrid2D(3, 2, 1.0, 1.0)
    s = State(np.arange(6.0), np.ones(6))
    lines = write_field_csv(tmp_path / "f.csv", g, s).read_text().splitlines()
    assert lines[0] == "x,y,u1,u2" and len(lines) == 7
