import numpy as np
import pytest

from nonlocal_skt.cli import dump_config, load_config, main
from nonlocal_skt.diagnostics import read_csv_columns
from nonlocal_skt.grid import ConfigurationError


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.ini")]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[grid]\nn_cells = 16\nwidth = 3\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "grid.width" in capsys.readouterr().err


def test_bad_override_value():
    with pytest.raises(ConfigurationError):
        load_config(None, ["grid.n_cells=many"])


def test_config_round_trip(tmp_path):
    cfg = load_config(None, ["localize.deltas=0.5,0.1", "solver.narrow_kernel_nnz=7", "output.entropy_assert=no"])
    path = dump_config(cfg, tmp_path / "resolved")
    assert load_config(str(path)) == cfg


def test_simulate_writes_monotone_entropy(tmp_path):
    args = ["simulate", "--out", str(tmp_path), "--set", "grid.n_cells=32", "--set", "time.t_final=1",
            "--set", "time.dt=0.1", "--set", "output.snapshot_times=0.5"]
    assert main(args) == 0
    cols = read_csv_columns(tmp_path / "simulate_diag_run.csv")
    assert np.all(np.diff(cols["H"]) <= 1e-12)
    assert (tmp_path / "resolved_config").exists()
    assert (tmp_path / "simulate_field_run_0.5.csv").exists()


def test_outputs_are_byte_identical(tmp_path):
    args = ["simulate", "--set", "grid.n_cells=16", "--set", "time.t_final=0.5", "--set", "time.dt=0.1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "simulate_diag_run.csv").read_bytes()
    assert a == (tmp_path / "b" / "simulate_diag_run.csv").read_bytes()


def test_solver_failure_exits_3(tmp_path):
    args = ["simulate", "--out", str(tmp_path), "--set", "grid.n_cells=16", "--set", "time.dt=1",
            "--set", "solver.max_iterations=1", "--set", "solver.max_dt_halvings=0", "--ic", "indicator"]
    assert main(args) == 3
    assert (tmp_path / "simulate_diag_run.csv").exists()


@pytest.mark.parametrize("cmd", [
    ["kolmogorov-check"],
    ["bounded-entropy"],
    ["converge", "--kernel", "dirac", "--ic", "smooth", "--set", "converge.levels=3"],
    ["turing1d", "--case", "A", "--set", "turing1d.t_final=0.5"],
    ["turing2d", "--smoke", "--case", "linear", "--set", "turing2d.t_final=0.04"],
    ["localize", "--set", "localize.n_cells=32", "--set", "localize.deltas=0.5,0.25", "--set", "localize.fit_max=1",
     "--set", "localize.t_final=0.05"],
])
def test_subcommands_run(cmd, tmp_path):
    assert main(cmd + ["--out", str(tmp_path)]) == 0
    assert any(p.name.endswith("_table.csv") for p in tmp_path.iterdir())
