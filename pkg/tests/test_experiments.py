import numpy as np
import pytest

from nonlocal_skt.experiments import (
    ConvergenceStudy,
    LocalizationStudy,
    TuringStudy,
    count_extrema,
    equilibrium_drift,
    fit_order,
    make_kernel,
    run_convergence,
    run_localization,
    run_turing,
)
from nonlocal_skt.grid import ConfigurationError, PeriodicGrid1D


def test_fit_order_exact_geometric_sequence():
    assert fit_order([0.4, 0.2, 0.1], [1e-2, 2.5e-3, 6.25e-4]) == pytest.approx(2.0, abs=1e-12)


def test_fit_order_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        fit_order([1.0], [1.0])
    with pytest.raises(ConfigurationError):
        fit_order([1.0, 0.5], [0.0, 1.0])


def test_count_extrema():
    x = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    assert count_extrema(np.cos(3 * x)) == 3
    assert count_extrema(np.ones(10)) == 0


def test_make_kernel_names():
    g = PeriodicGrid1D(64, 25.0)
    assert make_kernel("indicator", g).integral == pytest.approx(1.0)
    assert make_kernel("smooth", g).integral == pytest.approx(25.0)
    with pytest.raises(ConfigurationError):
        make_kernel("gaussian", g)


def test_ladder_scaling():
    s = ConvergenceStudy()
    ratios = [s.dt(k) / (25 / s.n_cells(k)) ** 2 for k in range(1, 7)]
    assert np.allclose(ratios, ratios[0])
    assert s.n_cells(6) == 1024


def test_study_validation():
    with pytest.raises(ConfigurationError):
        ConvergenceStudy(kernel="hunting")
    with pytest.raises(ConfigurationError):
        LocalizationStudy(deltas=(0.1, 0.5))
    with pytest.raises(ConfigurationError):
        TuringStudy(variant="1d", case="sym")


def test_small_convergence_run(tmp_path):
    res = run_convergence(ConvergenceStudy(ic="smooth", levels=4), tmp_path, "c")
    assert np.all(np.diff(res.errors) < 0)
    assert res.order > 1.5
    assert (tmp_path / "c_table.csv").exists() and (tmp_path / "c_diag_N128.csv").exists()


def test_tiny_localization_run(tmp_path):
    study = LocalizationStudy(deltas=(0.4, 0.2, 0.1), n_cells=64, t_final=0.1, dt=0.05, fit_max=1.0)
    res = run_localization(study, tmp_path, "l")
    assert np.all(np.diff(res.w1) < 0)
    assert set(res.slopes) == {"W1", "L1", "Linf"}


def test_dirac_width_kernel_matches_local_run():
    # an indicator narrower than a cell discretizes to the scaled discrete delta
    study = LocalizationStudy(deltas=(0.5 / 64,), n_cells=64, t_final=0.1, dt=0.05)
    res = run_localization(study)
    assert res.w1[0] < 1e-12 and res.linf[0] < 1e-12


@pytest.mark.parametrize("variant, case", [("1d", "A"), ("1d", "B")])
def test_turing_equilibria_are_stationary(variant, case):
    study = TuringStudy(variant=variant, case=case)
    grid, params, _, eq = study.build()
    assert equilibrium_drift(params, grid, eq, study.time_step) < 1e-8


def test_short_turing_run_writes_outputs(tmp_path):
    res = run_turing(TuringStudy(variant="1d", case="B", t_final=1.0, snapshot_times=(0.5,)), tmp_path)
    assert (tmp_path / "turing1d_field_B_0.5.csv").exists()
    assert (tmp_path / "turing1d_table.csv").read_text().count("\n") == 2
    assert res.stationary_error < 1e-8


def test_turing_2d_build():
    study = TuringStudy.smoke_2d("quadrant")
    grid, params, init, eq = study.build()
    assert grid.shape == (50, 66 if round(133 * 0.5) == 66 else 67)
    assert not params.rho2.is_even()
    assert init.u1.max() == pytest.approx(eq[0] + study.epsilon)
