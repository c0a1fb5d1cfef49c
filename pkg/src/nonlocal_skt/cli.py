"""Command-line entry point.

Runs are configured by an INI file (``--config``) plus ``--set section.key=value``
overrides; every run writes its fully resolved configuration to
``<out_dir>/resolved_config`` next to the CSV outputs.

Exit status: 0 success, 1 a structural check failed, 2 configuration error,
3 solver hard failure (outputs written so far are kept).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .bounded import BoundedParams, bounded_advance, bounded_entropy_check, bounded_entropy
from .diagnostics import Recorder, entropy_violations, fmt, write_diagnostics_csv, write_field_csv
from .grid import BoundedGrid1D, ConfigurationError, PeriodicGrid1D
from .kolmogorov import (
    duality_inequality_check,
    dual_solve,
    energy_estimate_check,
    forward_solve,
    linf_bounds_check,
    smooth_problem,
)
from .newton import SolverConfig, SolverFailure, adaptive_advance
from .norms import DomainError
from .scheme import MimuraNishiuraYamaguti, SegelLevin, State, Zero, initial_state, make_params

log = logging.getLogger("nonlocal_skt")

COMMANDS = ("simulate", "converge", "localize", "turing1d", "turing2d", "kolmogorov-check", "bounded-entropy")

# value kinds: int, float, str, bool, floats (comma list), optfloat, optint
_SOLVER_KINDS = {"tolerance": "float", "max_iterations": "int", "max_dt_halvings": "int", "linear_solver": "str",
                 "dense_limit": "int", "narrow_kernel_nnz": "optint", "krylov_restart": "int",
                 "krylov_inner_tol": "float", "krylov_maxiter": "int", "reuse_limit": "int",
                 "refactor_iterations": "int", "max_log_step": "float",
                 "min_ratio": "float", "density_floor": "float"}

SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "run": {"out_dir": ("str", "out"), "name": ("str", "")},
    "grid": {"length": ("float", 25.0), "n_cells": ("int", 128)},
    "time": {"t_final": ("float", 5.0), "dt": ("float", 0.01)},
    "kernel": {
        "sigma": ("str", "dirac"), "rho": ("str", "smooth"),
        "delta_fraction": ("float", 0.25), "hunting_radius_fraction": ("float", 10 / 49),
    },
    "initial": {"ic": ("str", "smooth")},
    "coefficients": {"d1": ("float", 0.0), "d2": ("float", 0.0), "d11": ("float", 0.0),
                     "d12": ("float", 1.0), "d21": ("float", 2.0), "d22": ("float", 0.0)},
    "reaction": {"name": ("str", "zero")},
    "solver": {f.name: (_SOLVER_KINDS[f.name], f.default) for f in dataclasses.fields(SolverConfig)},
    "output": {"snapshot_times": ("floats", ()), "dissipation": ("str", "auto"), "entropy_assert": ("bool", True)},
    "converge": {"kernel": ("str", "smooth"), "ic": ("str", "indicator"), "levels": ("int", 6),
                 "aggregation": ("str", "max")},
    "localize": {"ic": ("str", "smooth"), "deltas": ("floats", ex.DEFAULT_DELTAS), "fit_max": ("float", 1.0),
                 "n_cells": ("int", 1024), "dt": ("float", 1e-2), "t_final": ("float", 1.0)},
    "turing1d": {"case": ("str", "B"), "epsilon": ("float", 1e-2), "t_final": ("optfloat", None),
                 "dt": ("optfloat", None), "resolution": ("float", 1.0)},
    "turing2d": {"case": ("str", "sym"), "epsilon": ("float", 1e-2), "t_final": ("optfloat", None),
                 "dt": ("optfloat", None), "resolution": ("float", 1.0)},
    "kolmogorov": {"n_cells": ("int", 64), "n_steps": ("int", 20), "dt": ("float", 1e-2),
                   "gamma": ("float", 0.5), "Gamma": ("float", 1.5)},
    "bounded": {"n_cells": ("int", 32), "n_steps": ("int", 20), "dt": ("float", 1e-3),
                "d1": ("float", 0.1), "d2": ("float", 0.1), "d12": ("float", 1.0), "d21": ("float", 1.0)},
}


def _parse(kind: str, text: str, key: str):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "floats":
            return tuple(float(t) for t in text.split(",") if t.strip())
        if kind in ("optfloat", "optint"):
            if text.lower() in ("", "none", "auto"):
                return None
            return float(text) if kind == "optfloat" else int(text)
        return text
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {text!r} (expected {kind})") from None


def _render(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(fmt(v) for v in value)
    if isinstance(value, float):
        return fmt(value)
    return str(value)


def load_config(path: str | None, overrides=()) -> dict[str, dict[str, object]]:
    """Resolve defaults, the INI file and ``section.key=value`` overrides."""
    cfg = {sec: {k: default for k, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}

    def assign(section, key, text):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown config key {section}.{key}")
        cfg[section][key] = _parse(SCHEMA[section][key][0], text, f"{section}.{key}")

    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(p)
        except configparser.Error as err:
            raise ConfigurationError(f"cannot parse {path}: {err}") from None
        for section in parser.sections():
            for key, text in parser[section].items():
                assign(section, key, text)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"override must look like section.key=value, got {item!r}")
        lhs, text = item.split("=", 1)
        section, key = lhs.split(".", 1)
        assign(section.strip(), key.strip(), text)
    return cfg


def dump_config(cfg, path) -> Path:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for sec, keys in cfg.items():
        parser[sec] = {k: _render(v) for k, v in keys.items()}
    path = Path(path)
    with path.open("w") as fh:
        parser.write(fh)
    return path


def _solver(cfg) -> SolverConfig:
    return SolverConfig(**cfg["solver"])


def _reaction(name: str):
    table = {"zero": Zero, "segel_levin": SegelLevin, "mny": MimuraNishiuraYamaguti}
    if name not in table:
        raise ConfigurationError(f"unknown reaction {name!r}; expected one of {sorted(table)}")
    return table[name]()


def _kernel(cfg, name, grid):
    k = cfg["kernel"]
    return ex.make_kernel(
        name, grid,
        delta=k["delta_fraction"] * grid.length,
        radius=k["hunting_radius_fraction"] * grid.length,
    )


def _dissipation_toggle(cfg):
    value = cfg["output"]["dissipation"]
    if value not in ("auto", "on", "off"):
        raise ConfigurationError("output.dissipation must be auto, on or off")
    return None if value == "auto" else value == "on"


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg, out: Path, name: str) -> int:
    grid = PeriodicGrid1D(cfg["grid"]["n_cells"], cfg["grid"]["length"])
    sigma = _kernel(cfg, cfg["kernel"]["sigma"], grid)
    rho = _kernel(cfg, cfg["kernel"]["rho"], grid)
    params = make_params(grid, sigma, sigma, rho, rho.reflected(), reaction=_reaction(cfg["reaction"]["name"]),
                         **cfg["coefficients"])
    u1, u2 = ex.test1_initial_data(cfg["initial"]["ic"], grid.length)
    init = initial_state(u1, u2, grid)
    rec = Recorder(
        params, _dissipation_toggle(cfg), cfg["output"]["snapshot_times"],
        lambda t, s: write_field_csv(out / f"{name}_field_run_{fmt(t)}.csv", grid, s),
    )
    try:
        adaptive_advance(init, cfg["time"]["t_final"], cfg["time"]["dt"], params, _solver(cfg),
                         keep_trajectory=False, callback=rec)
    finally:
        write_diagnostics_csv(out / f"{name}_diag_run.csv", rec.records)
    final_t = rec.records[-1].t
    last = rec.records[-1]
    log.info("t=%.6g  H=%s  min=(%.3g, %.3g)", final_t, fmt(last.H), last.min1, last.min2)
    if cfg["output"]["entropy_assert"] and params.entropy_structure:
        bad = entropy_violations(rec.records)
        if bad:
            log.error("entropy inequality violated at steps %s", [r.k for r in bad][:10])
            return 1
    return 0


def cmd_converge(cfg, out: Path, name: str) -> int:
    c = cfg["converge"]
    study = ex.ConvergenceStudy(
        kernel=c["kernel"], ic=c["ic"], levels=c["levels"], aggregation=c["aggregation"],
        length=cfg["grid"]["length"], t_final=cfg["time"]["t_final"], solver=_solver(cfg), **cfg["coefficients"],
    )
    res = ex.run_convergence(study, out, name)
    for n, e in zip(res.n_cells, res.errors):
        print(f"N={n:5d}  error={e:.4e}")
    print(f"order={res.order:.3f}")
    return 0


def cmd_localize(cfg, out: Path, name: str) -> int:
    c = cfg["localize"]
    study = ex.LocalizationStudy(
        ic=c["ic"], deltas=tuple(c["deltas"]), fit_max=c["fit_max"], n_cells=c["n_cells"], dt=c["dt"],
        t_final=c["t_final"], length=cfg["grid"]["length"], d12=cfg["coefficients"]["d12"],
        d21=cfg["coefficients"]["d21"], solver=_solver(cfg),
    )
    res = ex.run_localization(study, out, name)
    for key in ("W1", "L1", "Linf"):
        print(f"slope {key}: {res.slopes[key]:.3f} (all points {res.slopes_all[key]:.3f})")
    return 0


def _cmd_turing(variant):
    def run(cfg, out: Path, name: str) -> int:
        c = cfg[f"turing{variant}"]
        study = ex.TuringStudy(
            variant=variant, case=c["case"], epsilon=c["epsilon"], t_final=c["t_final"], dt=c["dt"],
            resolution=c["resolution"], snapshot_times=cfg["output"]["snapshot_times"], solver=_solver(cfg),
        )
        res = ex.run_turing(study, out, name)
        print(f"departure={res.departure:.4g} stationary_error={res.stationary_error:.3g} extrema={res.n_extrema}")
        return 0
    return run


def cmd_kolmogorov(cfg, out: Path, name: str) -> int:
    c = cfg["kolmogorov"]
    prob = smooth_problem(c["n_cells"], c["n_steps"], c["dt"])
    lb = linf_bounds_check(prob, c["gamma"], c["Gamma"])
    en = energy_estimate_check(prob)
    dual = dual_solve(prob, np.ones((prob.n_steps, prob.grid.n_cells)))
    du = duality_inequality_check(prob)
    forward_solve(prob)
    ok = bool(np.all(lb.passed) and np.all(en.passed) and np.all(dual.estimate.passed))
    with (out / f"{name}_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "passed", "value"])
        w.writerow(["linf_bounds", int(np.all(lb.passed)), fmt(float(np.max(lb.zmax)))])
        w.writerow(["energy_estimate", int(np.all(en.passed)), fmt(float(np.max(en.lhs - en.rhs)))])
        w.writerow(["dual_estimate", int(np.all(dual.estimate.passed)), fmt(float(np.max(dual.estimate.lhs - dual.estimate.rhs)))])
        w.writerow(["duality_ratio", 1, fmt(du.ratio)])
        w.writerow(["duality_identity_error", int(du.identity_error < 1e-10), fmt(du.identity_error)])
    print(f"bounds={np.all(lb.passed)} energy={np.all(en.passed)} dual={np.all(dual.estimate.passed)} ratio={du.ratio:.4f}")
    return 0 if ok else 1


def cmd_bounded(cfg, out: Path, name: str) -> int:
    c = cfg["bounded"]
    grid = BoundedGrid1D(c["n_cells"])
    params = BoundedParams(grid, d1=c["d1"], d2=c["d2"], d12=c["d12"], d21=c["d21"])
    x = grid.centers
    init = State(1.0 + 0.5 * np.cos(np.pi * x), 1.0 + 0.5 * np.sin(2 * np.pi * x))
    try:
        traj, outs = bounded_advance(init, c["dt"], c["n_steps"], params, _solver(cfg))
    except SolverFailure as err:
        traj, outs = err.trajectory, err.records
        _write_bounded(out / f"{name}_table.csv", traj, outs, params, c["dt"])
        raise
    rows = _write_bounded(out / f"{name}_table.csv", traj, outs, params, c["dt"])
    ok = all(r.passed for r in rows)
    print(f"steps={len(rows)} entropy_inequality={'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def _write_bounded(path, traj, outs, params, dt):
    rows = bounded_entropy_check(traj, params, dt, [o.final_residual for o in outs]) if len(traj) > 1 else []
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "H", "mass1", "mass2", "lhs", "slack", "passed"])
        for r, s in zip(rows, traj[1:]):
            w.writerow([r.k, fmt(bounded_entropy(s, params)), fmt(params.grid.dx * s.u1.sum()),
                        fmt(params.grid.dx * s.u2.sum()), fmt(r.lhs), fmt(r.rhs), int(r.passed)])
    return rows


HANDLERS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "localize": cmd_localize,
    "turing1d": _cmd_turing("1d"),
    "turing2d": _cmd_turing("2d"),
    "kolmogorov-check": cmd_kolmogorov,
    "bounded-entropy": cmd_bounded,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlocal-skt", description="Nonlocal cross-diffusion finite-volume solver.")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="INI file with [section] key = value entries")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("--out", help="output directory (run.out_dir)")
        p.add_argument("-v", "--verbose", action="store_true")
        if cmd in ("converge",):
            p.add_argument("--kernel", choices=("smooth", "indicator", "dirac"))
        if cmd in ("converge", "localize", "simulate"):
            p.add_argument("--ic", choices=("smooth", "indicator"))
        if cmd in ("turing1d", "turing2d"):
            p.add_argument("--case")
        if cmd == "turing2d":
            p.add_argument("--smoke", action="store_true", help="half resolution, dt = 0.02")
    return ap


def _shortcuts(args) -> list[str]:
    extra = []
    section = {"simulate": "initial", "converge": "converge", "localize": "localize"}.get(args.command)
    if getattr(args, "kernel", None):
        extra.append(f"converge.kernel={args.kernel}")
    if getattr(args, "ic", None):
        extra.append(f"{section}.ic={args.ic}")
    if getattr(args, "case", None):
        extra.append(f"{args.command}.case={args.case}")
    if getattr(args, "smoke", False):
        extra += ["turing2d.resolution=0.5", "turing2d.dt=0.02"]
    if args.out:
        extra.append(f"run.out_dir={args.out}")
    return extra


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, _shortcuts(args) + list(args.overrides))
        out = Path(cfg["run"]["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        name = cfg["run"]["name"] or args.command.replace("-", "_")
        dump_config(cfg, out / "resolved_config")
        return HANDLERS[args.command](cfg, out, name)
    except (ConfigurationError, DomainError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except SolverFailure as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
