"""Turing-pattern runs: 1D predator-prey cases and the 2D kernel comparison."""
import argparse
import logging
from pathlib import Path

import numpy as np

from nonlocal_skt.experiments import TuringStudy, run_turing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/turing")
    ap.add_argument("--smoke", action="store_true", help="half-resolution 2D runs (a few minutes)")
    ap.add_argument("--skip-2d", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for case in ("A", "B"):
        res = run_turing(TuringStudy(variant="1d", case=case, snapshot_times=(100.0, 250.0)), out)
        print(f"1d {case}: departure {res.departure:.3f}, extrema {res.n_extrema}, "
              f"u1 in [{res.final.u1.min():.3f}, {res.final.u1.max():.3f}]")
    if args.skip_2d:
        return
    finals = {}
    for case in ("linear", "sym", "quadrant"):
        study = TuringStudy.smoke_2d(case) if args.smoke else TuringStudy(variant="2d", case=case, snapshot_times=(5.0, 10.0))
        res = run_turing(study, out)
        finals[case] = res.final.u1
        print(f"2d {case}: departure {res.departure:.3f}, extrema on mid slice {res.n_extrema}")
    print(f"sym vs quadrant: {np.abs(finals['sym'] - finals['quadrant']).max():.3f}")


if __name__ == "__main__":
    main()
