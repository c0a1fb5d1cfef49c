"""Mesh-refinement study for every kernel / initial-data pair (six cells)."""
import argparse
import logging
from pathlib import Path

from nonlocal_skt.experiments import ConvergenceStudy, run_convergence

PUBLISHED = {
    ("smooth", "indicator"): (1.97, 5e-3),
    ("smooth", "smooth"): (2.32, 4.9e-4),
    ("indicator", "indicator"): (1.53, 7e-2),
    ("indicator", "smooth"): (2.02, 9.2e-4),
    ("dirac", "indicator"): (1.04, 2.7e-3),
    ("dirac", "smooth"): (2.32, 5e-4),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/convergence")
    ap.add_argument("--levels", type=int, default=6)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'kernel':>10} {'ic':>10} {'order':>7} {'pub':>5} {'err(512)':>10} {'pub':>8}")
    for (kernel, ic), (order, err) in PUBLISHED.items():
        res = run_convergence(ConvergenceStudy(kernel=kernel, ic=ic, levels=args.levels), out, f"conv_{kernel}_{ic}")
        print(f"{kernel:>10} {ic:>10} {res.order:7.3f} {order:5.2f} {res.error_second_finest:10.3e} {err:8.1e}")


if __name__ == "__main__":
    main()
