"""Distance between nonlocal and local solutions as the kernel width shrinks."""
import argparse
import logging
from pathlib import Path

from nonlocal_skt.experiments import LocalizationStudy, run_localization


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/localization")
    ap.add_argument("--fit-max", type=float, default=1.0, help="fit slopes on delta/L <= this value")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for ic in ("smooth", "indicator"):
        res = run_localization(LocalizationStudy(ic=ic, fit_max=args.fit_max), out, f"localize_{ic}")
        print(f"{ic}: " + ", ".join(f"{k} {v:.3f}" for k, v in res.slopes.items()))
        for row in zip(res.deltas, res.w1, res.l1, res.linf):
            print("  delta/L={:<6g} W1={:.4e} L1={:.4e} Linf={:.4e}".format(*row))


if __name__ == "__main__":
    main()
