"""Cumulative Mauna Loa kernels K1, K1+K2, K1+K2+K3, K1+K2+K3+K4 on a CO2 excerpt.

Defaults to the 96 monthly means (1994-2001) shipped with the tests.  Time is
shifted to start at zero and the targets are normalized, so the zero-mean GP
does not have to explain the 350 ppm offset.

    python3 demos/mauna_loa.py [path/to/co2.csv]
"""

import argparse
from pathlib import Path

from gplaplace import Dataset, GPModel, build_prior, criteria_suite, load_csv, mauna_kernel, normalize

DEFAULT = Path(__file__).resolve().parent.parent / "tests" / "data" / "co2_monthly_1994_2001.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="?", default=str(DEFAULT))
    ap.add_argument("--restarts", type=int, default=5)
    args = ap.parse_args()

    raw = load_csv(args.csv)
    data, _ = normalize(Dataset(raw.x - raw.x[0], raw.y))
    print(f"{data.n} points from {args.csv}")
    cols = ("mll", "map", "logz_laps", "logz_lapaic", "logz_lapbic")
    print(f"{'kernel':<14}{'u':>3}" + "".join(f"{c:>13}" for c in cols))
    for level in (1, 2, 3, 4):
        expr = mauna_kernel(level)
        res = criteria_suite(GPModel(expr), build_prior(expr), data, restarts=args.restarts)
        vals = "".join(f"{getattr(res, c):13.2f}" if getattr(res, c) is not None else f"{'-':>13}"
                       for c in cols)
        print(f"{res.kernel:<14}{res.u:>3}{vals}")


if __name__ == "__main__":
    main()
