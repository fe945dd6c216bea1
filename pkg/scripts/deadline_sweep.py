#!/usr/bin/env python3
"""Average age versus deadline for several service rates.

Writes one CSV row per (rate, deadline) grid point and reports the refined
minimizer per rate. Defaults reproduce the headline configuration
(N=10, K=7, shift 0.1, rates 1/3 and 1/2, deadline 0.2..10).

Plot recipe (two lines, any CSV-aware plotter):

    import pandas as pd, matplotlib.pyplot as plt
    df = pd.read_csv("deadline_sweep.csv", comment="#"); [plt.plot(g.deadline, g.avg_aoi, label=f"rate={r}") for r, g in df.groupby("rate")]; plt.legend(); plt.show()
"""

import argparse
import csv
import sys
from fractions import Fraction

from aoi_multicast import minimize_deadline, sweep_deadline


def parse_rate(text):
    return float(Fraction(text))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--k", type=int, default=7)
    ap.add_argument("--shift", type=float, default=0.1)
    ap.add_argument("--rates", type=parse_rate, nargs="+",
                    default=[Fraction(1, 3), Fraction(1, 2)])
    ap.add_argument("--lo", type=float, default=0.2)
    ap.add_argument("--hi", type=float, default=10.0)
    ap.add_argument("--step", type=float, default=0.1)
    ap.add_argument("--output", default="deadline_sweep.csv")
    args = ap.parse_args(argv)

    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rate", "deadline", "avg_aoi"])
        for rate in args.rates:
            records = sweep_deadline(args.n, args.k, float(rate), args.shift,
                                     args.lo, args.hi, args.step)
            for rec in records:
                if rec.analytic is not None:
                    writer.writerow([float(rate), rec.var_value,
                                     rec.analytic.avg_aoi])
            res = minimize_deadline(args.n, args.k, float(rate), args.shift,
                                    args.lo, args.hi)
            flag = " (boundary)" if res.boundary_minimum else ""
            print(f"rate={float(rate):.4f}: optimal deadline "
                  f"{res.t_d_star:.4f}{flag}, average age {res.aoi_star:.6f}")
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
