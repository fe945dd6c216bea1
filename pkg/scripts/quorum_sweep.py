#!/usr/bin/env python3
"""Average age versus quorum size for several service rates.

Writes one CSV row per (rate, quorum) point and reports the best quorum per
rate. Defaults reproduce the headline configuration (N=10, shift 0.1,
deadline 3, rates 1/3 and 1/2).

Plot recipe (two lines, any CSV-aware plotter):

    import pandas as pd, matplotlib.pyplot as plt
    df = pd.read_csv("quorum_sweep.csv"); [plt.plot(g.quorum, g.avg_aoi, marker="o", label=f"rate={r}") for r, g in df.groupby("rate")]; plt.legend(); plt.show()
"""

import argparse
import csv
import sys
from fractions import Fraction

from aoi_multicast import argmin_quorum, sweep_quorum


def parse_rate(text):
    return float(Fraction(text))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--shift", type=float, default=0.1)
    ap.add_argument("--deadline", type=float, default=3.0)
    ap.add_argument("--rates", type=parse_rate, nargs="+",
                    default=[Fraction(1, 3), Fraction(1, 2)])
    ap.add_argument("--output", default="quorum_sweep.csv")
    args = ap.parse_args(argv)

    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rate", "quorum", "avg_aoi"])
        for rate in args.rates:
            records = sweep_quorum(args.n, float(rate), args.shift, args.deadline)
            for rec in records:
                if rec.analytic is not None:
                    writer.writerow([float(rate), int(rec.var_value),
                                     rec.analytic.avg_aoi])
            k_star = argmin_quorum(records)
            best = next(r for r in records if int(r.var_value) == k_star)
            print(f"rate={float(rate):.4f}: best quorum K={k_star}, "
                  f"average age {best.analytic.avg_aoi:.6f}")
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
