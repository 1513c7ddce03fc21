"""Write synthetic finesse-vs-power data for the `fit` command.

The data come from the single-mode forward model with g_B = 1.67e-11 m/W,
alpha = 6.31e-4 1/m and beta = 0.67, plus 1% Gaussian noise.
"""

import argparse
import csv

import numpy as np

from sbscavity.core import CavityFiberConfig
from sbscavity.fitting import synthetic_finesse_data, with_fiber_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/finesse_synthetic.csv")
    ap.add_argument("--mode", choices=("fast", "sim"), default="fast")
    ap.add_argument("--noise", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = with_fiber_params(CavityFiberConfig(), 1.67e-11, 6.31e-4, 0.67)
    data = synthetic_finesse_data(cfg, np.linspace(0.01, 0.1, 19), noise=args.noise, seed=args.seed,
                                  mode=args.mode)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["P_in [W]", "finesse"])
        w.writerows((f"{P:.9e}", f"{F:.9e}") for P, F in data)
    print(f"wrote {len(data)} points to {args.out}")


if __name__ == "__main__":
    main()
