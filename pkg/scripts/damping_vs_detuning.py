"""Optical damping versus detuning: spatial simulation against the linear model.

Writes a CSV with the demodulated damping and spring shift, with and
without Brillouin gain, next to the single-mode predictions.
"""

import argparse
import csv
import math

import numpy as np

from sbscavity.core import CavityFiberConfig, MechOscillator, single_mode_params
from sbscavity.linear import damping_curve
from sbscavity.optomech import demodulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--f-m", type=float, default=6.1e3, help="mechanical frequency in Hz")
    ap.add_argument("--power", type=float, default=50.0, help="input power in mW")
    ap.add_argument("--points", type=int, default=41)
    ap.add_argument("--mass", type=float, default=1e-10)
    ap.add_argument("--out", default="damping_vs_detuning.csv")
    args = ap.parse_args()
    cfg = CavityFiberConfig()
    P = args.power * 1e-3
    mech = MechOscillator(args.mass, 2 * math.pi * args.f_m, 0.0, 300.0)
    p = single_mode_params(cfg, P)
    D = np.linspace(-2, 2, args.points) * p.kappa
    model = damping_curve(p, mech, D)
    model0 = damping_curve(p.with_(G_B=0.0), mech, D)
    periods = 5 if args.f_m < 1e4 else 20
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Delta [rad/s]", "Gamma_sim [1/s]", "dOmega_sim [rad/s]", "Gamma_sim_noSBS [1/s]",
                    "Gamma_model [1/s]", "Gamma_model_noSBS [1/s]"])
        for i, d in enumerate(D):
            a = demodulate(cfg, mech, float(d), P, periods=periods)
            b = demodulate(cfg.with_(g_B=0.0), mech, float(d), P, periods=periods)
            w.writerow([f"{v:.9e}" for v in (d, a.Gamma_opt, a.dOmega_m, b.Gamma_opt, model[0, i],
                                               model0[0, i])])
            print(f"{d / p.kappa:+.3f} kappa  Gamma {a.Gamma_opt:10.2f} (model {model[0, i]:10.2f})", flush=True)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
