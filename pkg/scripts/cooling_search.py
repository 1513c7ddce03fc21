"""Phonon-number minimisation over power, finesse and mechanical frequency.

Runs the differential-evolution search for each fiber length, with and
without Brillouin gain, and prints the optimum and its noise budget.
"""

import argparse

from sbscavity.fitting import CoolingSearchSpec, minimize_phonons


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lengths", type=float, nargs="+", default=[0.1, 0.2, 0.4, 0.8, 1.6], help="m")
    ap.add_argument("--q-min", type=float, default=100.0)
    ap.add_argument("--no-thermoptic", action="store_true")
    args = ap.parse_args()
    for L in args.lengths:
        for scale in (1.0, 0.0):
            spec = CoolingSearchSpec(L_fib=L, q_min=args.q_min, thermoptic=not args.no_thermoptic,
                                     gain_scale=scale)
            r = minimize_phonons(spec)
            tag = "SBS   " if scale else "no SBS"
            if not r.found:
                print(f"L={L:4.2f} m {tag}: {r.message}")
                continue
            parts = ", ".join(f"{k} {v:.3g}" for k, v in r.contributions.items())
            print(f"L={L:4.2f} m {tag}: n_f {r.n_f:.4g}  P/P_th {r.power_ratio:.3f}  F {r.finesse:.1f}  "
                  f"f_m {r.f_m / 1e3:.2f} kHz  Q_eff {r.Q_eff:.3g}  [{parts}]", flush=True)


if __name__ == "__main__":
    main()
