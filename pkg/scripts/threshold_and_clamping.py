"""Brillouin threshold and pump clamping of the default cavity.

Prints the simulated threshold next to the single-mode value, then the
equilibrium intracavity photon numbers for a few input powers.
"""

import argparse

from sbscavity.core import CavityFiberConfig, single_mode_params
from sbscavity.linear import steady_state, threshold_power
from sbscavity.propagator import DriveSpec, run_to_equilibrium, simulated_threshold


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--powers", type=float, nargs="+", default=[20, 45, 60, 75, 100], help="mW")
    args = ap.parse_args()
    cfg = CavityFiberConfig()
    p = single_mode_params(cfg, 1.0)
    print(f"threshold: simulated {simulated_threshold(cfg) * 1e3:.2f} mW, "
          f"single-mode {threshold_power(p, 0.0) * 1e3:.2f} mW")
    print(f"clamped pump photon number 2 kappa / G_B = {2 * p.kappa / p.G_B:.4e}")
    print("P_in [mW]  n_pump(sim)  n_stokes(sim)  n_pump(model)  B(model)")
    for P_mW in args.powers:
        P = P_mW * 1e-3
        r = run_to_equilibrium(cfg, DriveSpec(P_in=P), tol=1e-8, window=4)
        ss = steady_state(single_mode_params(cfg, P))
        print(f"{P_mW:9.1f}  {r.n_pump:.5e}  {r.n_stokes:.5e}  {ss.n_pump:.5e}  {ss.B_bar:.5e}")


if __name__ == "__main__":
    main()
