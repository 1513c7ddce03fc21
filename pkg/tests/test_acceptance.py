"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line and the
session ends with a summary of them.

Runs that take hours (the Langevin comparison and the fit with the spatial
forward model) only run when SBS_FULL_ACCEPTANCE=1.
"""

import math
import os

import numpy as np
import pytest

from sbscavity.core import CavityFiberConfig, MechOscillator, single_mode_params
from sbscavity.fitting import (CoolingSearchSpec, FitSpec, fit_fiber_params, minimize_phonons,
                               synthetic_finesse_data, with_fiber_params)
from sbscavity.linear import steady_state, two_sideband_damping
from sbscavity.noise import NoiseEnv, phonon_number, phonon_number_direct
from sbscavity.optomech import demodulate, langevin_run, peak_damping, thermal_amplitude
from sbscavity.propagator import DriveSpec, run_to_equilibrium, simulated_threshold
from sbscavity.spectroscopy import SweepSpec, dynamic_sweep, fit_trace

FULL = os.environ.get("SBS_FULL_ACCEPTANCE") == "1"
heavy = pytest.mark.skipif(not FULL, reason="set SBS_FULL_ACCEPTANCE=1 to run")


def _mech(f_m, mass=1e-10):
    # prescribed motion: the oscillator's own damping plays no role
    return MechOscillator(mass, 2 * math.pi * f_m, 0.0, 300.0)


def test_1_below_threshold_finesse(default_cavity, acceptance_report):
    cfg = default_cavity
    R_guess = cfg.R2 * cfg.beta_mm * math.exp(-2 * cfg.alpha_loss * cfg.L_fib)
    fit = fit_trace(dynamic_sweep(cfg, 0.03, SweepSpec()), cfg.R1, R_guess=R_guess)
    err = fit.finesse_A / 11.93 - 1
    acceptance_report(1, fit.ok and abs(err) <= 0.02, f"F_A = {fit.finesse_A:.3f} vs 11.93 ({err:+.2%})")


def test_2_intracavity_clamping(default_cavity, acceptance_report):
    n = []
    for P in (0.06, 0.075, 0.1):
        r = run_to_equilibrium(default_cavity, DriveSpec(P_in=P), tol=1e-8, window=4, max_round_trips=100_000)
        assert r.converged
        n.append(r.n_pump)
    p = single_mode_params(default_cavity, 0.06)
    clamp = 2 * p.kappa / p.G_B
    spread = max(n) / min(n) - 1
    dev = max(abs(v / clamp - 1) for v in n)
    acceptance_report(2, spread <= 0.03 and dev <= 0.10,
                      f"spread {spread:.2%}, max deviation from 2 kappa/G_B {dev:.2%}")


def test_3_threshold_scaling(default_cavity, acceptance_report):
    kap, P = [], []
    for R1 in (0.85, 0.9, 0.95):
        cfg = default_cavity.with_(R1=R1)
        kap.append(single_mode_params(cfg, 1.0).kappa)
        P.append(simulated_threshold(cfg))
    slope = np.polyfit(np.log(kap), np.log(P), 1)[0]
    acceptance_report(3, abs(slope + 2) <= 0.15, f"P_th ~ kappa^{slope:.3f} (target -2 +- 0.15)")


def test_4_no_gain_oracle(default_cavity, acceptance_report):
    cold = default_cavity.with_(g_B=0.0)
    P = 0.03
    p0 = single_mode_params(cold, P)
    D = np.linspace(-2, 2, 17) * p0.kappa
    worst = []
    for f_m, periods in ((6.1e3, 5), (300e3, 20)):
        mech = _mech(f_m)
        sim = np.array([[r.Gamma_opt, r.dOmega_m] for r in
                        (demodulate(cold, mech, float(d), P, periods=periods) for d in D)])
        ana = np.array([two_sideband_damping(p0.with_(Delta=float(d)), mech) for d in D])
        for j in range(2):
            worst.append(math.sqrt(np.mean((sim[:, j] - ana[:, j]) ** 2) / np.mean(ana[:, j] ** 2)))
    acceptance_report(4, max(worst) <= 0.05,
                      "relative RMS (Gamma, dOmega) at 6.1 kHz: {:.2%}, {:.2%}; at 300 kHz: {:.2%}, {:.2%}"
                      .format(*worst))


def test_5_regime_signatures(default_cavity, acceptance_report):
    parts, ok = [], True
    for P in (0.06, 0.075):
        mech = _mech(300e3)
        w = abs(peak_damping(default_cavity, mech, P, signed="abs").best.Gamma_opt)
        wo = abs(peak_damping(default_cavity, mech, P, signed="abs", no_sbs=True).best.Gamma_opt)
        ok &= w < wo
        parts.append(f"300 kHz {P * 1e3:.0f} mW max|G| {w:.1f} vs {wo:.1f}")
    mech = _mech(6.1e3)
    kw = dict(periods=5)
    w = peak_damping(default_cavity, mech, 0.05, **kw).best
    wo = peak_damping(default_cavity, mech, 0.05, no_sbs=True, **kw).best
    ok &= w.Gamma_opt > wo.Gamma_opt and w.Delta * wo.Delta < 0
    k = single_mode_params(default_cavity, 0.05).kappa
    parts.append(f"6.1 kHz max G {w.Gamma_opt:.1f} at {w.Delta / k:+.3f}k vs {wo.Gamma_opt:.1f} at "
                 f"{wo.Delta / k:+.3f}k")
    acceptance_report(5, ok, "; ".join(parts))


def test_6_optimal_power(default_cavity, acceptance_report):
    mech = _mech(20e3)
    P = np.arange(0.035, 0.0651, 0.005)
    g = np.array([peak_damping(default_cavity, mech, float(p)).best.Gamma_opt for p in P])
    i = int(np.argmax(g))
    P_opt = P[i]
    if 0 < i < P.size - 1:
        # parabola through the best grid point and its neighbours
        a, b, _ = np.polyfit(P[i - 1:i + 2], g[i - 1:i + 2], 2)
        P_opt = -b / (2 * a)
    acceptance_report(6, 0.037 <= P_opt <= 0.055, f"optimal power {P_opt * 1e3:.1f} mW (grid best "
                      f"{P[i] * 1e3:.0f} mW, Gamma {g[i]:.1f}/s)")


def test_7_mass_scaling(default_cavity, acceptance_report):
    masses = np.array([1e-11, 1e-10, 1e-9])
    g = np.array([peak_damping(default_cavity, _mech(10e3, m), 0.06).best.Gamma_opt for m in masses])
    mg = masses * g
    spread = mg.max() / mg.min() - 1
    slope = np.polyfit(np.log(masses), np.log(g), 1)[0]
    acceptance_report(7, spread <= 0.10, f"m * Gamma_peak spread {spread:.2%}, log slope {slope:.3f}")


# -- Langevin ------------------------------------------------------------------

LANGEVIN_CFG = CavityFiberConfig.from_fiber_length(5.0)
LANGEVIN_MECH = MechOscillator.from_q(1e-10, 20e3, 5000.0, 300.0)
LANGEVIN_P = 0.1


def _langevin_compare(detunings, n_real, t_total, burn_in, n_sigma):
    cfg, mech, P = LANGEVIN_CFG, LANGEVIN_MECH, LANGEVIN_P
    k = single_mode_params(cfg, P).kappa
    x2 = thermal_amplitude(mech) ** 2
    rows, ok = [], True
    for d in detunings:
        g = demodulate(cfg, MechOscillator(mech.mass, mech.Omega_m, 0.0, mech.T_bath), d * k, P).Gamma_opt
        if g < -mech.Gamma_m:
            rows.append(f"{d:+.2f}k lasing band, skipped")
            continue
        pred = mech.Gamma_m / (mech.Gamma_m + g)
        r = langevin_run(cfg, mech, d * k, P, t_total=t_total, burn_in=burn_in, n_realizations=n_real,
                         noise_seed=int(1000 * abs(d)))
        z = (r.mean_x2 / x2 - pred) / (r.stderr / x2)
        ok &= (not r.lasing) and abs(z) <= n_sigma
        rows.append(f"{d:+.2f}k sim {r.mean_x2 / x2:.4f} pred {pred:.4f} z {z:+.2f}")
    return ok, rows


@heavy
def test_8_langevin_smoke(acceptance_report):
    ok, rows = _langevin_compare((-0.44, -0.42, -0.40), 10, 0.06, 0.02, 3.0)
    acceptance_report(8, ok, "smoke: " + "; ".join(rows))


@heavy
def test_8_langevin_full(acceptance_report):
    ok, rows = _langevin_compare((-1.0, -0.6, -0.46, -0.44, -0.42, -0.40, -0.3, 0.3, 0.6, 1.0), 50, 0.6, 0.2,
                                 2.0)
    acceptance_report(8, ok, "full: " + "; ".join(rows))


def test_9_equipartition(default_cavity, acceptance_report):
    mech = MechOscillator.from_q(1e-10, 20e3, 10.0, 300.0)
    r = langevin_run(default_cavity, mech, 0.0, 0.0, radiation=False, t_total=0.02, burn_in=0.002,
                     n_realizations=20, noise_seed=9)
    x2 = thermal_amplitude(mech) ** 2
    err = r.mean_x2 / x2 - 1
    acceptance_report(9, abs(err) <= 0.05 and not r.lasing,
                      f"<x^2>/(k_B T/m Omega^2) = {1 + err:.4f} +- {r.stderr / x2:.4f} (dt = {default_cavity.dt:.3g} s)")


def test_10_phonon_optimum(acceptance_report):
    a = minimize_phonons(CoolingSearchSpec(L_fib=1.6))
    b = minimize_phonons(CoolingSearchSpec(L_fib=0.1))
    ok_a = a.found and abs(a.n_f - 0.44) <= 0.10 and a.finesse >= 149.0 and 10e3 <= a.f_m <= 16e3
    ok_b = b.found and abs(b.n_f - 0.83) <= 0.15 and abs(b.f_m / 105e3 - 1) <= 0.2
    acceptance_report(10, ok_a and ok_b,
                      f"1.6 m: n_f {a.n_f:.3g}, F {a.finesse:.1f}, f_m {a.f_m / 1e3:.1f} kHz; "
                      f"0.1 m: n_f {b.n_f:.3g}, f_m {b.f_m / 1e3:.1f} kHz")


TRUTH = {"g_B": 1.67e-11, "alpha": 6.31e-4, "beta": 0.67}


def _fit_recovery(mode, powers):
    truth = with_fiber_params(CavityFiberConfig(), TRUTH["g_B"], TRUTH["alpha"], TRUTH["beta"])
    data = synthetic_finesse_data(truth, powers, noise=0.01, seed=0, mode=mode)
    r = fit_fiber_params(FitSpec(data=data, mode=mode))
    errs = {k: getattr(r, k) / v - 1 for k, v in TRUTH.items()}
    ok = all(abs(e) <= 0.10 for e in errs.values())
    return ok, ", ".join(f"{k} {e:+.1%}" for k, e in errs.items())


def test_11_fit_recovery_fast(acceptance_report):
    ok, detail = _fit_recovery("fast", np.linspace(0.01, 0.1, 19))
    acceptance_report(11, ok, "fast mode: " + detail)


@heavy
def test_11_fit_recovery_full(acceptance_report):
    ok, detail = _fit_recovery("sim", np.linspace(0.01, 0.1, 10))
    acceptance_report(11, ok, "full mode: " + detail)


def test_12_high_q_shortcut(default_cavity, acceptance_report):
    base = single_mode_params(default_cavity, 0.03)
    env = NoiseEnv.room(default_cavity.L_fib)
    worst, n = 0.0, 0
    for f_m, Q in ((6.1e3, 1e4), (6.1e3, 1e6), (20e3, 1e5), (300e3, 1e5)):
        mech = MechOscillator.from_q(1e-10, f_m, Q, 300.0)
        for P in (0.02, 0.06, 0.1):
            for D in (-1.0, -0.42, 0.3, 0.45, 1.0):
                p = base.with_(a_in_flux=base.a_in_flux * P / 0.03, Delta=D * base.kappa)
                ss = steady_state(p)
                r = phonon_number(p, ss, mech, env)
                if not (r.valid and r.Q_eff > 100):
                    continue
                worst = max(worst, abs(phonon_number_direct(p, ss, mech, env) / r.n_f - 1))
                n += 1
    acceptance_report(12, n > 0 and worst <= 0.02, f"worst deviation {worst:.3%} over {n} valid points")
