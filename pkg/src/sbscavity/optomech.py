"""Radiation-pressure experiments on the spatial simulator: prescribed-motion
demodulation of the force and the fully coupled stochastic oscillator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .core import K_B, CavityFiberConfig, MechOscillator
from .propagator import (MOTION_LANGEVIN, MOTION_SINE, DriveSpec, FieldLattice, Propagator,
                         SineMotion, run_to_equilibrium)


@dataclass(frozen=True)
class DemodResult:
    Delta: float
    Gamma_opt: float
    dOmega_m: float
    Gamma_pump: float
    Gamma_stokes: float
    F_pump_quadratures: tuple
    F_stokes_quadratures: tuple
    F_static: float = 0.0
    equilibrated: bool = True

    @property
    def F_total_quadratures(self):
        return (self.F_pump_quadratures[0] + self.F_stokes_quadratures[0],
                self.F_pump_quadratures[1] + self.F_stokes_quadratures[1])


def thermal_amplitude(mech: MechOscillator) -> float:
    return math.sqrt(K_B * mech.T_bath / (mech.mass * mech.Omega_m**2))


def _prepare(config, Delta, P_in, seed_power_ratio, tol, max_round_trips):
    drive = DriveSpec(P_in=P_in, Delta=Delta, seed_power_ratio=seed_power_ratio)
    prop = Propagator(config, drive)
    eq = run_to_equilibrium(config, drive, tol=tol, max_round_trips=max_round_trips, window=4, propagator=prop)
    return prop, eq


def demodulate(config: CavityFiberConfig, mech: MechOscillator, Delta: float, P_in: float, *,
               periods: int = 20, amplitude: float | None = None, settle: float | None = None,
               seed_power_ratio: float = 1e-9, tol: float = 1e-7, max_round_trips: int = 100_000) -> DemodResult:
    """Optical damping and spring shift from the force under prescribed sinusoidal motion.

    With x = A sin(Om t) the force quadratures are I = <2 F sin(Om t)> and
    Q = <2 F cos(Om t)> over ``periods`` full periods, giving
    dOmega = -I / (2 m Om A) and Gamma = -Q / (m Om A).
    """
    A = thermal_amplitude(mech) if amplitude is None else amplitude
    Om = mech.Omega_m
    prop, eq = _prepare(config, Delta, P_in, seed_power_ratio, tol, max_round_trips)
    T_m = 2 * math.pi / Om
    if settle is None:
        settle = min(max(T_m, 5 * eq.converged_t), 10 * T_m)
    prop.set_motion(SineMotion(A, Om))
    prop.advance(int(round(settle / config.dt)), motion=MOTION_SINE)
    n = int(round(periods * T_m / config.dt))
    acc = np.zeros(9)
    _advance_demod(prop, n, acc, Om)
    sn, cs, cnt = acc[5], acc[6], acc[4]
    mp, ms = acc[7] / cnt, acc[8] / cnt
    Ip = 2 * (acc[0] - mp * sn) / cnt
    Qp = 2 * (acc[1] - mp * cs) / cnt
    Is = 2 * (acc[2] - ms * sn) / cnt
    Qs = 2 * (acc[3] - ms * cs) / cnt
    m = mech.mass
    return DemodResult(
        Delta=Delta,
        Gamma_opt=-(Qp + Qs) / (m * Om * A),
        dOmega_m=-(Ip + Is) / (2 * m * Om * A),
        Gamma_pump=-Qp / (m * Om * A),
        Gamma_stokes=-Qs / (m * Om * A),
        F_pump_quadratures=(Ip, Qp),
        F_stokes_quadratures=(Is, Qs),
        F_static=mp + ms,
        equilibrated=eq.converged,
    )


def _advance_demod(prop: Propagator, n: int, acc: np.ndarray, Om: float):
    """Run ``n`` steps accumulating force projections; acc layout:
    [Fp sin, Fp cos, Fs sin, Fs cos, count, sum sin, sum cos, sum Fp, sum Fs]."""
    # the kernel accumulates the first five entries; the remaining sums come from
    # box-averaged records (one per round trip) and closed-form sine sums
    rt = prop.round_trip_steps()
    n -= n % rt
    k0 = prop.k
    _, rec = prop.advance(n, rec_every=rt, demod=acc, demod_start=k0, demod_omega=Om, motion=MOTION_SINE)
    dt = prop.config.dt
    ks = np.arange(k0 + 1, k0 + n + 1, dtype=float)
    acc[5] = float(np.sum(np.sin(Om * ks * dt)))
    acc[6] = float(np.sum(np.cos(Om * ks * dt)))
    acc[7] = float(np.sum(rec[:, 4]) * rt)
    acc[8] = float(np.sum(rec[:, 5]) * rt)


def sweep_damping(config: CavityFiberConfig, mech: MechOscillator, detunings, P_in: float, *,
                  no_sbs: bool = False, mapper=map, **kw) -> list[DemodResult]:
    """Demodulate at each detuning; ``no_sbs`` runs the same sweep with g_B = 0."""
    cfg = config.with_(g_B=0.0) if no_sbs else config
    return list(mapper(lambda D: demodulate(cfg, mech, float(D), P_in, **kw), np.asarray(detunings, float)))


# -- stochastic oscillator -----------------------------------------------------

@dataclass(frozen=True)
class LangevinResult:
    mean_x2: float
    stderr: float
    n_realizations: int
    sim_time: float
    per_realization: np.ndarray
    lasing: bool
    freqs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    psd: np.ndarray = field(default_factory=lambda: np.zeros(0))
    x_final: np.ndarray = field(default_factory=lambda: np.zeros(0))  # last position per realization


def langevin_run(config: CavityFiberConfig, mech: MechOscillator, Delta: float, P_in: float, *,
                 noise_seed: int = 0, t_total: float = 0.6, n_realizations: int = 50,
                 burn_in: float | None = None, radiation: bool = True, seed_power_ratio: float = 1e-9,
                 record_every: int | None = None, tol: float = 1e-7) -> LangevinResult:
    """Mirror driven by the thermal Langevin force and the simulated radiation pressure.

    The oscillator is advanced at the lattice step with Mannella's
    quasi-symplectic leapfrog.  The radiation force enters relative to its
    value at the equilibrium operating point, so that the mean displacement,
    and hence the detuning, stays where it was set.  Each realization starts
    from the equilibrated cavity and a thermal initial state; ``<x^2>`` is taken
    after ``burn_in`` (default a third of the run).
    """
    if not math.isfinite(mech.Q):
        raise ValueError("Langevin run needs a finite mechanical Q")
    if burn_in is None:
        burn_in = t_total / 3
    if not 0.0 <= burn_in < t_total:
        raise ValueError("burn_in must lie in [0, t_total)")
    dt = config.dt
    if radiation:
        prop0, eq = _prepare(config, Delta, P_in, seed_power_ratio, tol, 100_000)
        rt = prop0.round_trip_steps()
        _, rec = prop0.advance(rt * 20, rec_every=rt)
        F_ref = float(np.mean(rec[:, 4] + rec[:, 5]))
        lat0 = prop0.lattice()
    xr = thermal_amplitude(mech)
    rng = np.random.default_rng(noise_seed)
    nsteps = int(round(t_total / dt))
    acc_start = int(round(burn_in / dt))
    if record_every is None:
        record_every = max(1, int((2 * math.pi / mech.Omega_m) / 40 / dt))
    out = np.empty(n_realizations)
    x_end = np.full(n_realizations, math.nan)
    lasing = False
    psds = []
    freqs = np.zeros(0)
    d1 = math.sqrt(2 * mech.Gamma_m * K_B * mech.T_bath * dt / mech.mass)
    for r in range(n_realizations):
        x0 = rng.normal(0.0, xr)
        v0 = rng.normal(0.0, xr * mech.Omega_m)
        seed = int(rng.integers(0, 2**31 - 1))
        if radiation:
            prop = Propagator(config, DriveSpec(P_in=P_in, Delta=Delta, seed_power_ratio=seed_power_ratio),
                              lattice=FieldLattice.from_stacked(lat0.stacked(), 0.0, 0))
            F0 = F_ref
        else:
            # no light: a one-element grid with the same time step suffices
            tiny = CavityFiberConfig(L_free=config.L_free, L_fib=config.L_free / config.n_refr,
                                     N_elements=1, n_refr=config.n_refr)
            prop = Propagator(tiny, DriveSpec(P_in=0.0, Delta=Delta))
            F0 = 0.0
        osc = np.array([x0, v0, 0.0, 0.0, 0.0])
        par = np.array([mech.Omega_m**2, mech.Gamma_m, mech.mass, d1, F0, acc_start, 1e3 * xr])
        status, rec = _advance_osc(prop, nsteps, osc, par, seed, record_every, radiation)
        if status == 2:
            lasing = True
            out[r] = math.inf
            continue
        out[r] = osc[3] / osc[4]
        x_end[r] = osc[0]
        xs = rec[rec[:, 0] >= burn_in, 6]
        if xs.size > 64:
            fs = 1.0 / (record_every * dt)
            freqs, p = signal.welch(xs, fs=fs, nperseg=min(4096, xs.size))
            psds.append(p)
    good = out[np.isfinite(out)]
    mean = float(np.mean(good)) if good.size else math.inf
    se = float(np.std(good, ddof=1) / math.sqrt(good.size)) if good.size > 1 else math.inf
    psd = np.mean(psds, axis=0) if psds else np.zeros(0)
    return LangevinResult(mean, se, n_realizations, t_total, out, lasing, freqs, psd, x_end)


def _advance_osc(prop: Propagator, nsteps, osc, par, seed, record_every, radiation):
    nsteps -= nsteps % record_every
    status, rec = prop.advance(nsteps, rec_every=record_every, osc=osc, osc_par=par, noise_seed=seed,
                               motion=MOTION_LANGEVIN)
    return status, rec


# -- damping maximum -------------------------------------------------------------

@dataclass(frozen=True)
class PeakScan:
    best: DemodResult
    points: tuple  # all DemodResults, sorted by detuning
    predicted_Delta: float  # single-mode argmax used to centre the scan

    @property
    def detunings(self) -> np.ndarray:
        return np.array([p.Delta for p in self.points])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.Gamma_opt for p in self.points])


def peak_damping(config: CavityFiberConfig, mech: MechOscillator, P_in: float, *, no_sbs: bool = False,
                 span: float = 0.06, n_fine: int = 13, signed: str = "max", mapper=map, **kw) -> PeakScan:
    """Largest simulated damping (or largest |Gamma_opt| with ``signed='abs'``).

    Above threshold the damping maximum sits on the threshold-crossing cusp,
    so a uniform detuning grid easily misses it.  The scan is centred on the
    single-mode argmax and covers +-``span`` kappa with ``n_fine`` points;
    the best point is then bracketed by two half-step points.
    """
    from .core import single_mode_params
    from .linear import damping_curve

    cfg = config.with_(g_B=0.0) if no_sbs else config
    p = single_mode_params(config, P_in)
    if no_sbs:
        p = p.with_(G_B=0.0)
    k = p.kappa
    D = np.linspace(-2 * k, 2 * k, 2001)
    g = damping_curve(p, mech, D)[0]
    score = np.abs(g) if signed == "abs" else g
    D0 = float(D[int(np.argmax(score))])
    grid = D0 + k * np.linspace(-span, span, n_fine)

    def run(Ds):
        return list(mapper(lambda d: demodulate(cfg, mech, float(d), P_in, **kw), Ds))

    def key(r):
        return abs(r.Gamma_opt) if signed == "abs" else r.Gamma_opt

    pts = run(grid)
    i = int(np.argmax([key(r) for r in pts]))
    h = (grid[1] - grid[0]) / 2 if n_fine > 1 else 0.01 * k
    pts += run([pts[i].Delta - h, pts[i].Delta + h])
    pts.sort(key=lambda r: r.Delta)
    best = max(pts, key=key)
    return PeakScan(best, tuple(pts), D0)
