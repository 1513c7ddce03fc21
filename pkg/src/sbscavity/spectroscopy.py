"""Cavity spectra in reflection: swept and equilibrium traces, detector
filtering, Airy fits and finesse versus input power."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core import CavityFiberConfig, airy_finesse, derive_cavity
from .propagator import DriveSpec, Propagator, run_to_equilibrium


@dataclass(frozen=True)
class SweepSpec:
    span_fsr: float = 2.5
    duration: float = 1e-3
    direction: int = 1
    start_offset_fsr: float = 0.45  # start detuning, away from any resonance
    samples_per_linewidth: int = 200

    def __post_init__(self):
        if self.span_fsr <= 0 or self.duration <= 0:
            raise ValueError("span_fsr and duration must be positive")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if abs(self.start_offset_fsr) % 1.0 < 0.4 or abs(self.start_offset_fsr) % 1.0 > 0.6:
            raise ValueError("sweep must start at least 0.4 FSR away from resonance")


@dataclass(frozen=True)
class SweepTrace:
    t: np.ndarray
    Delta: np.ndarray  # rad/s, laser detuning at each sample
    P_refl: np.ndarray
    P_in: float
    fsr: float


@dataclass(frozen=True)
class FinessePoint:
    P_in: float
    finesse_A: float
    R_eff: float
    fit_residual: float
    ok: bool = True


@dataclass(frozen=True)
class AiryFit:
    R_eff: float
    finesse_A: float
    residual: float
    center: float
    scale: float
    offset: float
    ok: bool
    message: str = ""


def dynamic_sweep(config: CavityFiberConfig, P_in: float, sweep: SweepSpec = SweepSpec(), *,
                  seed_power_ratio: float = 1e-9, equilibrate_round_trips: int = 2000) -> SweepTrace:
    """Reflected power while the detuning is ramped linearly through ``span_fsr`` FSRs.

    The cavity is first equilibrated at the start detuning.  Samples are box
    averages over a few steps so that no content above the sampling Nyquist
    frequency aliases into the trace.
    """
    d = derive_cavity(config)
    fsr_rad = 2 * math.pi * d.fsr
    D0 = sweep.direction * sweep.start_offset_fsr * fsr_rad
    rate = sweep.direction * sweep.span_fsr * fsr_rad / sweep.duration
    drive = DriveSpec(P_in=P_in, Delta=D0, seed_power_ratio=seed_power_ratio)
    prop = Propagator(config, drive)
    prop.advance(prop.round_trip_steps() * equilibrate_round_trips)
    t0 = prop.t
    prop.set_drive(DriveSpec(P_in=P_in, Delta=D0, Delta_rate=rate, t_ref=t0,
                             seed_power_ratio=seed_power_ratio))
    nsteps = int(round(sweep.duration / config.dt))
    # sample time chosen from the linewidth crossing time
    lw_time = (fsr_rad / max(d.finesse_A, 1.0)) / abs(rate) if math.isfinite(d.finesse_A) else sweep.duration
    every = max(1, int(lw_time / sweep.samples_per_linewidth / config.dt))
    every = min(every, prop.round_trip_steps())
    nsteps -= nsteps % every
    _, rec = prop.advance(nsteps, rec_every=every)
    t = rec[:, 0]
    return SweepTrace(t=t, Delta=D0 + rate * (t - t0), P_refl=rec[:, 1], P_in=P_in, fsr=d.fsr)


def lowpass(series, f_cut: float = 1e6, dt: float | None = None, *, t=None):
    """First-order low-pass (``1 / (1 + i f / f_cut)``) applied in the frequency domain.

    The series is padded at both ends with its edge values so the circular
    convolution does not wrap the end of the trace onto its start.
    """
    y = np.asarray(series, dtype=float)
    if dt is None:
        if t is None:
            raise ValueError("need dt or t")
        dt = float(np.mean(np.diff(t)))
    if not math.isfinite(f_cut):
        return y.copy()
    if f_cut <= 0:
        raise ValueError("f_cut must be positive")
    tau_samples = 1.0 / (2 * math.pi * f_cut * dt)
    pad = int(min(max(20 * tau_samples, 16), 4 * y.size))
    yp = np.concatenate([np.full(pad, y[0]), y, np.full(pad, y[-1])])
    f = np.fft.rfftfreq(yp.size, dt)
    out = np.fft.irfft(np.fft.rfft(yp) / (1.0 + 1j * f / f_cut), n=yp.size)
    return out[pad:pad + y.size]


def airy_reflection_model(phi, R1: float, R_eff: float):
    """Reflected power fraction versus round-trip phase for input reflectance R1
    and effective back reflectance R_eff (all losses lumped)."""
    a = math.sqrt(R1)
    b = math.sqrt(R_eff)
    e = np.exp(1j * phi)
    return np.abs((-a + b * e) / (1.0 - a * b * e)) ** 2


def _dip_window(phi, y, half_width):
    """Indices within ``half_width`` (rad of phase) of the deepest point."""
    i = int(np.argmin(y))
    sel = np.abs(phi - phi[i]) <= half_width
    return sel, phi[i]


def fit_airy(phi, y, R1: float, *, R_guess: float | None = None, window_linewidths: float = 1.5) -> AiryFit:
    """Least-squares Airy fit of a reflection trace against round-trip phase.

    Free parameters: R_eff, the dip centre and a vertical scale and offset.
    Only points within ``window_linewidths`` linewidths of the deepest dip are
    used.  The finesse follows from the round-trip amplitude sqrt(R1 R_eff).
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    if R_guess is None:
        R_guess = 0.5
    r0 = math.sqrt(R1 * R_guess)
    f0 = airy_finesse(r0)
    fwhm = 2 * math.pi / f0 if math.isfinite(f0) else math.pi
    sel, c0 = _dip_window(phi, y, window_linewidths * fwhm)
    # refine the window with the guessed linewidth once the dip is located
    x = phi[sel]
    yy = y[sel]
    if x.size < 8:
        return AiryFit(math.nan, math.nan, math.nan, c0, math.nan, math.nan, False, "too few points in window")
    top = float(np.max(y))
    scale0 = top / max(float(airy_reflection_model(math.pi, R1, R_guess)), 1e-12)

    def resid(p):
        R, c, s, o = p
        return s * airy_reflection_model(x - c, R1, R) + o - yy

    lo = [1e-6, c0 - fwhm, 0.0, -np.inf]
    hi = [1.0 - 1e-9, c0 + fwhm, np.inf, np.inf]
    try:
        sol = optimize.least_squares(resid, [R_guess, c0, scale0, 0.0], bounds=(lo, hi),
                                     x_scale=[0.1, fwhm, scale0, scale0 * 0.1 + 1e-30],
                                     xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=300)
    except ValueError as e:
        return AiryFit(math.nan, math.nan, math.nan, c0, math.nan, math.nan, False, str(e))
    R, c, s, o = sol.x
    res = float(np.sum(sol.fun**2) / x.size)
    ok = bool(sol.success and 0.0 < R < 1.0 - 1e-8)
    # second pass with the fitted linewidth for a consistent window
    if ok and math.isfinite(airy_finesse(math.sqrt(R1 * R))):
        fwhm = 2 * math.pi / airy_finesse(math.sqrt(R1 * R))
        sel = np.abs(phi - c) <= window_linewidths * fwhm
        if np.count_nonzero(sel) >= 8:
            x = phi[sel]
            yy = y[sel]
            sol = optimize.least_squares(resid, sol.x, bounds=(lo, hi),
                                         x_scale=[0.1, fwhm, s, s * 0.1 + 1e-30],
                                         xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=300)
            R, c, s, o = sol.x
            res = float(np.sum(sol.fun**2) / x.size)
            ok = bool(sol.success and 0.0 < R < 1.0 - 1e-8)
    fin = airy_finesse(math.sqrt(R1 * R)) if ok else math.nan
    ok = ok and math.isfinite(fin)
    return AiryFit(float(R), float(fin), res, float(c), float(s), float(o), ok,
                   "" if ok else f"fit failed: {sol.message}")


def fit_trace(trace: SweepTrace, R1: float, *, f_cut: float | None = 1e6, **kw) -> AiryFit:
    """Filter a swept trace and fit the Airy reflection dip (phase = -Delta T_rt)."""
    y = trace.P_refl
    if f_cut is not None:
        y = lowpass(y, f_cut, t=trace.t)
    phi = -trace.Delta / trace.fsr
    # fold the phase so one dip sits near the middle of the window
    return fit_airy(phi, y / trace.P_in if trace.P_in > 0 else y, R1, **kw)


def finesse_vs_power(config: CavityFiberConfig, powers, sweep: SweepSpec = SweepSpec(), *,
                     f_cut: float | None = 1e6, mapper=map) -> list[FinessePoint]:
    """Finesse extracted from a swept spectrum at each input power."""
    powers = list(powers)
    if any(b < a for a, b in zip(powers, powers[1:])):
        raise ValueError("powers must be sorted ascending")
    R_guess = config.R2 * config.beta_mm * math.exp(-2 * config.alpha_loss * config.L_fib)

    def one(P):
        tr = dynamic_sweep(config, P, sweep)
        fit = fit_trace(tr, config.R1, f_cut=f_cut, R_guess=R_guess)
        return FinessePoint(P, fit.finesse_A, fit.R_eff, fit.residual, fit.ok)

    return list(mapper(one, powers))


def equilibrium_spectrum(config: CavityFiberConfig, P_in: float, detunings, *, tol: float = 1e-7,
                         max_round_trips: int = 50_000, window: int = 4, seed_power_ratio: float = 1e-9,
                         mapper=map):
    """Equilibrium reflected power (pump plus Stokes, W) at each detuning.

    Each point starts from an empty cavity.  Returns (P_refl, converged) arrays.
    """
    detunings = np.asarray(detunings, dtype=float)

    def one(D):
        r = run_to_equilibrium(config, DriveSpec(P_in=P_in, Delta=float(D), seed_power_ratio=seed_power_ratio),
                               tol=tol, max_round_trips=max_round_trips, window=window)
        return r.P_reflected, r.converged

    out = list(mapper(one, detunings))
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])
