"""Parameter inference: fiber parameters from finesse-vs-power data and the
phonon-number minimisation over cavity and oscillator design variables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import (C_LIGHT, CavityFiberConfig, ConfigError, MechOscillator, SingleModeParams,
                   brillouin_temporal_gain, derive_cavity, frequency_pull, photon_flux, single_mode_params)
from .linear import chi_opt_inv, steady_state, threshold_power
from .noise import NoiseEnv, phonon_numbers
from .spectroscopy import SweepSpec, fit_airy, finesse_vs_power

FIT_NAMES = ("g_B", "alpha", "beta")
MAX_COOLING_FIBER = 1.6  # single-Stokes-mode description assumed up to this length (m)


# -- fiber parameters ----------------------------------------------------------

@dataclass(frozen=True)
class FitSpec:
    """Finesse-vs-power data and the bounded search around an initial guess."""

    data: tuple  # ((P_in W, finesse), ...)
    initial: dict = field(default_factory=lambda: {"g_B": 1.13e-11, "alpha": 5.62e-4, "beta": 0.70})
    g_B_factor: float = 2.0
    loss_frac: float = 0.25
    mode: str = "sim"  # "sim" uses swept spatial simulations, "fast" the single-mode model
    base: CavityFiberConfig = field(default_factory=CavityFiberConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    f_cut: float | None = 1e6
    maxiter: int = 50
    fd_step: float | None = None  # relative finite-difference step; mode dependent default

    def __post_init__(self):
        if len(self.data) < 5:
            raise ValueError("need at least 5 (power, finesse) points")
        if self.mode not in ("sim", "fast"):
            raise ValueError("mode must be 'sim' or 'fast'")
        if set(self.initial) != set(FIT_NAMES):
            raise ValueError(f"initial guess needs exactly {FIT_NAMES}")
        if not (self.g_B_factor > 1 and 0 < self.loss_frac < 1):
            raise ValueError("need g_B_factor > 1 and 0 < loss_frac < 1")
        lo, hi = self.bounds()
        x0 = np.array([self.initial[k] for k in FIT_NAMES])
        if np.any(x0 < lo) or np.any(x0 > hi):
            raise ValueError("bounds must contain the initial guess")

    def bounds(self):
        x0 = np.array([self.initial[k] for k in FIT_NAMES], dtype=float)
        lo = x0 * np.array([1 / self.g_B_factor, 1 - self.loss_frac, 1 - self.loss_frac])
        hi = x0 * np.array([self.g_B_factor, 1 + self.loss_frac, 1 + self.loss_frac])
        hi[2] = min(hi[2], 1.0)  # beta is a transmitted fraction
        return lo, hi


@dataclass(frozen=True)
class FitResult:
    g_B: float
    alpha: float
    beta: float
    ssr: float
    iterations: int
    evaluations: int
    converged: bool
    at_bound: tuple  # names of parameters sitting on a bound
    message: str = ""

    def as_dict(self) -> dict:
        return {"g_B": self.g_B, "alpha": self.alpha, "beta": self.beta, "ssr": self.ssr,
                "iterations": self.iterations, "evaluations": self.evaluations,
                "converged": self.converged, "at_bound": list(self.at_bound), "message": self.message}


def with_fiber_params(config: CavityFiberConfig, g_B: float, alpha: float, beta: float) -> CavityFiberConfig:
    return config.with_(g_B=g_B, alpha_loss=alpha, beta_mm=beta)


def single_mode_reflection(config: CavityFiberConfig, P_in: float, Delta):
    """Equilibrium reflected fraction (pump plus Stokes) of the single-mode model."""
    p = single_mode_params(config, P_in).with_(Delta=np.asarray(Delta, dtype=float))
    ss = steady_state(p)
    K = p.kappa + 0.5 * p.G_B * ss.B_bar
    r = 1.0 - 2 * p.kappa_ex / (K + 1j * p.Delta)
    stokes = 2 * p.kappa_ex * ss.B_bar / p.a_in_flux if p.a_in_flux > 0 else 0.0
    return np.abs(r) ** 2 + stokes


def fast_finesse_vs_power(config: CavityFiberConfig, powers, *, n_points: int = 801) -> np.ndarray:
    """Airy finesse fitted to the single-mode equilibrium spectrum at each power."""
    d = derive_cavity(config)
    T = d.round_trip_time
    R_guess = config.R2 * config.beta_mm * math.exp(-2 * config.alpha_loss * config.L_fib)
    half = 4 * math.pi / d.finesse_A
    phi = np.linspace(-half, half, n_points)
    out = []
    for P in powers:
        y = single_mode_reflection(config, P, -phi / T)
        fit = fit_airy(phi, y, config.R1, R_guess=R_guess)
        out.append(fit.finesse_A if fit.ok else math.nan)
    return np.array(out)


def forward_finesse(config: CavityFiberConfig, powers, *, mode: str = "sim", sweep: SweepSpec = SweepSpec(),
                    f_cut: float | None = 1e6, mapper=map) -> np.ndarray:
    if mode == "fast":
        return fast_finesse_vs_power(config, powers)
    pts = finesse_vs_power(config, powers, sweep, f_cut=f_cut, mapper=mapper)
    return np.array([p.finesse_A if p.ok else math.nan for p in pts])


def fit_fiber_params(spec: FitSpec, *, mapper=map, callback=None) -> FitResult:
    """L-BFGS-B minimisation of the squared finesse residuals over (g_B, alpha, beta).

    Parameters are scaled by the initial guess; forward evaluations are cached
    per parameter vector so line searches and gradient steps never repeat a
    simulation.
    """
    data = sorted((float(P), float(F)) for P, F in spec.data)
    powers = [P for P, _ in data]
    target = np.array([F for _, F in data])
    x0 = np.array([spec.initial[k] for k in FIT_NAMES], dtype=float)
    lo, hi = spec.bounds()
    cache: dict = {}

    def model(u):
        key = tuple(np.round(u, 12))
        if key not in cache:
            g, a, b = u * x0
            cfg = with_fiber_params(spec.base, g, a, b)
            cache[key] = forward_finesse(cfg, powers, mode=spec.mode, sweep=spec.sweep,
                                         f_cut=spec.f_cut, mapper=mapper)
        return cache[key]

    def ssr(u):
        r = model(u) - target
        if not np.all(np.isfinite(r)):
            return 1e6
        return float(np.sum(r**2))

    eps = spec.fd_step if spec.fd_step is not None else (1e-6 if spec.mode == "fast" else 1e-2)
    sol = optimize.minimize(ssr, np.ones(3), method="L-BFGS-B", bounds=list(zip(lo / x0, hi / x0)),
                            options={"maxiter": spec.maxiter, "eps": eps, "ftol": 1e-12, "gtol": 1e-9},
                            callback=callback)
    u = sol.x
    tol = 1e-6
    at = tuple(n for n, ui, l, h in zip(FIT_NAMES, u, lo / x0, hi / x0) if ui - l < tol or h - ui < tol)
    g, a, b = u * x0
    return FitResult(float(g), float(a), float(b), float(sol.fun), int(sol.nit), len(cache),
                     bool(sol.success), at, str(sol.message))


def synthetic_finesse_data(config: CavityFiberConfig, powers, *, noise: float = 0.01, seed: int = 0,
                           mode: str = "sim", sweep: SweepSpec = SweepSpec(), f_cut: float | None = 1e6,
                           mapper=map):
    """Forward-model finesse with multiplicative Gaussian noise of relative size ``noise``."""
    F = forward_finesse(config, powers, mode=mode, sweep=sweep, f_cut=f_cut, mapper=mapper)
    rng = np.random.default_rng(seed)
    return tuple(zip([float(P) for P in powers], (F * (1 + noise * rng.standard_normal(F.size))).tolist()))


# -- phonon-number minimisation ------------------------------------------------

@dataclass(frozen=True)
class CoolingSearchSpec:
    """Design search at fixed fiber length: variables (power_ratio, finesse, f_m)."""

    L_fib: float = 1.6
    mass: float = 1e-12
    Q: float = 1e9
    T: float = 77.0
    g_B: float = 6.71e-12
    n_refr: float = 1.4496
    lambda_p: float = 1064e-9
    mfd: float = 6.6e-6
    kappa_ex_fraction: float = 0.5
    power_ratio: tuple = (0.5, 10.0)
    finesse: tuple = (20.0, 150.0)
    f_m: tuple = (1e3, 5e5)  # Hz
    n_scan: int = 401
    scan_span: float = 2.0  # Gamma_opt scanned over |Delta| <= scan_span * kappa
    n_fine: int = 100
    fine_span: float = 0.1
    q_min: float = 100.0
    thermal_cap: float = 100.0
    penalty: float = 1e6
    thermoptic: bool = True
    gain_scale: float = 1.0  # scales the Brillouin coupling; the threshold reference stays nominal
    seed: int = 1
    popsize: int = 15
    maxiter: int = 200
    tol: float = 1e-3
    mutation: float = 0.8
    recombination: float = 0.7

    def __post_init__(self):
        if not 0 < self.L_fib <= MAX_COOLING_FIBER:
            raise ConfigError(f"L_fib must lie in (0, {MAX_COOLING_FIBER}] m")
        if not (20.0 <= self.finesse[0] < self.finesse[1] <= 150.0):
            raise ConfigError("finesse bounds must lie within [20, 150]")
        if not 0 < self.kappa_ex_fraction <= 1:
            raise ConfigError("kappa_ex_fraction must lie in (0, 1]")
        for name in ("power_ratio", "f_m"):
            a, b = getattr(self, name)
            if not 0 < a < b:
                raise ConfigError(f"{name} bounds must satisfy 0 < lo < hi")

    def bounds(self):
        return [self.power_ratio, self.finesse, self.f_m]

    def mech(self, f_m: float) -> MechOscillator:
        return MechOscillator.from_q(self.mass, f_m, self.Q, self.T)

    def env(self) -> NoiseEnv:
        return NoiseEnv.cryo77(self.L_fib, lam=self.lambda_p) if self.T == 77.0 else \
            NoiseEnv(q=2.8e-6, kappa_t=0.52, D=2.53e-6, T=self.T, L=self.L_fib, lam=self.lambda_p)

    def params(self, power_ratio: float, finesse: float) -> SingleModeParams:
        """Single-mode parameters of a pure fiber cavity of the given finesse."""
        cfg = CavityFiberConfig(L_free=0.0, L_fib=self.L_fib, N_elements=1, n_refr=self.n_refr,
                                g_B=self.g_B, lambda_p=self.lambda_p, mfd=self.mfd)
        fsr = C_LIGHT / (2 * self.n_refr * self.L_fib)
        kappa = math.pi * fsr / finesse
        p = SingleModeParams(kappa=kappa, kappa_ex=self.kappa_ex_fraction * kappa, Delta=0.0,
                             G=frequency_pull(cfg), G_B=brillouin_temporal_gain(cfg),
                             a_in_flux=1.0, omega_L=cfg.omega_L)
        P = power_ratio * threshold_power(p, 0.0)
        return p.with_(a_in_flux=photon_flux(P, self.lambda_p), G_B=p.G_B * self.gain_scale)


@dataclass(frozen=True)
class CoolingPoint:
    n_f: float
    Delta: float
    kappa: float
    Gamma_opt: float
    Q_eff: float
    P_in: float
    contributions: dict
    penalised: bool
    reason: str = ""


def evaluate_design(spec: CoolingSearchSpec, power_ratio: float, finesse: float, f_m: float,
                    env: NoiseEnv | None = None) -> CoolingPoint:
    """Best occupancy near the damping maximum for one design point."""
    p = spec.params(power_ratio, finesse)
    mech = spec.mech(f_m)
    env = spec.env() if env is None else env
    k = p.kappa
    D = np.linspace(-spec.scan_span * k, spec.scan_span * k, spec.n_scan)
    gam = _gamma(p, mech, D)
    i = int(np.argmax(gam))
    gmax = float(gam[i])
    bad = CoolingPoint(spec.penalty, float(D[i]), k, gmax, 0.0, p.input_power, {}, True)
    if not gmax > 0:
        return _replace_reason(bad, "no positive optical damping")
    if mech.n_thermal * mech.Gamma_m / (mech.Gamma_m + gmax) > spec.thermal_cap:
        return _replace_reason(bad, "thermal estimate above cap")
    Df = np.linspace(D[i] - spec.fine_span * k, D[i] + spec.fine_span * k, spec.n_fine)
    pf = p.with_(Delta=Df)
    ss = steady_state(pf)
    n, Om, Qe, Ge, th, pa, pb, to, valid = phonon_numbers(pf, ss, mech, env, q_min=spec.q_min,
                                                          thermoptic=spec.thermoptic)
    gf = Ge - mech.Gamma_m
    ok = valid & (gf > 0) & np.isfinite(n)
    if not np.any(ok):
        return _replace_reason(bad, "no stable point with Q_eff above the cut")
    j = int(np.argmin(np.where(ok, n, np.inf)))
    parts = {"thermal": float(th[j]), "pump_shot": float(pa[j]), "stokes_shot": float(pb[j]),
             "thermoptic": float(to[j])}
    return CoolingPoint(float(n[j]), float(Df[j]), k, float(gf[j]), float(Qe[j]), p.input_power, parts, False)


def _replace_reason(pt: CoolingPoint, reason: str) -> CoolingPoint:
    return CoolingPoint(pt.n_f, pt.Delta, pt.kappa, pt.Gamma_opt, pt.Q_eff, pt.P_in, pt.contributions, True, reason)


def _gamma(p: SingleModeParams, mech: MechOscillator, D):
    pp = p.with_(Delta=D)
    chi = chi_opt_inv(pp, steady_state(pp), mech.Omega_m)
    return -np.imag(chi) / (mech.mass * mech.Omega_m)


@dataclass(frozen=True)
class CoolingResult:
    L_fib: float
    power_ratio: float
    finesse: float
    f_m: float
    n_f: float
    Delta_opt: float
    kappa: float
    Gamma_opt: float
    Q_eff: float
    P_in: float
    contributions: dict
    found: bool
    iterations: int
    evaluations: int
    seed: int
    message: str = ""

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["contributions"] = dict(self.contributions)
        return d


class _Objective:
    # picklable objective so the population can be evaluated by a process pool
    def __init__(self, spec):
        self.spec = spec
        self.env = spec.env()

    def __call__(self, x):
        return evaluate_design(self.spec, float(x[0]), float(x[1]), float(x[2]), self.env).n_f


def minimize_phonons(spec: CoolingSearchSpec, *, workers=1) -> CoolingResult:
    """Differential evolution (rand/1/bin) over (power_ratio, finesse, f_m)."""
    obj = _Objective(spec)
    sol = optimize.differential_evolution(
        obj, spec.bounds(), strategy="rand1bin", popsize=spec.popsize, mutation=spec.mutation,
        recombination=spec.recombination, seed=spec.seed, maxiter=spec.maxiter, tol=spec.tol,
        polish=False, init="latinhypercube", updating="deferred" if workers != 1 else "immediate",
        workers=workers)
    ratio, fin, fm = (float(v) for v in sol.x)
    pt = evaluate_design(spec, ratio, fin, fm)
    found = not pt.penalised
    msg = str(sol.message) if found else "no cooling region found"
    return CoolingResult(spec.L_fib, ratio, fin, fm, pt.n_f, pt.Delta, pt.kappa, pt.Gamma_opt, pt.Q_eff,
                         pt.P_in, pt.contributions, found, int(sol.nit), int(sol.nfev), spec.seed, msg)
