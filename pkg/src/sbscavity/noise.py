"""Noise budget of the cooled oscillator: thermo-optic PSD, optical noise
transduction, displacement spectrum and final phonon occupancy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import C_LIGHT, HBAR, K_B, MechOscillator, SingleModeParams
from .linear import SteadyState, chi_opt_inv, response_kernels, stokes_factor


@dataclass(frozen=True)
class NoiseEnv:
    """Thermo-optic noise parameters of the fiber."""

    q: float = 6.7e-6
    kappa_t: float = 1.35
    D: float = 8.2e-7
    w0: float = 3.3e-6
    a_f: float = 62.5e-6
    T: float = 300.0
    L: float = 10.0
    lam: float = 1064e-9

    def __post_init__(self):
        for name in ("q", "kappa_t", "D", "w0", "a_f", "T", "L", "lam"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.k_max > self.k_min:
            raise ValueError("need mode-field radius smaller than fiber radius")

    @property
    def k_max(self) -> float:
        return 2.0 / self.w0

    @property
    def k_min(self) -> float:
        return 2.0 / self.a_f

    @classmethod
    def room(cls, L: float, **kw) -> "NoiseEnv":
        return cls(q=6.7e-6, kappa_t=1.35, D=8.2e-7, T=300.0, L=L, **kw)

    @classmethod
    def cryo77(cls, L: float, **kw) -> "NoiseEnv":
        return cls(q=2.8e-6, kappa_t=0.52, D=2.53e-6, T=77.0, L=L, **kw)


def thermoptic_psd(env: NoiseEnv, omega):
    """Frequency-noise PSD of the fiber, (rad/s)^2/Hz."""
    w = np.abs(np.asarray(omega, dtype=float))
    u = (w / env.D) ** 2
    F = np.log((env.k_max**4 + u) / (env.k_min**4 + u))
    pref = math.pi * C_LIGHT**2 * K_B * env.T**2 * env.q**2 / (4 * env.kappa_t * env.lam**2 * env.L)
    return pref * F


@dataclass(frozen=True)
class TransferFunctions:
    chi_a: np.ndarray
    chi_b: np.ndarray
    chi_phidot: np.ndarray


def transfer_functions(params: SingleModeParams, steady: SteadyState, omega,
                       noise_port: str = "total") -> TransferFunctions:
    """Force produced per unit of a_in[w], b_in[w] and phidot[w].

    ``noise_port`` selects the vacuum coupling rate: "total" uses sqrt(2 kappa),
    "input" uses sqrt(2 kappa_ex).
    """
    p = params
    k = response_kernels(p, steady, omega)
    w = np.asarray(omega, dtype=float)
    rate = p.kappa if noise_port == "total" else p.kappa_ex
    sq = np.sqrt(2 * rate)
    a = steady.a_bar
    ac = np.conj(a)
    n = np.abs(a) ** 2
    G = p.G
    S = stokes_factor(p, steady, omega)
    chi_a = HBAR * G * sq * S * (ac * k.f_conj_neg - a * k.g_conj_neg) / k.D
    chi_phi = 1j * HBAR * G * S * (n * k.f - n * k.f_conj_neg - ac**2 * k.g + a**2 * k.g_conj_neg) / k.D
    # Stokes vacuum enters through b_bar; zero below threshold
    b = steady.b_bar * np.ones_like(w)
    mix = (n * (k.f + k.f_conj_neg) - ac**2 * k.g - a**2 * k.g_conj_neg) / k.D
    w_safe = np.where(w == 0, 1.0, w)
    chi_b = np.where(b > 0, 1j * HBAR * G * sq * b / w_safe * (1.0 - 0.5 * p.G_B * S * mix), 0.0)
    return TransferFunctions(chi_a=chi_a, chi_b=chi_b, chi_phidot=chi_phi)


def mech_inv_susceptibility(mech: MechOscillator, omega):
    w = np.asarray(omega, dtype=float)
    return mech.mass * (mech.Omega_m**2 - w**2 - 1j * mech.Gamma_m * w)


def force_noise_psd(params, steady, mech, env, omega, *, thermal=True, pump=True,
                    stokes=True, thermoptic=True, noise_port="total"):
    """Force PSD components (thermal, pump shot, Stokes shot, thermo-optic)."""
    w = np.asarray(omega, dtype=float)
    tf = transfer_functions(params, steady, w, noise_port=noise_port)
    zero = np.zeros(w.shape)
    th = np.full(w.shape, 2 * K_B * mech.T_bath * mech.mass * mech.Gamma_m) if thermal else zero
    pa = np.abs(tf.chi_a) ** 2 if pump else zero
    pb = np.abs(tf.chi_b) ** 2 if stokes else zero
    to = thermoptic_psd(env, w) * np.abs(tf.chi_phidot) ** 2 if thermoptic else zero
    return th, pa, pb, to


def displacement_psd(params, steady, mech, env, omega, **kw):
    """Position PSD (m^2/Hz, two-sided, d omega / 2 pi normalisation)."""
    w = np.asarray(omega, dtype=float)
    chi_eff_inv = mech_inv_susceptibility(mech, w) + chi_opt_inv(params, steady, w)
    parts = force_noise_psd(params, steady, mech, env, w, **kw)
    return sum(parts) / np.abs(chi_eff_inv) ** 2


@dataclass(frozen=True)
class PhononResult:
    n_f: float
    Omega_m_eff: float
    Q_eff: float
    Gamma_eff: float
    thermal: float
    pump_shot: float
    stokes_shot: float
    thermoptic: float
    valid: bool
    reason: str = ""

    @property
    def contributions(self) -> dict:
        return {"thermal": self.thermal, "pump_shot": self.pump_shot,
                "stokes_shot": self.stokes_shot, "thermoptic": self.thermoptic}


def phonon_number(params, steady, mech, env, *, q_min: float = 100.0, noise_port="total",
                  thermoptic: bool = True) -> PhononResult:
    """Occupancy from the Lorentzian (high-Q) evaluation of the integrated S_xx."""
    r = phonon_numbers(params, steady, mech, env, q_min=q_min, noise_port=noise_port, thermoptic=thermoptic)
    n, Om, Q, Ge, th, pa, pb, to, valid = (np.asarray(v).item() for v in r)
    if not Om > 0 or not Ge > 0:
        return PhononResult(math.inf, Om, 0.0, Ge, math.inf, math.inf, math.inf, math.inf, False, "unstable")
    return PhononResult(n, Om, Q, Ge, th, pa, pb, to, bool(valid),
                        "" if valid else f"Q_eff={Q:.3g} <= {q_min:g}")


def phonon_numbers(params, steady, mech, env, *, q_min: float = 100.0, noise_port="total",
                   thermoptic: bool = True):
    """Vectorised Lorentzian occupancy over an array of detunings in ``params``.

    Returns arrays (n_f, Omega_eff, Q_eff, Gamma_eff, thermal, pump, stokes,
    thermoptic, valid); unstable points get n_f = inf and valid = False.
    """
    m = mech.mass
    chi = np.asarray(chi_opt_inv(params, steady, mech.Omega_m))
    Gamma_eff = mech.Gamma_m - chi.imag / (m * mech.Omega_m)
    Om2 = mech.Omega_m**2 + chi.real / m
    stable = (Om2 > 0) & (Gamma_eff > 0)
    Om = np.sqrt(np.where(stable, Om2, mech.Omega_m**2))
    Ge = np.where(stable, Gamma_eff, 1.0)
    # int |chi_eff|^2 dw/2pi over one peak = 1 / (4 m^2 Om^2 Gamma_eff)
    scale = (m * Om / HBAR) / (4 * m**2 * Om**2 * Ge)
    parts = [scale * (a + b) for a, b in zip(
        force_noise_psd(params, steady, mech, env, Om, noise_port=noise_port, thermoptic=thermoptic),
        force_noise_psd(params, steady, mech, env, -Om, noise_port=noise_port, thermoptic=thermoptic))]
    inf = np.full(np.shape(Om), math.inf)
    parts = [np.where(stable, c, inf) for c in parts]
    n = sum(parts)
    Q_eff = np.where(stable, Om / Ge, 0.0)
    Om_out = np.where(stable, Om, np.sqrt(np.maximum(Om2, 0.0)))
    return (n, Om_out, Q_eff, Gamma_eff, *parts, stable & (Q_eff > q_min))


def phonon_number_direct(params, steady, mech, env, *, n_nodes: int = 4001, noise_port="total",
                         thermoptic: bool = True) -> float:
    """Occupancy by numerical integration of S_xx over the whole frequency axis.

    Each half-axis is mapped through omega = Om + (Gamma/2) tan(theta) so the
    Lorentzian peak and its tails are resolved with a uniform theta grid.
    """
    chi = chi_opt_inv(params, steady, mech.Omega_m)
    m = mech.mass
    Om = math.sqrt(mech.Omega_m**2 + chi.real / m)
    half = 0.5 * (mech.Gamma_m - chi.imag / (m * mech.Omega_m))

    def sxx(w):
        return displacement_psd(params, steady, mech, env, w, noise_port=noise_port,
                                thermoptic=thermoptic)

    eps = 1e-9
    th = np.linspace(-math.atan(Om / half) + eps, math.pi / 2 - eps, n_nodes)
    w = Om + half * np.tan(th)
    jac = half / np.cos(th) ** 2
    pos = integrate.simpson(sxx(w) * jac, x=th)
    neg = integrate.simpson(sxx(-w) * jac, x=th)
    return (m * Om / HBAR) * (pos + neg) / (2 * math.pi)
