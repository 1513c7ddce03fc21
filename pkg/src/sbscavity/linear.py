"""Single-mode theory: steady state, threshold, optomechanical susceptibility.

Fourier convention ``x(t) = int x[w] exp(-i w t) dw/2pi`` so ``d/dt -> -i w``.
The pump obeys ``da/dt = -(kappa + i(Delta - G x))a + sqrt(2 kappa_ex) a_in - G_B B a / 2``
with ``x`` the input-mirror displacement that lengthens the cavity; the
radiation force on ``x`` is ``hbar G (|a|^2 + B)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HBAR, MechOscillator, SingleModeParams


class PoleError(ValueError):
    """Evaluation at the omega = 0 pole of the Stokes-intensity response."""


@dataclass(frozen=True)
class SteadyState:
    """Mean fields; entries are arrays when the detuning is an array."""

    a_bar: complex | np.ndarray
    B_bar: float | np.ndarray
    above_threshold: bool | np.ndarray

    @property
    def n_pump(self):
        return np.abs(self.a_bar) ** 2

    @property
    def b_bar(self):
        # Stokes phase is free; real positive by choice
        return np.sqrt(self.B_bar)


def threshold_discriminant(params: SingleModeParams):
    p = params
    return p.G_B * p.a_in_flux * p.kappa_ex / p.kappa - np.asarray(p.Delta) ** 2


def steady_state(params: SingleModeParams) -> SteadyState:
    """Mean pump amplitude and Stokes intensity; vectorised over ``params.Delta``."""
    p = params
    X = threshold_discriminant(p)
    root = np.sqrt(np.maximum(X, 0.0))
    above = (p.G_B > 0) & (X > 0) & (root > p.kappa)
    B = np.where(above, 2.0 / p.G_B * (root - p.kappa) if p.G_B > 0 else 0.0, 0.0)
    a = np.sqrt(2 * p.kappa_ex * p.a_in_flux) / (p.kappa + 1j * np.asarray(p.Delta) + 0.5 * p.G_B * B)
    if np.ndim(a) == 0:
        return SteadyState(complex(a), float(B), bool(above))
    return SteadyState(a, B, above)


def threshold_power(params: SingleModeParams, Delta: float | None = None) -> float:
    """Smallest input power (W) that puts the Stokes field above threshold."""
    p = params
    if p.G_B <= 0:
        raise ValueError("threshold requires G_B > 0")
    D = p.Delta if Delta is None else Delta
    flux = p.kappa * (p.kappa**2 + D**2) / (p.G_B * p.kappa_ex)
    return flux * HBAR * p.omega_L


def params_at_power(params: SingleModeParams, P_in: float) -> SingleModeParams:
    return params.with_(a_in_flux=P_in / (HBAR * params.omega_L))


@dataclass(frozen=True)
class ResponseKernels:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    f_conj_neg: np.ndarray  # f*(-w)
    g_conj_neg: np.ndarray  # g*(-w)
    D: np.ndarray  # f(w) f*(-w) h(w)


def _omega_array(omega, steady: SteadyState):
    w = np.asarray(omega, dtype=float)
    if np.any(np.asarray(steady.B_bar) > 0) and np.any(w == 0):
        raise PoleError("Stokes response has a pole at omega = 0 above threshold")
    return w


def _over_w(num, w):
    """num / w, taking 0 wherever num vanishes (below threshold)."""
    w_safe = np.where(w == 0, 1.0, w)
    return np.where(num == 0, 0.0, num / w_safe)


def response_kernels(params: SingleModeParams, steady: SteadyState, omega) -> ResponseKernels:
    p = params
    w = _omega_array(omega, steady)
    B = steady.B_bar
    K = p.kappa + 0.5 * p.G_B * B
    a = steady.a_bar
    q = _over_w(p.G_B**2 * B * np.abs(a) ** 2 / 2, w)
    gw = 1j * _over_w(p.G_B**2 * B * a**2 / 2, w)
    g_cn = 1j * _over_w(p.G_B**2 * B * np.conj(a) ** 2 / 2, w)
    D = np.asarray(p.Delta)
    f = K + 1j * (D - w + q)
    f_cn = K - 1j * (D + w - q)
    ff = f * f_cn
    h = 1.0 - gw * g_cn / ff
    return ResponseKernels(f=f, g=gw, h=h, f_conj_neg=f_cn, g_conj_neg=g_cn, D=ff * h)


def stokes_factor(params: SingleModeParams, steady: SteadyState, omega):
    """1 + i G_B B / w: converts the pump-quadrature response into total force."""
    w = _omega_array(omega, steady)
    return 1.0 + 1j * _over_w(params.G_B * steady.B_bar * np.ones_like(w), w)


def delta_a_response(params: SingleModeParams, steady: SteadyState, omega):
    """(delta a[w] / x[w], delta a*[w] / x[w])."""
    k = response_kernels(params, steady, omega)
    a = steady.a_bar
    G = params.G
    da = (1j * G * a * k.f_conj_neg + 1j * G * np.conj(a) * k.g) / k.D
    da_c = (-1j * G * np.conj(a) * k.f - 1j * G * a * k.g_conj_neg) / k.D
    return da, da_c


def chi_opt_inv(params: SingleModeParams, steady: SteadyState, omega):
    """Optomechanical contribution to the inverse susceptibility (N/m)."""
    da, da_c = delta_a_response(params, steady, omega)
    a = steady.a_bar
    X = np.conj(a) * da + a * da_c
    out = -HBAR * params.G * stokes_factor(params, steady, omega) * X
    return out if np.ndim(out) else complex(out)


def two_sideband_damping(params: SingleModeParams, mech: MechOscillator, n_pump: float | None = None):
    """Textbook optical damping and spring shift of a bare cavity (no Stokes field).

    Independent closed form used as the reference for the full machinery.
    """
    p = params
    if n_pump is None:
        n_pump = 2 * p.kappa_ex * p.a_in_flux / (p.kappa**2 + p.Delta**2)
    Om = mech.Omega_m
    pref = HBAR * p.G**2 * n_pump / (mech.mass * Om)
    k = p.kappa
    gamma = pref * (k / (k**2 + (p.Delta - Om) ** 2) - k / (k**2 + (p.Delta + Om) ** 2))
    shift = -0.5 * pref * ((p.Delta - Om) / (k**2 + (p.Delta - Om) ** 2)
                           + (p.Delta + Om) / (k**2 + (p.Delta + Om) ** 2))
    return gamma, shift


@dataclass(frozen=True)
class DampingShift:
    Gamma_opt: float
    dOmega_m: float


def damping_and_shift(params: SingleModeParams, mech: MechOscillator,
                      steady: SteadyState | None = None) -> DampingShift:
    """Weak-coupling damping and spring shift at the bare Omega_m (arrays for array Delta)."""
    if steady is None:
        steady = steady_state(params)
    chi = chi_opt_inv(params, steady, mech.Omega_m)
    g = -np.imag(chi) / (mech.mass * mech.Omega_m)
    s = np.real(chi) / (2 * mech.mass * mech.Omega_m)
    if np.ndim(g) == 0:
        return DampingShift(float(g), float(s))
    return DampingShift(g, s)


def damping_curve(params: SingleModeParams, mech: MechOscillator, detunings):
    """(Gamma_opt, dOmega_m, B_bar, |a|^2) over a detuning grid, shape (4, N)."""
    D = np.asarray(detunings, dtype=float)
    p = params.with_(Delta=D)
    ss = steady_state(p)
    ds = damping_and_shift(p, mech, ss)
    return np.vstack([ds.Gamma_opt, ds.dOmega_m, ss.B_bar, ss.n_pump])
