"""Shared domain types, constants and derived cavity quantities.

All lengths are in metres, rates in rad/s unless the field name says Hz.
Detuning convention: ``Delta = omega_cav - omega_L`` so ``Delta > 0`` is a
red-detuned drive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import scipy.constants as sc

C_LIGHT = sc.c
HBAR = sc.hbar
H_PLANCK = sc.h
EPS0 = sc.epsilon_0
ETA0 = math.sqrt(sc.mu_0 / sc.epsilon_0)
K_B = sc.k

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Raised when a physical configuration violates its invariants."""


@dataclass(frozen=True)
class CavityFiberConfig:
    """Fiber Fabry-Perot cavity: free-space section, fiber section, two mirrors.

    Defaults are the 10 m cavity used throughout the room-temperature
    simulations (145 fiber elements behind a 0.1 m free-space gap).
    """

    L_free: float = 0.1
    L_fib: float = 0.1 * 145 / 1.4496
    N_elements: int = 145
    n_refr: float = 1.4496
    R1: float = 0.85
    R2: float = 1.0
    beta_mm: float = 0.70
    alpha_loss: float = 5.62e-4
    g_B: float = 1.13e-11
    lambda_p: float = 1064e-9
    mfd: float = 6.6e-6
    w_free: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.R1 <= 1.0):
            raise ConfigError(f"R1 must lie in (0, 1], got {self.R1}")
        if not (0.0 < self.R2 <= 1.0):
            raise ConfigError(f"R2 must lie in (0, 1], got {self.R2}")
        if not (0.0 < self.beta_mm <= 1.0):
            raise ConfigError(f"beta_mm must lie in (0, 1], got {self.beta_mm}")
        for name in ("L_free", "L_fib", "alpha_loss", "g_B", "mfd", "w_free"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.N_elements < 1:
            raise ConfigError("N_elements must be >= 1")
        if self.n_refr < 1.0:
            raise ConfigError("n_refr must be >= 1")
        if self.lambda_p <= 0:
            raise ConfigError("lambda_p must be positive")
        # uniform transit per element
        expected = self.L_free * self.N_elements / self.n_refr
        if self.L_free > 0 and abs(self.L_fib - expected) > 1e-4 * expected:
            raise ConfigError(
                f"L_fib={self.L_fib} inconsistent with the grid "
                f"(L_free*N/n = {expected:.6g}); use CavityFiberConfig.from_fiber_length"
            )

    @classmethod
    def from_fiber_length(cls, L_fib: float, L_free: float = 0.1, n_refr: float = 1.4496, **kw):
        """Build a config whose grid has uniform transit time per element.

        The number of fiber elements is rounded, so the realised fiber length
        is ``L_free * N / n`` rather than exactly ``L_fib``.
        """
        N = max(1, int(round(L_fib * n_refr / L_free)))
        return cls(L_free=L_free, L_fib=L_free * N / n_refr, N_elements=N, n_refr=n_refr, **kw)

    def with_(self, **changes) -> "CavityFiberConfig":
        return replace(self, **changes)

    @property
    def omega_L(self) -> float:
        return TWO_PI * C_LIGHT / self.lambda_p

    @property
    def optical_length(self) -> float:
        return self.L_free + self.n_refr * self.L_fib

    @property
    def dt(self) -> float:
        """Transit time of one grid element."""
        return self.L_free / C_LIGHT

    @property
    def dz_fib(self) -> float:
        return self.L_fib / self.N_elements

    @property
    def c_B(self) -> float:
        """Spatial Brillouin gain coefficient used in the field equations."""
        return brillouin_spatial_gain(self)

    @property
    def fiber_area(self) -> float:
        return math.pi * (self.mfd / 2) ** 2

    @property
    def free_area(self) -> float:
        return math.pi * (self.w_free / 2) ** 2

    @property
    def round_trip_amplitude(self) -> float:
        """Round-trip field amplitude factor including every loss channel.

        The mode-matching power factor ``beta_mm`` is charged once per round
        trip (on coupling into the fiber).
        """
        return math.sqrt(self.R1 * self.R2 * self.beta_mm) * math.exp(-self.alpha_loss * self.L_fib)


@dataclass(frozen=True)
class SingleModeParams:
    """Parameters of the single-mode (linearised) description."""

    kappa: float
    kappa_ex: float
    Delta: float
    G: float
    G_B: float
    a_in_flux: float
    omega_L: float

    def __post_init__(self):
        if not (0.0 < self.kappa_ex <= self.kappa * (1 + 1e-12)):
            raise ConfigError(f"need 0 < kappa_ex <= kappa (got {self.kappa_ex}, {self.kappa})")
        if self.G_B < 0:
            raise ConfigError("G_B must be >= 0")
        if self.a_in_flux < 0:
            raise ConfigError("input flux must be >= 0")

    def with_(self, **changes) -> "SingleModeParams":
        return replace(self, **changes)

    @property
    def input_power(self) -> float:
        return self.a_in_flux * HBAR * self.omega_L


@dataclass(frozen=True)
class MechOscillator:
    mass: float
    Omega_m: float
    Gamma_m: float
    T_bath: float = 300.0

    def __post_init__(self):
        if self.mass <= 0 or self.Omega_m <= 0 or self.Gamma_m < 0:
            raise ConfigError("need mass > 0, Omega_m > 0, Gamma_m >= 0")

    @classmethod
    def from_q(cls, mass: float, f_m: float, Q: float, T_bath: float = 300.0) -> "MechOscillator":
        """Build from the resonance frequency in Hz and the quality factor."""
        Om = TWO_PI * f_m
        return cls(mass=mass, Omega_m=Om, Gamma_m=Om / Q, T_bath=T_bath)

    @property
    def Q(self) -> float:
        return self.Omega_m / self.Gamma_m if self.Gamma_m > 0 else math.inf

    @property
    def x_thermal_rms(self) -> float:
        return math.sqrt(K_B * self.T_bath / (self.mass * self.Omega_m**2))

    @property
    def n_thermal(self) -> float:
        return K_B * self.T_bath / (HBAR * self.Omega_m)


@dataclass(frozen=True)
class DerivedCavity:
    fsr: float
    kappa_L: float
    finesse_L: float
    kappa_A: float
    finesse_A: float
    round_trip_time: float
    round_trip_amplitude: float = 1.0
    diverges: bool = False


def airy_finesse(r: float) -> float:
    """Airy finesse for round-trip amplitude factor ``r``; nan when the dip is
    too shallow to have a half-maximum (r below about 0.17)."""
    if r >= 1.0:
        return math.inf
    s = (1.0 - r) / (2.0 * math.sqrt(r)) if r > 0 else math.inf
    if s > 1.0:
        return math.nan
    return math.pi / (2.0 * math.asin(s))


def lorentzian_finesse(r: float) -> float:
    """Finesse from the photon lifetime: energy decays as r**2 per round trip."""
    if r >= 1.0:
        return math.inf
    return math.pi / (-math.log(r))


def derive_cavity(config: CavityFiberConfig) -> DerivedCavity:
    path = config.optical_length
    if path <= 0:
        raise ConfigError("total optical path must be positive")
    fsr = C_LIGHT / (2.0 * path)
    r = config.round_trip_amplitude
    if r >= 1.0:
        return DerivedCavity(fsr, 0.0, math.inf, 0.0, math.inf, 1.0 / fsr, r, diverges=True)
    fL = lorentzian_finesse(r)
    fA = airy_finesse(r)
    return DerivedCavity(
        fsr=fsr,
        kappa_L=fsr / (2 * fL),
        finesse_L=fL,
        kappa_A=fsr / (2 * fA),
        finesse_A=fA,
        round_trip_time=1.0 / fsr,
        round_trip_amplitude=r,
    )


def brillouin_spatial_gain(config: CavityFiberConfig) -> float:
    """c_B in (m/V**2)/m for field amplitudes normalised to <u> = n**2 eps0 |E|**2 / 2.

    With that normalisation the written coefficient ``n g_B / eta0`` amounts to
    a power gain of ``4 g_B I``; the factor 1/4 restores the standard
    ``dI_S/dz = g_B I_p I_S`` so that ``g_B`` keeps its usual meaning.
    """
    return config.n_refr * config.g_B / (4.0 * ETA0)


def brillouin_temporal_gain(config: CavityFiberConfig) -> float:
    """G_B (rad/s per photon) matching the spatial gain of the field equations."""
    if config.mfd <= 0:
        raise ConfigError("mode-field diameter must be positive")
    if config.L_fib <= 0:
        raise ConfigError("fiber length must be positive")
    n = config.n_refr
    V = config.L_fib * config.fiber_area
    return 2.0 * HBAR * config.omega_L * C_LIGHT / (V * EPS0 * n**3) * brillouin_spatial_gain(config)


def photon_flux(P: float, lam: float) -> float:
    if P < 0:
        raise ValueError("power must be nonnegative")
    return P * lam / (H_PLANCK * C_LIGHT)


def frequency_pull(config: CavityFiberConfig) -> float:
    """Cavity frequency shift per unit input-mirror displacement (rad/s/m)."""
    return config.omega_L / config.optical_length


def resonant_photons_per_flux(config: CavityFiberConfig) -> float:
    """Intracavity photon number per unit input flux on resonance, below threshold.

    Sums the energy of the forward and backward pump waves along the whole
    grid in the steady state of the lumped-loss round trip.
    """
    T1 = 1.0 - config.R1
    r = config.round_trip_amplitude
    al = config.alpha_loss
    L = config.L_fib
    n = config.n_refr
    P_f0 = T1 / (1.0 - r) ** 2  # forward power after the input mirror, per unit input
    P_fib = config.beta_mm * P_f0
    if al > 0:
        decay = (1.0 - math.exp(-al * L)) / al
    else:
        decay = L
    fib_fwd = P_fib * decay
    fib_bwd = P_fib * config.R2 * math.exp(-al * L) * decay
    P_b0 = P_fib * config.R2 * math.exp(-2 * al * L)
    energy = (fib_fwd + fib_bwd) * n / C_LIGHT + (P_f0 + P_b0) * config.L_free / C_LIGHT
    # energy per (W of input) -> photons per (photon/s of input)
    return energy


def single_mode_params(config: CavityFiberConfig, P_in: float, Delta: float = 0.0,
                       kappa: float | None = None, kappa_ex: float | None = None) -> SingleModeParams:
    """Map the spatial cavity onto the single-mode description.

    kappa follows from the round-trip loss, kappa_ex is fixed by requiring the
    resonant intracavity photon number of both descriptions to agree.
    Explicit ``kappa``/``kappa_ex`` override the derived values.
    """
    d = derive_cavity(config)
    if d.diverges and (kappa is None or kappa_ex is None):
        raise ConfigError("a lossless cavity has no single-mode linewidth")
    if kappa is None:
        kappa = -math.log(d.round_trip_amplitude) / d.round_trip_time
    if kappa_ex is None:
        kappa_ex = kappa**2 * resonant_photons_per_flux(config) / 2.0
        kappa_ex = min(kappa_ex, kappa)
    return SingleModeParams(
        kappa=kappa,
        kappa_ex=kappa_ex,
        Delta=Delta,
        G=frequency_pull(config),
        G_B=brillouin_temporal_gain(config),
        a_in_flux=photon_flux(P_in, config.lambda_p),
        omega_L=config.omega_L,
    )
