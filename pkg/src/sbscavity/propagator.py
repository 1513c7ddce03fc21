"""Time-domain propagation of forward/backward pump and Stokes fields.

Grid: node 0 sits at the input mirror, element 0 (nodes 0-1) is the free-space
gap, elements 1..N (nodes j to j+1) are fiber and node N+1 is the far mirror.
All waves move one node per step of ``dt = L_free / c``.  Fields at node 0 are
in free-space normalisation, fiber nodes in fiber normalisation; crossing the
interface rescales the amplitude so that power is conserved, and the forward
crossing additionally carries the mode-matching loss.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .core import C_LIGHT, EPS0, HBAR, CavityFiberConfig, derive_cavity

PF, PB, SF, SB = 0, 1, 2, 3  # field slots: pump fwd/bwd, Stokes fwd/bwd

MOTION_NONE, MOTION_SINE, MOTION_LANGEVIN = 0, 1, 2

# columns of the recorded time series
REC_COLS = ("t_s", "P_refl_W", "P_pump_W", "P_stokes_W", "F_pump_N", "F_stokes_N", "x_m")


class BlowUpError(FloatingPointError):
    """Field amplitude left the physical range (or became NaN)."""


@dataclass
class FieldLattice:
    """Four traveling-wave amplitude arrays (V/m) plus the current time."""

    Ep_fwd: np.ndarray
    Ep_bwd: np.ndarray
    Es_fwd: np.ndarray
    Es_bwd: np.ndarray
    t: float = 0.0
    step_index: int = 0

    @classmethod
    def empty(cls, config: CavityFiberConfig) -> "FieldLattice":
        n = config.N_elements + 2
        return cls(*(np.zeros(n, dtype=np.complex128) for _ in range(4)))

    def __post_init__(self):
        sizes = {a.size for a in self.arrays()}
        if len(sizes) != 1:
            raise ValueError("all four field arrays must have the same length")

    def arrays(self):
        return (self.Ep_fwd, self.Ep_bwd, self.Es_fwd, self.Es_bwd)

    def stacked(self) -> np.ndarray:
        return np.stack(self.arrays()).astype(np.complex128)

    @classmethod
    def from_stacked(cls, F: np.ndarray, t: float, k: int) -> "FieldLattice":
        return cls(F[0].copy(), F[1].copy(), F[2].copy(), F[3].copy(), t, k)

    def copy(self) -> "FieldLattice":
        return FieldLattice.from_stacked(self.stacked(), self.t, self.step_index)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass(frozen=True)
class DriveSpec:
    """Input drive: power, detuning (optionally ramped), Stokes seed, mirror motion.

    ``Delta_rate`` (rad/s per s) turns the detuning into a linear ramp
    ``Delta + Delta_rate * (t - t_ref)``.  ``x_of_t`` prescribes the mirror
    displacement; the fast kernel recognises :class:`SineMotion` directly.
    """

    P_in: float
    Delta: float = 0.0
    Delta_rate: float = 0.0
    t_ref: float = 0.0
    seed_power_ratio: float = 1e-9
    x_of_t: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.P_in < 0:
            raise ValueError("P_in must be nonnegative")
        if not (0.0 <= self.seed_power_ratio < 1e-6):
            raise ValueError("seed_power_ratio must lie in [0, 1e-6)")

    def detuning(self, t: float) -> float:
        return self.Delta + self.Delta_rate * (t - self.t_ref)


@dataclass(frozen=True)
class SineMotion:
    amplitude: float
    omega: float
    phase: float = 0.0

    def __call__(self, t: float) -> float:
        return self.amplitude * math.sin(self.omega * t + self.phase)


@dataclass(frozen=True)
class GridConstants:
    """Scalars used by the kernel, derived once from the config and drive."""

    sR1: float
    sT1: float
    sR2: float
    fwd_iface: float
    bwd_iface: float
    E_in: float
    seed_E2: float
    half_adz: float
    cBdz: float
    T_rt: float
    k2: float  # 2 omega_L / c
    p_free: float  # W per |E|^2 in free space
    p_fib: float  # W per |E|^2 in the fiber
    guard2: float


def grid_constants(config: CavityFiberConfig, drive: DriveSpec) -> GridConstants:
    c = config
    n = c.n_refr
    dz = c.dz_fib
    s = (c.w_free / c.mfd) / math.sqrt(n)
    p_free = 0.5 * EPS0 * C_LIGHT * c.free_area
    p_fib = 0.5 * n * EPS0 * C_LIGHT * c.fiber_area
    E_in = math.sqrt(drive.P_in / p_free)
    seed = drive.seed_power_ratio * drive.P_in / p_fib
    guard2 = (1e3 * E_in) ** 2 if E_in > 0 else math.inf
    return GridConstants(
        sR1=math.sqrt(c.R1), sT1=math.sqrt(1.0 - c.R1), sR2=math.sqrt(c.R2),
        fwd_iface=math.sqrt(c.beta_mm) * s, bwd_iface=1.0 / s,
        E_in=E_in, seed_E2=seed, half_adz=0.5 * c.alpha_loss * dz,
        cBdz=c.c_B * dz, T_rt=2.0 * (c.N_elements + 1) * c.dt,
        k2=2.0 * c.omega_L / C_LIGHT, p_free=p_free, p_fib=p_fib, guard2=guard2,
    )


@njit(cache=True, fastmath=True, inline="always")
def _transport(F, G, N, fwd_iface, bwd_iface, half_adz, cBdz):
    """Move every wave by one element; predictor-corrector SBS coupling in the fiber.

    F, G have shape (8, N+2): real/imag parts of pump fwd, pump bwd, Stokes fwd,
    Stokes bwd.  The gain factors are real so the first-pass estimate and the
    midpoint average reduce to scalings of the old amplitude.
    """
    a = 1.0 - half_adz
    for j in range(1, N + 1):
        # forward pump with backward Stokes
        epr = F[0, j]
        epi = F[1, j]
        esr = F[6, j + 1]
        esi = F[7, j + 1]
        gp = 0.5 * (1.0 + a - cBdz * (esr * esr + esi * esi))
        gs = 0.5 * (1.0 + a + cBdz * (epr * epr + epi * epi))
        g1 = a - cBdz * gs * gs * (esr * esr + esi * esi)
        g2 = a + cBdz * gp * gp * (epr * epr + epi * epi)
        G[0, j + 1] = epr * g1
        G[1, j + 1] = epi * g1
        G[6, j] = esr * g2
        G[7, j] = esi * g2
        # backward pump with forward Stokes
        ebr = F[2, j + 1]
        ebi = F[3, j + 1]
        efr = F[4, j]
        efi = F[5, j]
        gb = 0.5 * (1.0 + a - cBdz * (efr * efr + efi * efi))
        gf = 0.5 * (1.0 + a + cBdz * (ebr * ebr + ebi * ebi))
        h1 = a - cBdz * gf * gf * (efr * efr + efi * efi)
        h2 = a + cBdz * gb * gb * (ebr * ebr + ebi * ebi)
        G[2, j] = ebr * h1
        G[3, j] = ebi * h1
        G[4, j + 1] = efr * h2
        G[5, j + 1] = efi * h2
    for q in (0, 1, 4, 5):
        G[q, 1] = fwd_iface * F[q, 0]
    for q in (2, 3, 6, 7):
        G[q, 0] = bwd_iface * F[q, 1]


@njit(cache=True)
def _boundaries(G, N, sR1, sT1, sR2, E_in, seed_E2, theta):
    """Mirror reflections, input coupling and Stokes seeding (in place, real layout).

    Returns the reflected pump amplitude outside the input mirror (re, im).
    """
    G[2, N + 1] = sR2 * G[0, N + 1]
    G[3, N + 1] = sR2 * G[1, N + 1]
    sr = sR2 * G[4, N + 1]
    si = sR2 * G[5, N + 1]
    if seed_E2 > 0.0:
        p = sr * sr + si * si
        mag = math.sqrt(p + seed_E2)
        if p > 0.0:
            f = mag / math.sqrt(p)
            sr *= f
            si *= f
        else:
            sr = mag
            si = 0.0
    G[6, N + 1] = sr
    G[7, N + 1] = si
    c = math.cos(theta)
    s = math.sin(theta)
    ir = c * G[2, 0] - s * G[3, 0]
    ii = s * G[2, 0] + c * G[3, 0]
    G[0, 0] = sT1 * E_in + sR1 * ir
    G[1, 0] = sR1 * ii
    G[4, 0] = sR1 * G[6, 0]
    G[5, 0] = sR1 * G[7, 0]
    return -sR1 * E_in + sT1 * ir, sT1 * ii


@njit(cache=True, fastmath=True)
def _run(F, k0, nsteps, N, dt, sR1, sT1, sR2, fwd_iface, bwd_iface, E_in, seed_E2,
         half_adz, cBdz, T_rt, k2, p_free, guard2, R1,
         Delta0, Delta_rate, t_ref,
         motion, x0, x_amp, x_om, x_ph,
         osc, osc_par, noise_seed,
         rec, rec_every, demod, demod_start, demod_om):
    """Advance the lattice ``nsteps`` steps.

    F has shape (2, 8, N+2); the current state lives in F[k % 2].  Recorded
    rows are box averages over ``rec_every`` steps (the step count must start on
    a window boundary for the windows to align with absolute time).
    osc = [x, v, sum_x, sum_x2, n_acc] and osc_par = [Om2, gamma, m, d1, F_ref,
    acc_start_step, lasing_x].  Returns (status, n_recorded) where status is 0 ok,
    1 blow-up, 2 mechanical lasing.
    """
    if motion == 2 and noise_seed >= 0:
        np.random.seed(noise_seed)
    nrec = 0
    acc = np.zeros(6)
    cpl = 2.0 * p_free / 299792458.0
    x = x0
    if motion == 2:
        x = osc[0]
    for i in range(nsteps):
        k = k0 + i
        t = k * dt
        cur = k % 2
        G = F[1 - cur]
        _transport(F[cur], G, N, fwd_iface, bwd_iface, half_adz, cBdz)
        tt = t + dt
        if motion == 1:
            x = x0 + x_amp * math.sin(x_om * tt + x_ph)
        theta = -(Delta0 + Delta_rate * (tt - t_ref)) * T_rt + k2 * x
        err, eri = _boundaries(G, N, sR1, sT1, sR2, E_in, seed_E2, theta)
        ipb = G[2, 0] * G[2, 0] + G[3, 0] * G[3, 0]
        isb = G[6, 0] * G[6, 0] + G[7, 0] * G[7, 0]
        ipf = G[0, 0] * G[0, 0] + G[1, 0] * G[1, 0]
        if not (ipf < guard2 and ipb < guard2 and isb < guard2):
            return 1, nrec
        Fp = cpl * ipb
        Fs = cpl * isb
        if motion == 2:
            # Mannella quasi-symplectic leapfrog; the force enters relative to its reference
            gam = osc_par[1]
            h = dt
            xh = osc[0] + 0.5 * h * osc[1]
            f = -osc_par[0] * xh + (Fp + Fs - osc_par[4]) / osc_par[2]
            c2 = 1.0 / (1.0 + 0.5 * gam * h)
            v = c2 * ((1.0 - 0.5 * gam * h) * osc[1] + h * f + osc_par[3] * np.random.standard_normal())
            osc[1] = v
            osc[0] = xh + 0.5 * h * v
            x = osc[0]
            if k + 1 >= osc_par[5]:
                osc[2] += x
                osc[3] += x * x
                osc[4] += 1.0
            if abs(x) > osc_par[6]:
                return 2, nrec
        if demod_om > 0.0 and k + 1 >= demod_start:
            s = math.sin(demod_om * tt)
            c = math.cos(demod_om * tt)
            demod[0] += Fp * s
            demod[1] += Fp * c
            demod[2] += Fs * s
            demod[3] += Fs * c
            demod[4] += 1.0
        if rec_every > 0:
            acc[0] += err * err + eri * eri + (1.0 - R1) * isb
            acc[1] += ipf
            acc[2] += isb
            acc[3] += Fp
            acc[4] += Fs
            acc[5] += x
            if (k + 1) % rec_every == 0:
                if nrec < rec.shape[0]:
                    rec[nrec, 0] = tt - 0.5 * (rec_every - 1) * dt
                    rec[nrec, 1] = p_free * acc[0] / rec_every
                    rec[nrec, 2] = p_free * acc[1] / rec_every
                    rec[nrec, 3] = p_free * acc[2] / rec_every
                    rec[nrec, 4] = acc[3] / rec_every
                    rec[nrec, 5] = acc[4] / rec_every
                    rec[nrec, 6] = acc[5] / rec_every
                    nrec += 1
                for q in range(6):
                    acc[q] = 0.0
    return 0, nrec


def _to_real(C: np.ndarray) -> np.ndarray:
    """(4, n) complex -> (8, n) real, interleaving re/im per field."""
    R = np.empty((8, C.shape[1]))
    R[0::2] = C.real
    R[1::2] = C.imag
    return R


def _to_complex(R: np.ndarray) -> np.ndarray:
    return R[0::2] + 1j * R[1::2]


class Propagator:
    """Stateful driver around the compiled kernel for one cavity and drive."""

    def __init__(self, config: CavityFiberConfig, drive: DriveSpec, lattice: FieldLattice | None = None):
        self.config = config
        self.drive = drive
        self.gc = grid_constants(config, drive)
        lat = lattice if lattice is not None else FieldLattice.empty(config)
        if lat.Ep_fwd.size != config.N_elements + 2:
            raise ValueError("lattice size does not match the config grid")
        self.k = lat.step_index
        self.F = np.zeros((2, 8, config.N_elements + 2))
        self.F[self.k % 2] = _to_real(lat.stacked())
        self.x0 = 0.0
        self.motion = MOTION_NONE
        self.sine = SineMotion(0.0, 0.0)
        self._dummy_rec = np.zeros((0, len(REC_COLS)))
        self._dummy4 = np.zeros(5)

    # -- state access -------------------------------------------------
    @property
    def t(self) -> float:
        return self.k * self.config.dt

    @property
    def fields(self) -> np.ndarray:
        """Current fields as a (4, N+2) complex array."""
        return _to_complex(self.F[self.k % 2])

    def lattice(self) -> FieldLattice:
        return FieldLattice.from_stacked(self.fields, self.t, self.k)

    def set_drive(self, drive: DriveSpec):
        self.drive = drive
        self.gc = grid_constants(self.config, drive)

    def set_motion(self, x_of_t):
        if x_of_t is None:
            self.motion, self.x0 = MOTION_NONE, 0.0
        elif isinstance(x_of_t, SineMotion):
            self.motion, self.sine, self.x0 = MOTION_SINE, x_of_t, 0.0
        elif isinstance(x_of_t, (int, float)):
            self.motion, self.x0 = MOTION_NONE, float(x_of_t)
        else:
            raise TypeError("the fast kernel takes a SineMotion or a constant displacement")

    # -- integration --------------------------------------------------
    def advance(self, nsteps: int, *, rec_every: int = 0, demod=None, demod_start: int = 0,
                demod_omega: float = 0.0, osc=None, osc_par=None, noise_seed: int = -1,
                motion: int | None = None):
        gc = self.gc
        d = self.drive
        nrec = nsteps // rec_every if rec_every > 0 else 0
        rec = np.zeros((nrec, len(REC_COLS))) if nrec else self._dummy_rec
        mot = self.motion if motion is None else motion
        status, n = _run(
            self.F, self.k, int(nsteps), self.config.N_elements, self.config.dt,
            gc.sR1, gc.sT1, gc.sR2, gc.fwd_iface, gc.bwd_iface, gc.E_in, gc.seed_E2,
            gc.half_adz, gc.cBdz, gc.T_rt, gc.k2, gc.p_free, gc.guard2, self.config.R1,
            d.Delta, d.Delta_rate, d.t_ref,
            mot, self.x0, self.sine.amplitude, self.sine.omega, self.sine.phase,
            osc if osc is not None else self._dummy4,
            osc_par if osc_par is not None else self._dummy4,
            int(noise_seed),
            rec, int(rec_every), demod if demod is not None else self._dummy4,
            int(demod_start), float(demod_omega),
        )
        if status == 1:
            self.k += n * rec_every if rec_every else 0
            raise BlowUpError(f"field amplitude exceeded 1e3 x input near t={self.t:.3e} s")
        self.k += int(nsteps) if status == 0 else 0
        return status, rec[:n]

    def round_trip_steps(self) -> int:
        return 2 * (self.config.N_elements + 1)


# -- observables ------------------------------------------------------------

def circulating_powers(config: CavityFiberConfig, lattice: FieldLattice):
    """(forward pump power after the input mirror, backward Stokes power at it), W."""
    p_free = 0.5 * EPS0 * C_LIGHT * config.free_area
    return p_free * abs(lattice.Ep_fwd[0]) ** 2, p_free * abs(lattice.Es_bwd[0]) ** 2


def photon_numbers(config: CavityFiberConfig, lattice: FieldLattice):
    """Intracavity (pump, Stokes) photon numbers from the stored field energy.

    Every node carries the wave that crosses it during one time step, so the
    energy of a traveling wave is its power times ``dt`` summed over nodes; the
    two mirror nodes count half.
    """
    c = config
    p_free = 0.5 * EPS0 * C_LIGHT * c.free_area
    p_fib = 0.5 * c.n_refr * EPS0 * C_LIGHT * c.fiber_area
    w = np.full(c.N_elements + 2, p_fib)
    w[0] = p_free
    w *= c.dt
    w[0] *= 0.5
    w[-1] *= 0.5
    # the interface node holds fiber-side amplitudes, node 0 free-space ones
    ep = np.sum(w * (np.abs(lattice.Ep_fwd) ** 2 + np.abs(lattice.Ep_bwd) ** 2))
    es = np.sum(w * (np.abs(lattice.Es_fwd) ** 2 + np.abs(lattice.Es_bwd) ** 2))
    hw = HBAR * c.omega_L
    return ep / hw, es / hw


def record_force(lattice: FieldLattice, config: CavityFiberConfig):
    """Radiation force on the input mirror (N), returned as (pump, Stokes).

    Each wave arriving at the mirror from inside reverses its momentum,
    ``2 P_inc / c``, the force carried by a circulating wave in the
    single-mode picture (hbar G n).
    """
    p_free = 0.5 * EPS0 * C_LIGHT * config.free_area
    k = 2.0 * p_free / C_LIGHT
    return k * abs(lattice.Ep_bwd[0]) ** 2, k * abs(lattice.Es_bwd[0]) ** 2


# -- single-step API ----------------------------------------------------------

def apply_boundaries(lattice: FieldLattice, config: CavityFiberConfig, drive: DriveSpec, t: float) -> FieldLattice:
    """Apply mirrors, input coupling and seeding to a freshly transported lattice."""
    gc = grid_constants(config, drive)
    x = drive.x_of_t(t) if drive.x_of_t is not None else 0.0
    theta = -drive.detuning(t) * gc.T_rt + gc.k2 * x
    G = _to_real(lattice.stacked())
    _boundaries(G, config.N_elements, gc.sR1, gc.sT1, gc.sR2, gc.E_in, gc.seed_E2, theta)
    return FieldLattice.from_stacked(_to_complex(G), lattice.t, lattice.step_index)


def step(lattice: FieldLattice, config: CavityFiberConfig, drive: DriveSpec) -> FieldLattice:
    """One time step: transport with SBS coupling, then the boundaries."""
    gc = grid_constants(config, drive)
    F = _to_real(lattice.stacked())
    G = np.zeros_like(F)
    _transport(F, G, config.N_elements, gc.fwd_iface, gc.bwd_iface, gc.half_adz, gc.cBdz)
    t = lattice.t + config.dt
    x = drive.x_of_t(t) if drive.x_of_t is not None else 0.0
    theta = -drive.detuning(t) * gc.T_rt + gc.k2 * x
    _boundaries(G, config.N_elements, gc.sR1, gc.sT1, gc.sR2, gc.E_in, gc.seed_E2, theta)
    out = FieldLattice.from_stacked(_to_complex(G), t, lattice.step_index + 1)
    m2 = max(abs(out.Ep_fwd[0]), abs(out.Ep_bwd[0]), abs(out.Es_bwd[0])) ** 2
    if not out.is_finite() or m2 >= gc.guard2:
        raise BlowUpError("field amplitude exceeded 1e3 x input")
    return out


# -- equilibrium --------------------------------------------------------------

@dataclass(frozen=True)
class EquilibriumResult:
    P_pump_circ: float
    P_stokes_circ: float
    P_reflected: float
    converged_t: float
    converged: bool
    n_pump: float = 0.0
    n_stokes: float = 0.0
    lattice: FieldLattice | None = field(default=None, compare=False, repr=False)


def run_to_equilibrium(config: CavityFiberConfig, drive: DriveSpec, *, tol: float = 1e-8,
                       max_round_trips: int = 200_000, min_round_trips: int = 20,
                       window: int = 1, propagator: Propagator | None = None) -> EquilibriumResult:
    """Integrate until the circulating powers change by less than ``tol`` per window.

    Powers are averaged over ``window`` round trips, which removes the
    structure of the circulating Stokes light along the round trip; consecutive
    windows are compared.  The drive must have a fixed detuning.  With
    ``propagator`` given, integration continues from its state.
    """
    if drive.Delta_rate != 0.0:
        raise ValueError("run_to_equilibrium needs a fixed detuning")
    prop = propagator if propagator is not None else Propagator(config, drive)
    n = prop.round_trip_steps() * window
    prev = None
    converged = False
    last = None
    for i in range(max(1, max_round_trips // window)):
        _, rec = prop.advance(n, rec_every=n)
        last = rec[-1]
        cur = np.array([last[2], last[3]])
        if prev is not None and (i + 1) * window >= min_round_trips:
            rel = np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-300)
            if np.all(rel < tol):
                converged = True
                break
        prev = cur
    lat = prop.lattice()
    npump, nst = photon_numbers(config, lat)
    return EquilibriumResult(
        P_pump_circ=float(last[2]), P_stokes_circ=float(last[3]), P_reflected=float(last[1]),
        converged_t=prop.t, converged=converged, n_pump=npump, n_stokes=nst, lattice=lat,
    )


def airy_reflection(config: CavityFiberConfig, Delta) -> np.ndarray:
    """Static reflected power fraction of the linear (no SBS) lumped-loss cavity."""
    d = derive_cavity(config)
    r = d.round_trip_amplitude
    sR1 = math.sqrt(config.R1)
    rho = r / sR1
    ph = np.exp(-1j * np.asarray(Delta, dtype=float) * d.round_trip_time)
    amp = (-sR1 + rho * ph) / (1.0 - sR1 * rho * ph)
    return np.abs(amp) ** 2


def write_series_csv(path, rec: np.ndarray, cols=("t_s", "P_refl_W", "P_pump_W", "P_stokes_W")):
    idx = [REC_COLS.index(c) for c in cols]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rec[:, idx]:
            w.writerow([f"{v:.9e}" for v in row])


# -- threshold from the simulator ----------------------------------------------

def stokes_growth_rate(config: CavityFiberConfig, P_in: float, Delta: float = 0.0, *,
                       probe: float = 1e-12, settle_round_trips: int = 400,
                       measure_round_trips: int = 400) -> float:
    """Net small-signal growth rate (1/s) of the intracavity Stokes energy.

    The pump is first brought to its linear steady state without any Stokes
    light, then a weak uniform Stokes probe (relative power ``probe``) is
    inserted and its energy followed while still negligible against the pump.
    """
    drive = DriveSpec(P_in=P_in, Delta=Delta, seed_power_ratio=0.0)
    prop = Propagator(config, drive)
    rt = prop.round_trip_steps()
    prop.advance(rt * settle_round_trips)
    F = prop.F[prop.k % 2]
    gc = prop.gc
    amp = math.sqrt(probe * P_in / gc.p_fib) if P_in > 0 else 1e-3
    F[4:8] = 0.0
    F[4, 1:] = amp
    F[6, 1:] = amp
    F[4, 0] = F[6, 0] = amp * gc.bwd_iface
    prop.advance(rt * 20)
    _, n0 = photon_numbers(config, prop.lattice())
    t0 = prop.t
    prop.advance(rt * measure_round_trips)
    _, n1 = photon_numbers(config, prop.lattice())
    return math.log(n1 / n0) / (prop.t - t0)


def simulated_threshold(config: CavityFiberConfig, Delta: float = 0.0, *, P_guess: float | None = None,
                        rel_bracket: float = 0.1, **kw) -> float:
    """Threshold input power (W) as the zero of the Stokes growth rate.

    The growth rate is linear in the intracavity pump intensity, hence in P_in
    below threshold, so two evaluations bracketing the guess and a secant
    refinement locate it.
    """
    from .core import single_mode_params
    from .linear import threshold_power

    if config.g_B <= 0:
        raise ValueError("no Brillouin threshold without gain")
    if P_guess is None:
        P_guess = threshold_power(single_mode_params(config, 1e-3, Delta=Delta), Delta)
    p1, p2 = P_guess * (1 - rel_bracket), P_guess * (1 + rel_bracket)
    g1 = stokes_growth_rate(config, p1, Delta, **kw)
    g2 = stokes_growth_rate(config, p2, Delta, **kw)
    for _ in range(3):
        p3 = p1 - g1 * (p2 - p1) / (g2 - g1)
        g3 = stokes_growth_rate(config, p3, Delta, **kw)
        p1, g1, p2, g2 = p2, g2, p3, g3
        if abs(p2 - p1) < 1e-4 * p2:
            break
    return p2
