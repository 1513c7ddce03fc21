import math

import numpy as np
import pytest

from sbscavity.core import C_LIGHT, EPS0, CavityFiberConfig, ConfigError, brillouin_temporal_gain, derive_cavity, single_mode_params
from sbscavity.linear import steady_state, threshold_power
from sbscavity.propagator import (BlowUpError, DriveSpec, FieldLattice, Propagator, airy_reflection,
                                  circulating_powers, photon_numbers, record_force, run_to_equilibrium,
                                  simulated_threshold, step)


@pytest.fixture(scope="module")
def lossless():
    return CavityFiberConfig.from_fiber_length(1.0, R2=1.0, beta_mm=1.0, alpha_loss=0.0)


def _eq(config, P, D=0.0, tol=1e-9, **kw):
    return run_to_equilibrium(config, DriveSpec(P_in=P, Delta=D, **{k: v for k, v in kw.items()
                                                                    if k == "seed_power_ratio"}),
                              tol=tol, window=4, max_round_trips=100_000)


# Above threshold the stationary state is weakly unstable: fluctuations grow with
# an e-folding time of a few ms, so those runs stop at a looser tolerance.
ABOVE_TOL = 1e-8


@pytest.mark.parametrize("D", [0.0, 3e5, -1.2e6])
def test_lossless_cavity_reflects_everything(lossless, D):
    r = _eq(lossless.with_(g_B=0.0), 0.01, D)
    assert r.converged
    assert r.P_reflected == pytest.approx(0.01, rel=1e-6)


def _lossless_deficit(L_free, N):
    c = CavityFiberConfig(L_free=L_free, L_fib=L_free * N / 1.4496, N_elements=N, R2=1.0, beta_mm=1.0,
                          alpha_loss=0.0)
    P = 3 * threshold_power(single_mode_params(c, 1.0), 0.0)
    r = _eq(c, P)
    assert r.converged and r.P_stokes_circ > 0.1 * r.P_pump_circ
    return 1 - r.P_reflected / P


def test_lossless_cavity_above_threshold_conserves_power():
    # the coupling scheme conserves photon number to first order in the step
    d1 = _lossless_deficit(0.1, 14)
    d2 = _lossless_deficit(0.05, 28)
    assert 0 <= d1 < 5e-3
    assert d2 / d1 == pytest.approx(0.5, abs=0.05)


def test_equilibrium_matches_airy(short_cavity):
    cfg = short_cavity.with_(g_B=0.0)
    k = single_mode_params(cfg, 0.01).kappa
    for D in (0.0, 0.5 * k, -1.5 * k):
        r = _eq(cfg, 0.01, D)
        assert r.P_reflected / 0.01 == pytest.approx(float(airy_reflection(cfg, D)), rel=1e-6, abs=1e-9)


def test_fsr_periodicity(short_cavity):
    cfg = short_cavity.with_(g_B=0.0)
    fsr = 2 * math.pi * derive_cavity(cfg).fsr
    a = _eq(cfg, 0.01, 2e5)
    b = _eq(cfg, 0.01, 2e5 + fsr)
    assert a.P_reflected == pytest.approx(b.P_reflected, rel=1e-7)


def test_half_wavelength_periodicity(short_cavity):
    cfg = short_cavity.with_(g_B=0.0)
    out = []
    for x in (0.0, cfg.lambda_p / 2):
        prop = Propagator(cfg, DriveSpec(P_in=0.01, Delta=2e5))
        prop.set_motion(x)
        out.append(run_to_equilibrium(cfg, prop.drive, tol=1e-9, window=4, propagator=prop).P_reflected)
    quarter = Propagator(cfg, DriveSpec(P_in=0.01, Delta=2e5))
    quarter.set_motion(cfg.lambda_p / 4)
    q = run_to_equilibrium(cfg, quarter.drive, tol=1e-9, window=4, propagator=quarter).P_reflected
    assert out[0] == pytest.approx(out[1], rel=1e-7)
    assert abs(q - out[0]) > 1e-3 * out[0]


def test_stokes_stays_at_seed_level_without_gain(short_cavity):
    r = _eq(short_cavity.with_(g_B=0.0), 0.2, seed_power_ratio=1e-9)
    assert r.P_stokes_circ < 1e-7 * r.P_pump_circ


def test_photon_number_matches_single_mode(default_cavity):
    cfg = default_cavity
    P = 0.02
    r = _eq(cfg, P)
    ss = steady_state(single_mode_params(cfg, P))
    assert r.n_pump == pytest.approx(ss.n_pump, rel=2e-3)


def test_single_pass_brillouin_gain():
    cfg = CavityFiberConfig.from_fiber_length(1.0, alpha_loss=0.0, g_B=1e-4)
    lat = FieldLattice.empty(cfg)
    N = cfg.N_elements
    E0, e0 = 1e3, 1.0
    lat.Ep_fwd[1:N + 1] = E0
    lat.Es_bwd[1:N + 1] = e0
    nxt = step(lat, cfg, DriveSpec(P_in=0.0, seed_power_ratio=0.0))
    j = N // 2
    I = 0.5 * cfg.n_refr * 8.8541878128e-12 * 299792458.0 * E0**2
    gain = abs(nxt.Es_bwd[j]) ** 2 / e0**2
    x = cfg.g_B * I * cfg.dz_fib
    # first-pass estimate of the scheme, and the exact exponential to first order in the step
    assert gain == pytest.approx((1 + x / 2) ** 2, rel=1e-6)
    assert math.log(gain) == pytest.approx(x, rel=x)
    # what the Stokes wave gains the pump loses, up to the second-order step error
    dp = E0**2 - abs(nxt.Ep_fwd[j + 1]) ** 2
    ds = abs(nxt.Es_bwd[j]) ** 2 - e0**2
    assert dp == pytest.approx(ds, rel=0.02)


def test_step_api_matches_kernel(short_cavity):
    drive = DriveSpec(P_in=0.05, Delta=1e5)
    prop = Propagator(short_cavity, drive)
    prop.advance(137)
    lat = prop.lattice()
    ref = step(lat, short_cavity, drive)
    prop.advance(1)
    assert np.allclose(prop.lattice().stacked(), ref.stacked(), rtol=1e-10, atol=1e-12 * np.abs(ref.stacked()).max())


def test_blow_up_detected(short_cavity):
    lat = FieldLattice.empty(short_cavity)
    for arr in lat.arrays():
        arr[:] = 1e12
    with pytest.raises(BlowUpError):
        step(lat, short_cavity, DriveSpec(P_in=1e-6))


def test_force_vanishes_for_empty_cavity(short_cavity):
    fp, fs = record_force(FieldLattice.empty(short_cavity), short_cavity)
    assert fp == 0 and fs == 0


def test_force_linear_in_power(short_cavity):
    cfg = short_cavity.with_(g_B=0.0)
    f = [sum(record_force(_eq(cfg, P).lattice, cfg)) for P in (0.01, 0.02)]
    assert f[1] == pytest.approx(2 * f[0], rel=1e-6)


def test_circulating_power_on_resonance(short_cavity):
    cfg = short_cavity.with_(g_B=0.0)
    r = _eq(cfg, 0.01)
    T1 = 1 - cfg.R1
    P_fwd = 0.01 * T1 / (1 - cfg.round_trip_amplitude) ** 2
    assert circulating_powers(cfg, r.lattice)[0] == pytest.approx(P_fwd, rel=1e-6)


def test_drive_validation():
    with pytest.raises(ValueError):
        DriveSpec(P_in=-1.0)
    with pytest.raises(ValueError):
        DriveSpec(P_in=1.0, seed_power_ratio=1e-5)


def _round_trip_threshold(c):
    # Stokes round-trip gain exp(g_B int I dz) balances the round-trip loss
    lat = _eq(c.with_(g_B=0.0), 1.0).lattice
    N = c.N_elements
    I = 0.5 * c.n_refr * EPS0 * C_LIGHT * (np.abs(lat.Ep_fwd[1:N + 1]) ** 2 + np.abs(lat.Ep_bwd[1:N + 1]) ** 2)
    loss = -math.log(c.R1 * c.R2 * c.beta_mm) + 2 * c.alpha_loss * c.L_fib
    return loss / (c.g_B * np.sum(I) * c.dz_fib)


@pytest.mark.slow
def test_simulated_threshold_matches_round_trip_gain(short_cavity):
    assert simulated_threshold(short_cavity) == pytest.approx(_round_trip_threshold(short_cavity), rel=0.01)


@pytest.mark.slow
def test_simulated_threshold_matches_linear(default_cavity):
    P_lin = threshold_power(single_mode_params(default_cavity, 1.0), 0.0)
    assert simulated_threshold(default_cavity) == pytest.approx(P_lin, rel=0.03)


@pytest.mark.slow
def test_grid_refinement(default_cavity):
    # halving the element length moves the equilibrium powers by less than 0.5%
    c = default_cavity
    fine = CavityFiberConfig(L_free=c.L_free / 2, L_fib=c.L_fib, N_elements=2 * c.N_elements)
    P = 0.075
    a, b = _eq(c, P, tol=ABOVE_TOL), _eq(fine, P, tol=ABOVE_TOL)
    assert a.converged and b.converged
    assert b.P_pump_circ == pytest.approx(a.P_pump_circ, rel=5e-3)
    assert b.P_stokes_circ == pytest.approx(a.P_stokes_circ, rel=5e-3)


@pytest.mark.slow
def test_seed_insensitivity(default_cavity):
    out = [_eq(default_cavity, 0.075, tol=ABOVE_TOL, seed_power_ratio=s) for s in (1e-11, 1e-9, 1e-7)]
    assert all(o.converged for o in out)
    P = [o.P_pump_circ for o in out]
    assert max(P) / min(P) - 1 < 0.01
    S = [o.P_stokes_circ for o in out]
    assert max(S) / min(S) - 1 < 0.02


def test_gain_normalisation_consistent_with_grid(short_cavity):
    # G_B times the clamped photon number equals twice the decay rate
    p = single_mode_params(short_cavity, 1.0)
    assert p.G_B == pytest.approx(brillouin_temporal_gain(short_cavity))
    assert 2 * p.kappa / p.G_B > 0


def test_closed_lossless_cavity_conserves_energy():
    c = CavityFiberConfig.from_fiber_length(1.0, R1=1.0, R2=1.0, beta_mm=1.0, alpha_loss=0.0, g_B=0.0)
    lat = FieldLattice.empty(c)
    rng = np.random.default_rng(0)
    for arr in lat.arrays()[:2]:
        arr[:] = rng.normal(size=arr.size) + 1j * rng.normal(size=arr.size)
    prop = Propagator(c, DriveSpec(P_in=0.0, seed_power_ratio=0.0), lattice=lat)
    # one round trip makes the mirror nodes consistent with their neighbours
    prop.advance(prop.round_trip_steps())
    e0 = photon_numbers(c, prop.lattice())[0]
    prop.advance(100_000)
    assert photon_numbers(c, prop.lattice())[0] == pytest.approx(e0, rel=1e-6)


def test_lossless_cavity_has_no_single_mode_linewidth():
    c = CavityFiberConfig.from_fiber_length(1.0, R1=1.0, R2=1.0, beta_mm=1.0, alpha_loss=0.0)
    with pytest.raises(ConfigError):
        single_mode_params(c, 0.01)


@pytest.mark.slow
def test_fields_monotone_along_fiber_above_threshold(default_cavity):
    r = _eq(default_cavity, 0.075, tol=ABOVE_TOL)
    assert r.converged and r.P_stokes_circ > 1e-3 * r.P_pump_circ
    N = default_cavity.N_elements
    pump = np.abs(r.lattice.Ep_fwd[1:N + 1]) ** 2
    stokes = np.abs(r.lattice.Es_bwd[1:N + 1]) ** 2
    assert np.all(np.diff(pump) <= 0)
    assert np.all(np.diff(stokes) <= 0)
