"""Command-line entry point: ``sbscavity <command> [options]``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, UnknownKeyError
from .core import ConfigError, single_mode_params
from .fitting import FitSpec, fit_fiber_params, minimize_phonons
from .linear import PoleError, damping_curve, steady_state
from .noise import phonon_numbers
from .optomech import demodulate, langevin_run
from .propagator import BlowUpError, DriveSpec, run_to_equilibrium
from .spectroscopy import dynamic_sweep, fit_trace, lowpass

JOBS_ENV = "SBSCAVITY_JOBS"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericalFailure(RuntimeError):
    pass


# -- output ------------------------------------------------------------------------

def write_csv(path: Path, header, rows) -> None:
    """CSV with a unit-bearing header row and 9 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.8e}"


def write_manifest(out: Path, command: str, args: dict, cfg: RunConfig, outputs) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "arguments": args,
        "config_hash": cfg.content_hash(),
        "config": cfg.flat(),
        "outputs": [str(p.name) for p in outputs],
    }
    (out / f"{command}_manifest.json").write_text(json.dumps(_finite(manifest), indent=2, sort_keys=True,
                                                            default=_json_default) + "\n")


def _finite(o):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)) and not math.isfinite(o):
        return str(float(o))
    return o


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


# -- parallel map -------------------------------------------------------------------

def job_count(flag: int | None) -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    if flag is not None:
        return max(1, flag)
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# -- workers (module level so they pickle) ------------------------------------------

def _equilibrium_point(D, config, P_in, seed):
    r = run_to_equilibrium(config, DriveSpec(P_in=P_in, Delta=float(D), seed_power_ratio=seed),
                           tol=1e-7, max_round_trips=50_000, window=4)
    return r.P_reflected, r.P_pump_circ, r.P_stokes_circ, r.converged


def _finesse_point(P, config, sweep, f_cut):
    tr = dynamic_sweep(config, P, sweep)
    R_guess = config.R2 * config.beta_mm * math.exp(-2 * config.alpha_loss * config.L_fib)
    fit = fit_trace(tr, config.R1, f_cut=f_cut, R_guess=R_guess)
    return fit.finesse_A, fit.R_eff, fit.residual, fit.ok


def _demod_point(job, mech, periods, seed):
    config, P, D = job
    r = demodulate(config, mech, float(D), P, periods=periods, seed_power_ratio=seed)
    return r.Gamma_opt, r.dOmega_m, r.Gamma_pump, r.Gamma_stokes, r.equilibrated


def _langevin_point(job, config, mech, P, t_total, n_real, seed_ratio, periods):
    D, seed = job
    lr = langevin_run(config, mech, float(D), P, noise_seed=seed, t_total=t_total, n_realizations=n_real,
                      seed_power_ratio=seed_ratio)
    dm = demodulate(config, mech.__class__(mech.mass, mech.Omega_m, 0.0, mech.T_bath), float(D), P,
                    periods=periods, seed_power_ratio=seed_ratio)
    x2_th = mech.x_thermal_rms**2
    G = mech.Gamma_m + dm.Gamma_opt
    pred = x2_th * mech.Gamma_m / G if G > 0 else math.inf
    return lr.mean_x2, lr.stderr, pred, dm.Gamma_opt, lr.lasing


# -- commands -------------------------------------------------------------------------

def _detunings(cfg: RunConfig, kappa: float, scan: str | None = None):
    if scan:
        try:
            lo, hi, n = scan.split(":")
            return np.linspace(float(lo), float(hi), int(n)) * kappa
        except ValueError:
            raise ConfigError(f"--delta-scan expects lo:hi:n in units of kappa, got {scan!r}") from None
    return np.linspace(cfg["drive.delta_min_kappa"], cfg["drive.delta_max_kappa"], cfg["drive.n_delta"]) * kappa


def cmd_spectrum(cfg: RunConfig, args, out: Path, jobs: int):
    config = cfg.cavity()
    P = (args.power if args.power is not None else cfg["drive.power_mW"]) * 1e-3
    seed = cfg["drive.seed_power_ratio"]
    path = out / f"spectrum_{args.mode}.csv"
    if args.mode == "equilibrium":
        from .core import derive_cavity
        d = derive_cavity(config)
        fsr = 2 * math.pi * d.fsr
        D = np.linspace(-0.5 * fsr, 0.5 * fsr, args.points)
        res = pmap(partial(_equilibrium_point, config=config, P_in=P, seed=seed), D, jobs)
        write_csv(path, ["Delta [rad/s]", "P_refl [W]", "P_pump_circ [W]", "P_stokes_circ [W]", "converged [1]"],
                  [(Di, *r) for Di, r in zip(D, res)])
    else:
        tr = dynamic_sweep(config, P, cfg.sweep(), seed_power_ratio=seed)
        filt = lowpass(tr.P_refl, cfg["sweep.f_cut_hz"], t=tr.t)
        write_csv(path, ["t [s]", "Delta [rad/s]", "P_refl [W]", "P_refl_filtered [W]"],
                  zip(tr.t, tr.Delta, tr.P_refl, filt))
    return [path], {"power_W": P, "mode": args.mode}


def cmd_finesse(cfg: RunConfig, args, out: Path, jobs: int):
    config = cfg.cavity()
    powers = sorted(args.powers if args.powers else cfg["drive.powers_mW"])
    res = pmap(partial(_finesse_point, config=config, sweep=cfg.sweep(), f_cut=cfg["sweep.f_cut_hz"]),
               [p * 1e-3 for p in powers], jobs)
    path = out / "finesse.csv"
    write_csv(path, ["P_in [W]", "finesse_A [1]", "R_eff [1]", "fit_residual [1]", "ok [1]"],
              [(p * 1e-3, *r) for p, r in zip(powers, res)])
    return [path], {"powers_mW": powers}


def cmd_damping(cfg: RunConfig, args, out: Path, jobs: int):
    config = cfg.cavity()
    if args.no_sbs:
        config = config.with_(g_B=0.0)
    f_m = args.omega_m if args.omega_m is not None else cfg["mechanics.f_m"]
    mech = cfg.mech(f_m)
    powers = args.powers if args.powers else [cfg["drive.power_mW"]]
    rows_jobs = []
    for p in powers:
        kappa = single_mode_params(config, p * 1e-3).kappa
        for D in _detunings(cfg, kappa):
            rows_jobs.append((config, p * 1e-3, float(D)))
    res = pmap(partial(_demod_point, mech=mech, periods=cfg["mechanics.periods"],
                       seed=cfg["drive.seed_power_ratio"]), rows_jobs, jobs)
    rows = []
    for (c, P, D), r in zip(rows_jobs, res):
        sp = single_mode_params(c, P)
        lin = damping_curve(sp, mech, [D])[:, 0]
        rows.append((P, D, D / sp.kappa, *r[:4], lin[0], lin[1], r[4]))
    path = out / ("damping_nosbs.csv" if args.no_sbs else "damping.csv")
    write_csv(path, ["P_in [W]", "Delta [rad/s]", "Delta/kappa [1]", "Gamma_opt [1/s]", "dOmega_m [rad/s]",
                     "Gamma_pump [1/s]", "Gamma_stokes [1/s]", "Gamma_opt_linear [1/s]",
                     "dOmega_m_linear [rad/s]", "equilibrated [1]"], rows)
    return [path], {"f_m_Hz": f_m, "powers_mW": list(powers), "no_sbs": args.no_sbs}


def cmd_langevin(cfg: RunConfig, args, out: Path, jobs: int):
    config = cfg.cavity()
    mech = cfg.mech()
    if not math.isfinite(mech.Q):
        raise ConfigError("mechanics.Q must be finite for a Langevin run")
    P = cfg["drive.power_mW"] * 1e-3
    n_real = args.realizations if args.realizations is not None else cfg["mechanics.realizations"]
    seed = args.seed if args.seed is not None else cfg["mechanics.seed"]
    kappa = single_mode_params(config, P).kappa
    D = _detunings(cfg, kappa)
    ss = np.random.SeedSequence(seed).spawn(len(D))
    seeds = [int(s.generate_state(1)[0]) for s in ss]
    res = pmap(partial(_langevin_point, config=config, mech=mech, P=P, t_total=cfg["mechanics.t_total"],
                       n_real=n_real, seed_ratio=cfg["drive.seed_power_ratio"], periods=cfg["mechanics.periods"]),
               list(zip(D, seeds)), jobs)
    path = out / "langevin.csv"
    write_csv(path, ["Delta [rad/s]", "Delta/kappa [1]", "mean_x2 [m^2]", "stderr_x2 [m^2]",
                     "predicted_x2 [m^2]", "Gamma_opt_demod [1/s]", "lasing [1]"],
              [(d, d / kappa, *r) for d, r in zip(D, res)])
    return [path], {"realizations": n_real, "seed": seed}


def cmd_phonons(cfg: RunConfig, args, out: Path, jobs: int):
    config = cfg.cavity()
    mech = cfg.mech()
    env = cfg.noise_env()
    p = single_mode_params(config, cfg["drive.power_mW"] * 1e-3)
    D = _detunings(cfg, p.kappa, args.delta_scan)
    pp = p.with_(Delta=D)
    n, Om, Q, Ge, th, pa, pb, to, valid = phonon_numbers(
        pp, steady_state(pp), mech, env, q_min=cfg["noise.q_min"], noise_port=cfg["noise.noise_port"],
        thermoptic=cfg["noise.thermoptic"])
    path = out / "phonons.csv"
    write_csv(path, ["Delta [rad/s]", "Delta/kappa [1]", "n_f [1]", "Omega_eff [rad/s]", "Q_eff [1]",
                     "Gamma_eff [1/s]", "n_thermal [1]", "n_pump_shot [1]", "n_stokes_shot [1]",
                     "n_thermoptic [1]", "valid [1]"],
              zip(D, D / p.kappa, n, Om, Q, Ge, th, pa, pb, to, valid))
    return [path], {"delta_scan": args.delta_scan}


def read_finesse_data(path) -> tuple:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except ValueError:
                continue  # header
    return tuple(rows)


def cmd_fit(cfg: RunConfig, args, out: Path, jobs: int):
    data = read_finesse_data(args.data)
    o = cfg.values["optimizer"]
    c = cfg.values["cavity"]
    spec = FitSpec(data=data, initial={"g_B": c["g_B"], "alpha": c["alpha_loss"], "beta": c["beta_mm"]},
                   g_B_factor=o["g_B_factor"], loss_frac=o["loss_frac"], mode=o["fit_mode"],
                   base=cfg.cavity(), sweep=cfg.sweep(), f_cut=cfg["sweep.f_cut_hz"], maxiter=o["maxiter"])
    res = fit_fiber_params(spec)
    lo, hi = spec.bounds()
    path = out / "fit_report.csv"
    init = [spec.initial[k] for k in ("g_B", "alpha", "beta")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "unit", "initial", "fitted", "lower_bound", "upper_bound", "at_bound"])
        for name, unit, i, v, l, h in zip(("g_B", "alpha", "beta"), ("m/W", "1/m", "1"), init,
                                          (res.g_B, res.alpha, res.beta), lo, hi):
            w.writerow([name, unit, _num(i), _num(v), _num(l), _num(h), int(name in res.at_bound)])
    record = out / "fit_result.json"
    record.write_text(json.dumps(_finite({**res.as_dict(), "mode": spec.mode, "n_points": len(data),
                                          "bounds": {"lower": lo.tolist(), "upper": hi.tolist()}}),
                                 indent=2, default=_json_default) + "\n")
    if not res.converged:
        print(f"warning: fit did not converge: {res.message}", file=sys.stderr)
    if res.at_bound:
        print(f"warning: parameters on bounds: {', '.join(res.at_bound)}", file=sys.stderr)
    return [path, record], {"data": str(args.data)}


def cmd_cool_search(cfg: RunConfig, args, out: Path, jobs: int):
    spec = cfg.cooling()
    res = minimize_phonons(spec, workers=jobs if jobs > 1 else 1)
    path = out / "cool_search.csv"
    write_csv(path, ["L_fib [m]", "power_ratio [1]", "finesse [1]", "f_m [Hz]", "n_f [1]", "Delta_opt [rad/s]",
                     "kappa [rad/s]", "Gamma_opt [1/s]", "Q_eff [1]", "P_in [W]", "found [1]"],
              [(res.L_fib, res.power_ratio, res.finesse, res.f_m, res.n_f, res.Delta_opt, res.kappa,
                res.Gamma_opt, res.Q_eff, res.P_in, res.found)])
    record = out / "cool_search.json"
    record.write_text(json.dumps(_finite(res.as_dict()), indent=2, default=_json_default) + "\n")
    if not res.found:
        raise NumericalFailure("no cooling region found")
    return [path, record], {}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "finesse": cmd_finesse,
    "damping": cmd_damping,
    "langevin": cmd_langevin,
    "phonons": cmd_phonons,
    "fit": cmd_fit,
    "cool-search": cmd_cool_search,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbscavity", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (sections as in the shipped defaults)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a single config key (repeatable)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--jobs", type=int, default=None, help=f"worker processes (env {JOBS_ENV} overrides)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="reflection spectrum")
    p.add_argument("--power", type=float, help="input power in mW")
    p.add_argument("--mode", choices=("dynamic", "equilibrium"), default="equilibrium")
    p.add_argument("--points", type=int, default=201, help="detunings per FSR (equilibrium mode)")

    p = sub.add_parser("finesse", parents=[common], help="fitted Airy finesse versus input power")
    p.add_argument("--powers", type=float, nargs="+", help="input powers in mW")

    p = sub.add_parser("damping", parents=[common], help="demodulated optical damping and spring shift")
    p.add_argument("--omega-m", type=float, help="mechanical frequency Omega_m/2pi in Hz")
    p.add_argument("--powers", type=float, nargs="+", help="input powers in mW")
    p.add_argument("--no-sbs", action="store_true", help="same sweep with the Brillouin gain set to zero")

    p = sub.add_parser("langevin", parents=[common], help="stochastic oscillator coupled to the cavity")
    p.add_argument("--realizations", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("phonons", parents=[common], help="final phonon number versus detuning")
    p.add_argument("--delta-scan", help="lo:hi:n detuning grid in units of kappa")

    p = sub.add_parser("fit", parents=[common], help="fit g_B, alpha, beta to finesse-vs-power data")
    p.add_argument("--data", required=True, help="CSV with columns P_in [W], finesse")

    sub.add_parser("cool-search", parents=[common], help="differential-evolution phonon minimisation")
    return ap


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig.defaults()
    updates = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        updates[key.strip()] = val.strip()
    return cfg.with_overrides(updates)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        jobs = job_count(args.jobs)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs, info = COMMANDS[args.command](cfg, args, out, jobs)
        write_manifest(out, args.command.replace("-", "_"), info, cfg, outputs)
    except UnknownKeyError as e:
        print(f"error: unknown config key '{e.key}'", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, BlowUpError, PoleError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for p in outputs:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
