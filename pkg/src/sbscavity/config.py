"""Run configuration: sectioned key = value text with fixed units per key."""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from .core import CavityFiberConfig, ConfigError, MechOscillator
from .fitting import CoolingSearchSpec
from .noise import NoiseEnv
from .spectroscopy import SweepSpec


class UnknownKeyError(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"unknown config key: {key}")
        self.key = key


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s) -> tuple:
    if isinstance(s, (list, tuple)):
        return tuple(float(v) for v in s)
    return tuple(float(v) for v in str(s).replace(",", " ").split())


# section -> key -> (parser, default, unit)
SCHEMA = {
    "cavity": {
        "L_free": (float, 0.1, "m"),
        "L_fib": (float, 0.1 * 145 / 1.4496, "m"),
        "n_refr": (float, 1.4496, ""),
        "R1": (float, 0.85, ""),
        "R2": (float, 1.0, ""),
        "beta_mm": (float, 0.70, ""),
        "alpha_loss": (float, 5.62e-4, "1/m"),
        "g_B": (float, 1.13e-11, "m/W"),
        "lambda_p": (float, 1064e-9, "m"),
        "mfd": (float, 6.6e-6, "m"),
        "w_free": (float, 1e-3, "m"),
    },
    "mechanics": {
        "mass": (float, 1e-10, "kg"),
        "f_m": (float, 6.1e3, "Hz"),
        "Q": (float, math.inf, ""),
        "T_bath": (float, 300.0, "K"),
        "t_total": (float, 0.6, "s"),
        "realizations": (int, 50, ""),
        "seed": (int, 0, ""),
        "periods": (int, 20, ""),
    },
    "drive": {
        "power_mW": (float, 30.0, "mW"),
        "powers_mW": (_floats, (30.0, 45.0, 60.0, 75.0), "mW"),
        "delta_min_kappa": (float, -2.0, "kappa"),
        "delta_max_kappa": (float, 2.0, "kappa"),
        "n_delta": (int, 41, ""),
        "seed_power_ratio": (float, 1e-9, ""),
    },
    "noise": {
        "environment": (str, "room", ""),
        "w0": (float, 3.3e-6, "m"),
        "a_f": (float, 62.5e-6, "m"),
        "q_min": (float, 100.0, ""),
        "noise_port": (str, "total", ""),
        "thermoptic": (_bool, True, ""),
    },
    "sweep": {
        "span_fsr": (float, 2.5, "FSR"),
        "duration": (float, 1e-3, "s"),
        "direction": (int, 1, ""),
        "start_offset_fsr": (float, 0.45, "FSR"),
        "samples_per_linewidth": (int, 200, ""),
        "f_cut_hz": (float, 1e6, "Hz"),
    },
    "optimizer": {
        "fit_mode": (str, "sim", ""),
        "g_B_factor": (float, 2.0, ""),
        "loss_frac": (float, 0.25, ""),
        "maxiter": (int, 50, ""),
        "L_fib": (float, 1.6, "m"),
        "mass": (float, 1e-12, "kg"),
        "Q": (float, 1e9, ""),
        "T": (float, 77.0, "K"),
        "g_B": (float, 6.71e-12, "m/W"),
        "kappa_ex_fraction": (float, 0.5, ""),
        "power_ratio_min": (float, 0.5, ""),
        "power_ratio_max": (float, 10.0, ""),
        "finesse_min": (float, 20.0, ""),
        "finesse_max": (float, 150.0, ""),
        "f_m_min": (float, 1e3, "Hz"),
        "f_m_max": (float, 5e5, "Hz"),
        "popsize": (int, 15, ""),
        "generations": (int, 200, ""),
        "tol": (float, 1e-3, ""),
        "seed": (int, 1, ""),
    },
}


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v).lower() if isinstance(v, bool) else str(v)


@dataclass(frozen=True)
class RunConfig:
    values: dict  # section -> key -> parsed value

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: {k: d for k, (_, d, _) in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def from_text(cls, text: str, base: "RunConfig | None" = None) -> "RunConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        cp.optionxform = str  # keys are case sensitive
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"malformed config: {e}") from e
        cfg = base or cls.defaults()
        updates = {f"{s}.{k}": v for s in cp.sections() for k, v in cp[s].items()}
        return cfg.with_overrides(updates)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, updates: dict) -> "RunConfig":
        vals = {s: dict(v) for s, v in self.values.items()}
        for dotted, raw in updates.items():
            sec, _, key = dotted.partition(".")
            if sec not in SCHEMA or key not in SCHEMA[sec]:
                raise UnknownKeyError(dotted)
            parser = SCHEMA[sec][key][0]
            try:
                vals[sec][key] = parser(raw)
            except ValueError as e:
                raise ConfigError(f"bad value for {dotted}: {raw!r} ({e})") from e
        return RunConfig(vals)

    def __getitem__(self, dotted: str):
        sec, _, key = dotted.partition(".")
        try:
            return self.values[sec][key]
        except KeyError:
            raise UnknownKeyError(dotted) from None

    def to_text(self) -> str:
        lines = []
        for s, keys in SCHEMA.items():
            lines.append(f"[{s}]")
            for k, (_, _, unit) in keys.items():
                lines.append(f"{k} = {_fmt(self.values[s][k])}" + (f"  # {unit}" if unit else ""))
            lines.append("")
        return "\n".join(lines)

    def content_hash(self) -> str:
        """Git-style blob hash of the canonical text form."""
        data = self.to_text().encode()
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def flat(self) -> dict:
        return {f"{s}.{k}": (list(v) if isinstance(v, tuple) else v)
                for s, keys in self.values.items() for k, v in keys.items()}

    # -- domain objects --

    def cavity(self) -> CavityFiberConfig:
        c = self.values["cavity"]
        kw = {k: c[k] for k in ("R1", "R2", "beta_mm", "alpha_loss", "g_B", "lambda_p", "mfd", "w_free")}
        return CavityFiberConfig.from_fiber_length(c["L_fib"], L_free=c["L_free"], n_refr=c["n_refr"], **kw)

    def mech(self, f_m: float | None = None) -> MechOscillator:
        m = self.values["mechanics"]
        return MechOscillator.from_q(m["mass"], m["f_m"] if f_m is None else f_m, m["Q"], m["T_bath"])

    def noise_env(self) -> NoiseEnv:
        n = self.values["noise"]
        L = self.values["cavity"]["L_fib"]
        lam = self.values["cavity"]["lambda_p"]
        env = n["environment"]
        if env == "room":
            return NoiseEnv.room(L, w0=n["w0"], a_f=n["a_f"], lam=lam)
        if env == "cryo77":
            return NoiseEnv.cryo77(L, w0=n["w0"], a_f=n["a_f"], lam=lam)
        raise ConfigError(f"noise.environment must be 'room' or 'cryo77', got {env!r}")

    def sweep(self) -> SweepSpec:
        s = self.values["sweep"]
        return SweepSpec(span_fsr=s["span_fsr"], duration=s["duration"], direction=s["direction"],
                         start_offset_fsr=s["start_offset_fsr"], samples_per_linewidth=s["samples_per_linewidth"])

    def cooling(self) -> CoolingSearchSpec:
        o = self.values["optimizer"]
        c = self.values["cavity"]
        n = self.values["noise"]
        return CoolingSearchSpec(
            L_fib=o["L_fib"], mass=o["mass"], Q=o["Q"], T=o["T"], g_B=o["g_B"], n_refr=c["n_refr"],
            lambda_p=c["lambda_p"], mfd=c["mfd"], kappa_ex_fraction=o["kappa_ex_fraction"],
            power_ratio=(o["power_ratio_min"], o["power_ratio_max"]),
            finesse=(o["finesse_min"], o["finesse_max"]), f_m=(o["f_m_min"], o["f_m_max"]),
            q_min=n["q_min"], thermoptic=n["thermoptic"], seed=o["seed"], popsize=o["popsize"],
            maxiter=o["generations"], tol=o["tol"])


def default_config_text() -> str:
    return RunConfig.defaults().to_text()
