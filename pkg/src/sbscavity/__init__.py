"""Fiber Fabry-Perot cavity with stimulated Brillouin scattering coupled to a
mechanical oscillator: spatial simulation, single-mode theory and noise budget."""

__version__ = "0.1.0"

from .core import (CavityFiberConfig, ConfigError, DerivedCavity, MechOscillator, SingleModeParams,
                   derive_cavity, single_mode_params)
from .linear import damping_and_shift, damping_curve, steady_state, threshold_power
from .propagator import DriveSpec, FieldLattice, Propagator, run_to_equilibrium

__all__ = [
    "CavityFiberConfig", "ConfigError", "DerivedCavity", "MechOscillator", "SingleModeParams",
    "derive_cavity", "single_mode_params", "damping_and_shift", "damping_curve", "steady_state",
    "threshold_power", "DriveSpec", "FieldLattice", "Propagator", "run_to_equilibrium",
]
