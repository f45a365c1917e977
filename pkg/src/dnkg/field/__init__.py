"""Full damped Klein-Gordon field solver with modulation tracking."""

from .grid import FieldState, Grid
from .evolve import evolve, field_energy
from .modulation import (
    ModulationData,
    SolitonBasis,
    assemble_S,
    build_W,
    decompose,
    diagnostics,
)
from .shooting import ShootResult, run_shooting_candidate, shoot
from .audit import energy_audit

__all__ = [
    "Grid",
    "FieldState",
    "evolve",
    "field_energy",
    "SolitonBasis",
    "ModulationData",
    "assemble_S",
    "decompose",
    "build_W",
    "diagnostics",
    "shoot",
    "run_shooting_candidate",
    "ShootResult",
    "energy_audit",
]
