"""Numerical lab for quasi-periodic Schrodinger operators on Z^2 with two frequencies
and a low-complexity background interaction."""

__version__ = "0.1.0"

from .arithmetic import continued_fraction, diophantine_check, lattice_points_in_band, torus_norm
from .green import Resolvent, ResonantEnergyError, classify, green
from .interaction import Zero, hubbard
from .localization import decay_profile, eigensolve, mid_spectrum_states
from .operator import Region, assemble, make_region, square
from .potential import FourierPotential, classify_symmetry, preset

__all__ = [
    "FourierPotential", "Region", "Resolvent", "ResonantEnergyError", "Zero", "assemble",
    "classify", "classify_symmetry", "continued_fraction", "decay_profile", "diophantine_check",
    "eigensolve", "green", "hubbard", "lattice_points_in_band", "make_region", "mid_spectrum_states",
    "preset", "square", "torus_norm",
]
