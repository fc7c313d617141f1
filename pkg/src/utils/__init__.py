"""
Lattice, automaton, operator, Fock-space and Grassmann utilities of the fermion automaton.
"""

from .automaton_utils import automaton_step, trajectory
from .evolution_utils import build_step_operator
from .factor_utils import extract_step_operator, local_factor
from .lattice_utils import BitConfig, LatticeSpec, Species

__all__ = [
    "LatticeSpec",
    "BitConfig",
    "Species",
    "automaton_step",
    "trajectory",
    "build_step_operator",
    "local_factor",
    "extract_step_operator",
]
