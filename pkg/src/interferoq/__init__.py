"""Simulation and equivalence checking for hybrid qubit/bosonic-mode
interferometry circuits."""

from .config import TOLERANCES, Tolerances, max_dim
from .errors import InterferoqError

__all__ = ["TOLERANCES", "Tolerances", "max_dim", "InterferoqError"]
__version__ = "0.1.0"
