"""Numerical tolerances and size limits shared by every module."""

import os
from dataclasses import dataclass

DEFAULT_MAX_DIM = 2**24


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-10
    unitary: float = 1e-10
    sym: float = 1e-10
    eig: float = 1e-8
    tail: float = 1e-12
    branch_prune: float = 0.0
    deriv_floor: float = 1e-8
    fd_step: float = 1e-5
    equiv_exact: float = 1e-9
    equiv_coherent: float = 1e-6
    prob_clamp: float = 1e-14


TOLERANCES = Tolerances()


def max_dim() -> int:
    """Largest admissible Hilbert-space dimension (``INTERFEROQ_MAX_DIM`` overrides)."""
    raw = os.environ.get("INTERFEROQ_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    value = int(raw)
    if value < 1:
        raise ValueError(f"INTERFEROQ_MAX_DIM must be positive, got {raw!r}")
    return value
