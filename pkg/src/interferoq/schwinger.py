"""Dictionary between symmetric N-qubit states and two-mode Fock states.

The N-photon sector basis is ordered by ``n1`` ascending: row ``k`` of a
:class:`SectorMap` isometry is ``|N-k, k>`` and pairs with the Dicke state
having ``k`` qubits in ``|1>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .config import TOLERANCES
from .errors import DimensionMismatch, NonSymmetricInput, NotInSector
from .hilbert import MODE, HilbertSpec, Operator, StateVector

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class DickeIndex:
    N: int
    n1: int

    def __post_init__(self):
        if self.N < 1 or not 0 <= self.n1 <= self.N:
            raise ValueError(f"invalid Dicke index N={self.N}, n1={self.n1}")

    @property
    def n0(self) -> int:
        return self.N - self.n1


@lru_cache(maxsize=None)
def _dicke_amplitudes(N: int, n1: int) -> np.ndarray:
    amps = np.zeros(2**N, dtype=complex)
    for ones in combinations(range(N), n1):
        idx = sum(1 << (N - 1 - q) for q in ones)
        amps[idx] = 1.0
    amps /= np.sqrt(comb(N, n1))
    amps.setflags(write=False)
    return amps


def dicke_state(idx: DickeIndex | tuple[int, int]) -> StateVector:
    """Symmetric N-qubit state with ``n1`` qubits in ``|1>``."""
    if not isinstance(idx, DickeIndex):
        idx = DickeIndex(*idx)
    return StateVector(HilbertSpec.qubits(idx.N), _dicke_amplitudes(idx.N, idx.n1))


def fock_state(n0: int, n1: int, mode_spec: HilbertSpec) -> StateVector:
    """Two-mode Fock basis state ``|n0, n1>``."""
    _check_two_mode(mode_spec)
    c0, c1 = (s.cutoff for s in mode_spec.subsystems)
    if not (0 <= n0 <= c0 and 0 <= n1 <= c1):
        raise DimensionMismatch(f"|{n0},{n1}> exceeds cutoffs ({c0},{c1})")
    return StateVector.basis(mode_spec, (n0, n1))


def _check_two_mode(spec: HilbertSpec) -> None:
    if len(spec) != 2 or any(k != MODE for k in spec.kinds):
        raise DimensionMismatch("expected a two-mode HilbertSpec")


def ladder(dim: int) -> np.ndarray:
    """Truncated annihilation operator on Fock levels ``0..dim-1``."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def _modal_j(axis: str, d0: int, d1: int) -> np.ndarray:
    a = np.kron(ladder(d0), np.eye(d1))
    b = np.kron(np.eye(d0), ladder(d1))
    ad, bd = a.conj().T, b.conj().T
    if axis == "x":
        return 0.5 * (ad @ b + bd @ a)
    if axis == "y":
        return -0.5j * (ad @ b - bd @ a)
    if axis == "z":
        return 0.5 * (ad @ a - bd @ b)
    raise ValueError(f"axis must be x, y or z, got {axis!r}")


def _qubit_j(axis: str, N: int) -> np.ndarray:
    if axis not in _PAULI:
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    total = np.zeros((2**N, 2**N), dtype=complex)
    for j in range(N):
        term = np.array([[1.0 + 0j]])
        for k in range(N):
            term = np.kron(term, _PAULI[axis] if k == j else np.eye(2))
        total += term
    return 0.5 * total


def j_operator(axis: str, rep: int | HilbertSpec) -> Operator:
    """Angular-momentum component for ``rep`` = N qubits or a two-mode spec."""
    if isinstance(rep, HilbertSpec):
        _check_two_mode(rep)
        d0, d1 = rep.dims
        m = _modal_j(axis, d0, d1)
        if axis == "z":
            return Operator(rep, diagonal=np.diag(m))
        return Operator(rep, matrix=m)
    N = int(rep)
    if N < 1:
        raise ValueError("need at least one qubit")
    return Operator(HilbertSpec.qubits(N), matrix=_qubit_j(axis, N))


def sector_indices(N: int, mode_spec: HilbertSpec) -> np.ndarray:
    """Flat indices of ``|N-k, k>``, k = 0..N, in ``mode_spec``."""
    _check_two_mode(mode_spec)
    c0, c1 = (s.cutoff for s in mode_spec.subsystems)
    if N > c0 or N > c1:
        raise DimensionMismatch(f"cutoffs ({c0},{c1}) below photon number {N}")
    return np.array([mode_spec.index((N - k, k)) for k in range(N + 1)])


@dataclass(frozen=True)
class SectorMap:
    """Isometry from the symmetric subspace of N qubits onto the N-photon sector."""

    N: int
    mode_spec: HilbertSpec = None
    isometry: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.mode_spec is None:
            object.__setattr__(self, "mode_spec", HilbertSpec.modes(self.N, self.N))
        sector_indices(self.N, self.mode_spec)
        iso = np.stack([_dicke_amplitudes(self.N, k).conj() for k in range(self.N + 1)])
        iso.setflags(write=False)
        object.__setattr__(self, "isometry", iso)

    @property
    def qubit_spec(self) -> HilbertSpec:
        return HilbertSpec.qubits(self.N)

    @property
    def indices(self) -> np.ndarray:
        return sector_indices(self.N, self.mode_spec)

    def sector_basis(self) -> np.ndarray:
        """Columns are the sector Fock states in the full two-mode space."""
        B = np.zeros((self.mode_spec.total_dim, self.N + 1), dtype=complex)
        B[self.indices, np.arange(self.N + 1)] = 1.0
        return B

    def symmetric_basis(self) -> np.ndarray:
        """Columns are the Dicke states, ordered by ``n1``."""
        return self.isometry.conj().T

    def restrict_modes(self, op: Operator) -> np.ndarray:
        """(N+1)x(N+1) block of a two-mode operator on the sector."""
        idx = self.indices
        return op.matrix[np.ix_(idx, idx)]

    def restrict_qubits(self, op: Operator) -> np.ndarray:
        """(N+1)x(N+1) block of an N-qubit operator on the symmetric subspace."""
        V = self.symmetric_basis()
        return V.conj().T @ op.matrix @ V


def symmetric_residual(N: int, amps: np.ndarray) -> float:
    V = SectorMap(N).symmetric_basis()
    return float(np.linalg.norm(amps - V @ (V.conj().T @ amps)))


def symmetric_to_modes(sm: SectorMap, psi: StateVector) -> StateVector:
    if psi.spec.dims != sm.qubit_spec.dims:
        raise DimensionMismatch(f"expected {sm.N} qubits")
    amps = psi.amplitudes
    coeffs = sm.isometry @ amps
    resid = np.linalg.norm(amps - sm.symmetric_basis() @ coeffs)
    if resid > TOLERANCES.sym:
        raise NonSymmetricInput(f"component outside symmetric subspace has norm {resid:.3e}")
    out = np.zeros(sm.mode_spec.total_dim, dtype=complex)
    out[sm.indices] = coeffs
    return StateVector(sm.mode_spec, out, normalized=psi.normalized)


def modes_to_symmetric(sm: SectorMap, psi: StateVector) -> StateVector:
    if psi.spec.dims != sm.mode_spec.dims:
        raise DimensionMismatch("state not on the map's two-mode space")
    amps = psi.amplitudes
    coeffs = amps[sm.indices]
    outside = np.ones(amps.size, dtype=bool)
    outside[sm.indices] = False
    resid = float(np.linalg.norm(amps[outside]))
    if resid > TOLERANCES.sym:
        raise NotInSector(f"component outside the {sm.N}-photon sector has norm {resid:.3e}")
    return StateVector(sm.qubit_spec, sm.symmetric_basis() @ coeffs, normalized=psi.normalized)
