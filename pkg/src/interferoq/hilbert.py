"""Dense linear algebra over tensor products of qubits and truncated modes.

States and operators are immutable wrappers around numpy arrays.  Operators
act on chosen subsystems through strided tensor contractions, so full-space
matrices are never formed unless explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import TOLERANCES, max_dim
from .errors import (
    DimensionLimitError,
    DimensionMismatch,
    NormalizationError,
    SpecMismatch,
    WireKindMismatch,
)

QUBIT = "qubit"
MODE = "mode"


@dataclass(frozen=True)
class Subsystem:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind == QUBIT and self.dim != 2:
            raise DimensionMismatch(f"qubit subsystem must have dim 2, got {self.dim}")
        if self.kind == MODE and self.dim < 2:
            raise DimensionMismatch(f"mode subsystem needs dim >= 2, got {self.dim}")
        if self.kind not in (QUBIT, MODE):
            raise ValueError(f"unknown subsystem kind {self.kind!r}")

    @property
    def cutoff(self) -> int:
        return self.dim - 1


def qubit() -> Subsystem:
    return Subsystem(QUBIT, 2)


def mode(cutoff: int) -> Subsystem:
    return Subsystem(MODE, int(cutoff) + 1)


@dataclass(frozen=True)
class HilbertSpec:
    """Ordered list of subsystems fixing the tensor-product structure."""

    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))
        total = self.total_dim
        limit = max_dim()
        if total > limit:
            raise DimensionLimitError(
                f"Hilbert space of dimension {total} exceeds limit {limit}"
            )

    @classmethod
    def qubits(cls, n: int) -> "HilbertSpec":
        return cls(tuple(qubit() for _ in range(n)))

    @classmethod
    def modes(cls, *cutoffs: int) -> "HilbertSpec":
        return cls(tuple(mode(c) for c in cutoffs))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(s.kind for s in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def __len__(self) -> int:
        return len(self.subsystems)

    def __add__(self, other: "HilbertSpec") -> "HilbertSpec":
        return HilbertSpec(self.subsystems + other.subsystems)

    def sub(self, indices: Sequence[int]) -> "HilbertSpec":
        return HilbertSpec(tuple(self.subsystems[i] for i in indices))

    def index(self, levels: Sequence[int]) -> int:
        """Flat index of the product basis state with the given per-subsystem levels."""
        if len(levels) != len(self.subsystems):
            raise DimensionMismatch("one level per subsystem required")
        for lvl, d in zip(levels, self.dims):
            if not 0 <= lvl < d:
                raise DimensionMismatch(f"level {lvl} outside range 0..{d - 1}")
        return int(np.ravel_multi_index(tuple(levels), self.dims)) if self.subsystems else 0


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


class StateVector:
    """Complex amplitude vector over a :class:`HilbertSpec`.

    ``normalized=False`` flags an intermediate (e.g. a projected branch) whose
    norm carries a probability weight.
    """

    __slots__ = ("spec", "amplitudes", "normalized")

    def __init__(self, spec: HilbertSpec, amplitudes, normalized: bool = True):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != spec.total_dim:
            raise DimensionMismatch(
                f"{amps.size} amplitudes for a space of dimension {spec.total_dim}"
            )
        if normalized:
            n2 = float(np.vdot(amps, amps).real)
            if abs(n2 - 1.0) > TOLERANCES.norm:
                raise NormalizationError(f"state labelled normalized has norm^2 {n2!r}")
        self.spec = spec
        self.amplitudes = _frozen(amps)
        self.normalized = normalized

    @classmethod
    def basis(cls, spec: HilbertSpec, levels: Sequence[int]) -> "StateVector":
        amps = np.zeros(spec.total_dim, dtype=complex)
        amps[spec.index(levels)] = 1.0
        return cls(spec, amps)

    @classmethod
    def from_unnormalized(cls, spec: HilbertSpec, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise NormalizationError("cannot normalize the zero vector")
        return cls(spec, amps / nrm)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        return StateVector.from_unnormalized(self.spec, self.amplitudes)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.spec.dims)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        return f"StateVector(dims={self.spec.dims}, normalized={self.normalized})"


class Operator:
    """Square operator on a :class:`HilbertSpec`, dense or diagonal.

    Diagonal operators keep only their diagonal; ``matrix`` materializes
    lazily.
    """

    __slots__ = ("spec", "_matrix", "_diagonal")

    def __init__(self, spec: HilbertSpec, matrix=None, diagonal=None):
        n = spec.total_dim
        if (matrix is None) == (diagonal is None):
            raise ValueError("give exactly one of matrix or diagonal")
        if matrix is not None:
            m = np.asarray(matrix, dtype=complex)
            if m.shape != (n, n):
                raise DimensionMismatch(f"matrix shape {m.shape} for dimension {n}")
            self._matrix = _frozen(m)
            self._diagonal = None
        else:
            d = np.asarray(diagonal, dtype=complex).reshape(-1)
            if d.size != n:
                raise DimensionMismatch(f"diagonal of length {d.size} for dimension {n}")
            self._diagonal = _frozen(d)
            self._matrix = None
        self.spec = spec

    @property
    def is_diagonal(self) -> bool:
        return self._diagonal is not None

    @property
    def diagonal(self) -> np.ndarray:
        if self._diagonal is not None:
            return self._diagonal
        return np.diag(self._matrix)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            return np.diag(self._diagonal)
        return self._matrix

    @property
    def dim(self) -> int:
        return self.spec.total_dim

    def dagger(self) -> "Operator":
        if self.is_diagonal:
            return Operator(self.spec, diagonal=self._diagonal.conj())
        return Operator(self.spec, matrix=self._matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if not isinstance(other, Operator):
            return NotImplemented
        if other.spec.dims != self.spec.dims:
            raise SpecMismatch("cannot compose operators on different spaces")
        if self.is_diagonal and other.is_diagonal:
            return Operator(self.spec, diagonal=self._diagonal * other._diagonal)
        return Operator(self.spec, matrix=self.matrix @ other.matrix)

    def __mul__(self, scalar) -> "Operator":
        if self.is_diagonal:
            return Operator(self.spec, diagonal=self._diagonal * scalar)
        return Operator(self.spec, matrix=self._matrix * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(self.spec, matrix=self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        return Operator(self.spec, matrix=self.matrix - other.matrix)

    def unitarity_error(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(np.abs(self._diagonal) ** 2 - 1.0), initial=0.0))
        m = self._matrix
        return float(np.max(np.abs(m.conj().T @ m - np.eye(self.dim)), initial=0.0))

    def hermiticity_error(self) -> float:
        if self.is_diagonal:
            return float(np.max(np.abs(self._diagonal.imag), initial=0.0))
        m = self._matrix
        return float(np.max(np.abs(m - m.conj().T), initial=0.0))

    def is_unitary(self, tol: float = TOLERANCES.unitary) -> bool:
        return self.unitarity_error() <= tol

    def is_hermitian(self, tol: float = TOLERANCES.unitary) -> bool:
        return self.hermiticity_error() <= tol

    def __call__(self, state: StateVector) -> StateVector:
        return apply(self, range(len(self.spec)), state)

    @classmethod
    def identity(cls, spec: HilbertSpec) -> "Operator":
        return cls(spec, diagonal=np.ones(spec.total_dim))

    def __repr__(self) -> str:
        kind = "diagonal" if self.is_diagonal else "dense"
        return f"Operator(dims={self.spec.dims}, {kind})"


def tensor(a, b):
    """Kronecker product of two states or two operators (specs concatenated)."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        spec = a.spec + b.spec
        return StateVector(
            spec, np.kron(a.amplitudes, b.amplitudes), normalized=a.normalized and b.normalized
        )
    if isinstance(a, Operator) and isinstance(b, Operator):
        spec = a.spec + b.spec
        if a.is_diagonal and b.is_diagonal:
            return Operator(spec, diagonal=np.kron(a.diagonal, b.diagonal))
        return Operator(spec, matrix=np.kron(a.matrix, b.matrix))
    raise TypeError("tensor needs two StateVectors or two Operators")


def check_targets(op_spec: HilbertSpec, spec: HilbertSpec, targets: Sequence[int]) -> None:
    if len(set(targets)) != len(targets):
        raise DimensionMismatch(f"repeated target wires {list(targets)}")
    if len(targets) != len(op_spec):
        raise DimensionMismatch(
            f"operator acts on {len(op_spec)} subsystems, {len(targets)} targets given"
        )
    for t, sub in zip(targets, op_spec.subsystems):
        if not 0 <= t < len(spec):
            raise DimensionMismatch(f"target {t} out of range")
        tgt = spec.subsystems[t]
        if tgt.kind != sub.kind:
            raise WireKindMismatch(f"{sub.kind} operator applied to {tgt.kind} wire {t}")
        if tgt.dim != sub.dim:
            raise DimensionMismatch(f"operator dim {sub.dim} on wire {t} of dim {tgt.dim}")


def apply_array(op: Operator, axes: Sequence[int], psi: np.ndarray) -> np.ndarray:
    """Apply ``op`` to the given tensor axes of ``psi`` (extra trailing axes are batch)."""
    axes = list(axes)
    k = len(axes)
    op_dims = op.spec.dims
    if op.is_diagonal:
        shape = [1] * psi.ndim
        for ax, d in zip(axes, op_dims):
            shape[ax] = d
        # diagonal reshaped in operator subsystem order, then permuted to target order
        diag = op.diagonal.reshape(op_dims)
        order = np.argsort(axes)
        diag = np.transpose(diag, order).reshape(shape)
        return psi * diag
    m = op.matrix.reshape(op_dims + op_dims)
    out = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def apply(op: Operator, targets: Sequence[int], state: StateVector) -> StateVector:
    """Apply ``op`` to the subsystems ``targets`` of ``state`` (identity elsewhere)."""
    targets = list(targets)
    check_targets(op.spec, state.spec, targets)
    psi = state.amplitudes.reshape(state.spec.dims)
    out = apply_array(op, targets, psi)
    return StateVector(state.spec, out.reshape(-1), normalized=False)


def embed(op: Operator, targets: Sequence[int], spec: HilbertSpec) -> Operator:
    """Full-space matrix of ``op`` acting on ``targets`` of ``spec``."""
    targets = list(targets)
    check_targets(op.spec, spec, targets)
    n = spec.total_dim
    if op.is_diagonal:
        ones = np.ones(spec.dims, dtype=complex)[..., None]
        return Operator(spec, diagonal=apply_array(op, targets, ones).reshape(-1))
    eye = np.eye(n, dtype=complex).reshape(spec.dims + (n,))
    return Operator(spec, matrix=apply_array(op, targets, eye).reshape(n, n))


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.spec.dims != b.spec.dims or a.spec.kinds != b.spec.kinds:
        raise SpecMismatch("inner product of states on different spaces")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: StateVector, b: StateVector) -> float:
    return abs(inner_product(a, b)) ** 2 / (a.norm() ** 2 * b.norm() ** 2)


@dataclass(frozen=True)
class PhaseMatch:
    equal: bool
    phase: complex | None
    deviation: float

    def __bool__(self) -> bool:
        return self.equal


def _as_array(x) -> np.ndarray:
    if isinstance(x, StateVector):
        return np.asarray(x.amplitudes)
    if isinstance(x, Operator):
        return np.asarray(x.matrix)
    return np.asarray(x, dtype=complex)


def equal_up_to_global_phase(a, b, tol: float = TOLERANCES.equiv_exact) -> PhaseMatch:
    """Is ``a == c * b`` for some unit-modulus ``c``, entrywise within ``tol``?

    ``c`` is read off the largest-magnitude entry of ``b``.
    """
    for x, y in ((a, b), (b, a)):
        if isinstance(x, (StateVector, Operator)) and isinstance(y, (StateVector, Operator)):
            if x.spec.dims != y.spec.dims:
                raise SpecMismatch("comparison of objects on different spaces")
    A = _as_array(a)
    B = _as_array(b)
    if A.shape != B.shape:
        raise SpecMismatch(f"shapes {A.shape} and {B.shape} differ")
    if np.array_equal(A, B):
        return PhaseMatch(True, 1.0 + 0j, 0.0)
    k = int(np.argmax(np.abs(B)))
    bk = B.flat[k]
    if bk == 0:
        dev = float(np.max(np.abs(A), initial=0.0))
        return PhaseMatch(dev <= tol, None if dev > tol else 1.0 + 0j, dev)
    ak = A.flat[k]
    if ak == 0:
        dev = float(np.max(np.abs(A - B), initial=0.0))
        return PhaseMatch(False, None, max(dev, abs(bk)))
    c = ak / bk
    c /= abs(c)
    dev = float(np.max(np.abs(A - c * B), initial=0.0))
    return PhaseMatch(dev <= tol, complex(c) if dev <= tol else None, dev)
