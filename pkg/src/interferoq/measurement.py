"""Measurement semantics: Born distributions, classical post-processing and
the measurement rewrites (conjugated observables, outcome permutations,
X_N and modal-SWAP readouts).

Outcome values are plain Python numbers: ``int`` for qubit ``z`` (+1/-1) and
photon counts, ``float`` for generic observable eigenvalues (``int`` when the
eigenvalue is integral).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .config import TOLERANCES
from .errors import (
    ClassicalError,
    DimensionMismatch,
    IncompatibleQuery,
    NonHermitianObservable,
    NormalizationError,
    OutsideSubspace,
    WireKindMismatch,
)
from .gates import beamsplitter, subspace_gate
from .hilbert import MODE, HilbertSpec, Operator, StateVector, Subsystem, apply_array, check_targets

SIGN = "sign"
INT = "int"
REAL = "real"
ALPHABETS = (SIGN, INT, REAL)


def clean_value(v):
    """Canonical Python scalar for an outcome value."""
    v = complex(v)
    r = v.real
    if abs(v.imag) > 1e-9:
        raise ClassicalError(f"complex classical value {v!r}")
    nearest = round(r)
    if abs(r - nearest) <= 1e-9:
        return int(nearest)
    return float(r)


# --- measurement specs ---------------------------------------------------------


@dataclass(frozen=True)
class MeasurementSpec:
    """One measurement. ``wires`` index subsystems of the state it acts on."""

    kind: str  # "z" | "count" | "obs" | "discard"
    wires: tuple[int, ...]
    label: str | None = None
    observable: Operator | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind not in ("z", "count", "obs", "discard"):
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.kind in ("z", "count") and len(self.wires) != 1:
            raise DimensionMismatch(f"{self.kind} measurement acts on exactly one wire")
        if self.kind == "obs":
            if self.observable is None:
                raise ValueError("observable measurement needs an operator")
            if not self.observable.is_hermitian():
                raise NonHermitianObservable(
                    f"observable deviates from Hermitian by {self.observable.hermiticity_error():.2e}"
                )
        if self.kind == "discard" and self.label is not None:
            raise ValueError("a discard produces no classical wire")


def QubitZ(wire: int, label: str = "z") -> MeasurementSpec:
    return MeasurementSpec("z", (wire,), label)


def PhotonCount(wire: int, label: str = "n") -> MeasurementSpec:
    return MeasurementSpec("count", (wire,), label)


def Observable(op: Operator, wires: Sequence[int], label: str = "o") -> MeasurementSpec:
    return MeasurementSpec("obs", tuple(wires), label, op)


def Discard(wires: Sequence[int]) -> MeasurementSpec:
    return MeasurementSpec("discard", tuple(wires), None)


@dataclass(frozen=True)
class Eigenspaces:
    """Eigen-decomposition of a Hermitian operator with degenerate values merged."""

    values: tuple
    basis: np.ndarray  # unitary; columns grouped by value
    groups: tuple[np.ndarray, ...]  # column indices per value

    def index_values(self) -> list:
        """Outcome value for each column of ``basis``."""
        out = [None] * self.basis.shape[1]
        for val, cols in zip(self.values, self.groups):
            for c in cols:
                out[c] = val
        return out


def eigenspaces(op: Operator, eig_tol: float = TOLERANCES.eig) -> Eigenspaces:
    if not op.is_hermitian():
        raise NonHermitianObservable("observable is not Hermitian")
    if op.is_diagonal:
        w = op.diagonal.real
        V = np.eye(op.dim, dtype=complex)
    else:
        m = op.matrix
        w, V = np.linalg.eigh(0.5 * (m + m.conj().T))
    order = np.argsort(w, kind="stable")
    groups, values = [], []
    start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or w[order[i]] - w[order[start]] > eig_tol:
            cols = order[start:i]
            groups.append(np.asarray(cols))
            values.append(clean_value(np.mean(w[cols])))
            start = i
    return Eigenspaces(tuple(values), V, tuple(groups))


# --- outcome distributions -----------------------------------------------------


class OutcomeDistribution:
    """Joint distribution over tuples of classical values, keyed in ``labels`` order."""

    def __init__(
        self,
        labels: Sequence[str],
        probs: Mapping[tuple, float],
        states: Mapping[tuple, StateVector] | None = None,
        dropped_mass: float = 0.0,
    ):
        self.labels = tuple(labels)
        clean = {}
        for key, p in probs.items():
            key = tuple(key)
            if len(key) != len(self.labels):
                raise DimensionMismatch(f"outcome {key} does not match labels {self.labels}")
            p = float(p)
            if p < -TOLERANCES.prob_clamp:
                raise NormalizationError(f"negative probability {p} for outcome {key}")
            clean[key] = clean.get(key, 0.0) + max(p, 0.0)
        total = sum(clean.values()) + dropped_mass
        if abs(total - 1.0) > TOLERANCES.norm:
            raise NormalizationError(f"probabilities sum to {total!r}")
        self.probs = dict(sorted(clean.items(), key=lambda kv: _sort_key(kv[0])))
        self.states = dict(states) if states else {}
        self.dropped_mass = float(dropped_mass)

    def __repr__(self) -> str:
        return f"OutcomeDistribution(labels={self.labels}, outcomes={len(self.probs)})"

    def __getitem__(self, key) -> float:
        if not isinstance(key, tuple):
            key = (key,)
        return self.probs.get(key, 0.0)

    def items(self):
        return self.probs.items()

    def _pos(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ClassicalError(f"no classical wire {label!r} in {self.labels}") from None

    def marginal(self, labels: Sequence[str] | str) -> "OutcomeDistribution":
        if isinstance(labels, str):
            labels = (labels,)
        pos = [self._pos(lbl) for lbl in labels]
        out: dict[tuple, float] = {}
        for key, p in self.probs.items():
            k = tuple(key[i] for i in pos)
            out[k] = out.get(k, 0.0) + p
        return OutcomeDistribution(labels, out, dropped_mass=self.dropped_mass)

    def conditional(self, label: str, value) -> "OutcomeDistribution":
        """Distribution of the other labels given ``label == value``."""
        i = self._pos(label)
        rest = [lbl for lbl in self.labels if lbl != label]
        sub = {}
        for key, p in self.probs.items():
            if key[i] == value:
                k = tuple(v for j, v in enumerate(key) if j != i)
                sub[k] = sub.get(k, 0.0) + p
        mass = sum(sub.values())
        if mass == 0:
            raise ClassicalError(f"{label}={value!r} has probability zero")
        return OutcomeDistribution(rest, {k: p / mass for k, p in sub.items()})

    def expectation(self, label: str | None = None, fn: Callable | None = None) -> float:
        label = label or self.labels[-1]
        i = self._pos(label)
        f = fn or (lambda v: v)
        return float(sum(p * f(key[i]) for key, p in self.probs.items()))

    def variance(self, label: str | None = None) -> float:
        mean = self.expectation(label)
        return max(self.expectation(label, lambda v: v * v) - mean * mean, 0.0)

    def std(self, label: str | None = None) -> float:
        return float(np.sqrt(self.variance(label)))

    def tv_distance(self, other: "OutcomeDistribution") -> float:
        if set(self.labels) != set(other.labels):
            raise IncompatibleQuery(f"labels {self.labels} vs {other.labels}")
        o = other.marginal(self.labels) if other.labels != self.labels else other
        keys = set(self.probs) | set(o.probs)
        return 0.5 * sum(abs(self[k] - o[k]) for k in keys)


def _sort_key(key: tuple):
    return tuple((0, v) if isinstance(v, (int, float)) else (1, str(v)) for v in key)


# --- single-shot measurement of a state ----------------------------------------


def branches(psi: np.ndarray, spec: MeasurementSpec, dims: Sequence[int]):
    """Yield ``(value, projected tensor)`` for every outcome with nonzero weight.

    ``psi`` has one axis per subsystem (``dims``), possibly plus batch axes.
    """
    if spec.kind == "discard":
        yield None, psi
        return
    if spec.kind in ("z", "count"):
        (w,) = spec.wires
        for level in range(dims[w]):
            proj = np.zeros_like(psi)
            idx = [slice(None)] * psi.ndim
            idx[w] = level
            proj[tuple(idx)] = psi[tuple(idx)]
            if not np.any(proj):
                continue
            yield ((1 - 2 * level) if spec.kind == "z" else level), proj
        return
    es = eigenspaces(spec.observable)
    for val, cols in zip(es.values, es.groups):
        Vg = es.basis[:, cols]
        proj_op = Operator(spec.observable.spec, matrix=Vg @ Vg.conj().T)
        out = apply_array(proj_op, spec.wires, psi)
        if np.any(out):
            yield val, out


def measure(
    state: StateVector, spec: MeasurementSpec, keep_states: bool = False
) -> OutcomeDistribution:
    """Born distribution of one measurement; optionally the normalized post-measurement states."""
    if spec.kind == "z":
        check_targets(HilbertSpec.qubits(1), state.spec, spec.wires)
    elif spec.kind == "count":
        w = spec.wires[0]
        if not 0 <= w < len(state.spec) or state.spec.kinds[w] != MODE:
            raise WireKindMismatch(f"photon count on non-mode wire {w}")
    elif spec.kind == "obs":
        check_targets(spec.observable.spec, state.spec, spec.wires)
    psi = state.amplitudes.reshape(state.spec.dims)
    norm2 = float(np.vdot(psi, psi).real)
    if spec.kind == "discard":
        return OutcomeDistribution((), {(): 1.0})
    probs, states = {}, {}
    for val, proj in branches(psi, spec, state.spec.dims):
        p = float(np.vdot(proj, proj).real) / norm2
        probs[(val,)] = probs.get((val,), 0.0) + p
        if keep_states:
            states[(val,)] = StateVector.from_unnormalized(state.spec, proj)
    return OutcomeDistribution((spec.label,), probs, states if keep_states else None)


# --- classical gates -----------------------------------------------------------


@dataclass(frozen=True)
class ClassicalGate:
    """Deterministic classical function of measured values.

    kinds: ``sum``, ``diff`` (first minus second), ``product``, ``parity``
    (count -> (-1)^n), ``mapcount`` (0 -> +1, N -> -1), ``cexchange``
    (inputs (n, y): swap counts 0 and N when y equals ``trigger``) and
    ``table`` (explicit lookup).
    """

    kind: str
    N: int | None = None
    trigger: int = -1
    table: tuple = ()
    out_alphabet: str | None = None

    def __post_init__(self):
        if self.kind not in ("sum", "diff", "product", "parity", "mapcount", "cexchange", "table"):
            raise ValueError(f"unknown classical gate {self.kind!r}")
        if self.kind in ("mapcount", "cexchange") and (self.N is None or self.N < 1):
            raise ValueError(f"{self.kind} needs N >= 1")
        if self.kind == "cexchange" and self.trigger not in (1, -1):
            raise ValueError("cexchange trigger must be +1 or -1")

    @property
    def arity(self) -> int | None:
        return {"parity": 1, "mapcount": 1, "cexchange": 2, "diff": 2}.get(self.kind)

    def output_alphabet(self, in_alphabets: Sequence[str]) -> str:
        k = self.kind
        if k in ("parity", "mapcount"):
            return SIGN
        if k == "cexchange":
            return INT
        if k == "table":
            return self.out_alphabet or REAL
        if REAL in in_alphabets:
            return REAL
        if k == "product" and all(a == SIGN for a in in_alphabets):
            return SIGN
        return INT

    def accepts(self, in_alphabets: Sequence[str]) -> bool:
        k = self.kind
        n = self.arity
        if n is not None and len(in_alphabets) != n:
            return False
        if not in_alphabets:
            return False
        if k in ("parity", "mapcount"):
            return in_alphabets[0] == INT
        if k == "cexchange":
            return tuple(in_alphabets) == (INT, SIGN)
        return True

    def __call__(self, *values):
        k = self.kind
        if self.arity is not None and len(values) != self.arity:
            raise ClassicalError(f"{k} takes {self.arity} inputs, got {len(values)}")
        if k == "sum":
            return clean_value(sum(values))
        if k == "diff":
            return clean_value(values[0] - values[1])
        if k == "product":
            return clean_value(np.prod(values))
        if k == "parity":
            n = _count(values[0])
            return 1 - 2 * (n % 2)
        if k == "mapcount":
            n = _count(values[0])
            if n == 0:
                return 1
            if n == self.N:
                return -1
            raise ClassicalError(f"mapcount({self.N}) undefined on count {n}")
        if k == "cexchange":
            n, y = _count(values[0]), values[1]
            if y not in (1, -1):
                raise ClassicalError(f"cexchange control must be +1/-1, got {y!r}")
            if y == self.trigger and n in (0, self.N):
                return self.N - n
            return n
        lookup = dict(self.table)
        key = values if len(values) > 1 else values[0]
        if key not in lookup:
            raise ClassicalError(f"value {key!r} outside table domain")
        return lookup[key]


def _count(v) -> int:
    if not isinstance(v, (int, np.integer)) or v < 0:
        raise ClassicalError(f"expected a photon count, got {v!r}")
    return int(v)


def postprocess(
    dist: OutcomeDistribution, gate: ClassicalGate, inputs: Sequence[str], output: str
) -> OutcomeDistribution:
    """Push ``dist`` forward through ``gate``; the result gains the ``output`` label."""
    if output in dist.labels:
        raise ClassicalError(f"classical wire {output!r} already written")
    pos = [dist._pos(lbl) for lbl in inputs]
    out: dict[tuple, float] = {}
    for key, p in dist.probs.items():
        v = gate(*(key[i] for i in pos))
        k = key + (v,)
        out[k] = out.get(k, 0.0) + p
    return OutcomeDistribution(dist.labels + (output,), out, dropped_mass=dist.dropped_mass)


# --- rewrites ------------------------------------------------------------------


def conjugate_observable(U: Operator, O: Operator) -> Operator:
    """``U^dag O U``: measuring it on psi equals measuring O on U psi."""
    if not O.is_hermitian():
        raise NonHermitianObservable("observable is not Hermitian")
    out = U.dagger() @ O @ U
    return Operator(O.spec, matrix=0.5 * (out.matrix + out.matrix.conj().T))


def permute_outcomes(P: Operator, O: Operator, support: np.ndarray | None = None, tol: float = 1e-9):
    """Outcome table ``{lambda: mu}`` such that measuring ``P^dag O P`` equals measuring O
    and relabelling ``lambda -> mu``, eigenspace by eigenspace.

    ``support`` (columns spanning an invariant subspace) restricts the check.
    """
    Q = conjugate_observable(P, O).matrix
    Om = O.matrix
    if support is not None:
        B = np.asarray(support, dtype=complex)
        B, _ = np.linalg.qr(B)
        for M in (Om, Q):
            if np.linalg.norm(M @ B - B @ (B.conj().T @ M @ B)) > tol:
                raise OutsideSubspace("support is not invariant under the observables")
        Om = B.conj().T @ Om @ B
        Q = B.conj().T @ Q @ B
    es = eigenspaces(Operator(_flat_spec(Om.shape[0]), matrix=Om))
    table = {}
    for val, cols in zip(es.values, es.groups):
        Vg = es.basis[:, cols]
        QV = Q @ Vg
        mu = np.trace(Vg.conj().T @ QV).real / len(cols)
        if np.linalg.norm(QV - mu * Vg) > tol:
            raise IncompatibleQuery(f"eigenspace {val} of O is not an eigenspace of P^dag O P")
        table[val] = clean_value(mu)
    if sorted(table.values()) != sorted(table.keys()):
        raise IncompatibleQuery("eigenvalues are not permuted")
    return table


def _flat_spec(dim: int) -> HilbertSpec:
    return HilbertSpec((Subsystem(MODE, dim),)) if dim != 2 else HilbertSpec.qubits(1)


def measure_xn(state: StateVector, N: int, wire: int, check_support: bool = True) -> OutcomeDistribution:
    """Measure X_N on a mode as H_N, photon counting, then 0 -> +1 and N -> -1."""
    if state.spec.kinds[wire] != MODE:
        raise WireKindMismatch(f"X_N readout on non-mode wire {wire}")
    dim = state.spec.dims[wire]
    psi = state.amplitudes.reshape(state.spec.dims)
    if check_support:
        mask = np.ones(dim, dtype=bool)
        mask[[0, N]] = False
        idx = [slice(None)] * psi.ndim
        idx[wire] = mask
        outside = float(np.linalg.norm(psi[tuple(idx)]))
        if outside > TOLERANCES.sym:
            raise OutsideSubspace(f"state has weight {outside:.2e} outside span{{|0>,|{N}>}}")
    rotated = StateVector(state.spec, apply_array(subspace_gate("H", N, dim), [wire], psi), normalized=False)
    counts = measure(rotated, PhotonCount(wire, "n"))
    return postprocess(counts, ClassicalGate("mapcount", N), ["n"], "z").marginal("z")


def modal_swap_beamsplitter(mode_spec: HilbertSpec) -> Operator:
    """The 50/50 beamsplitter ``exp(i J_y pi/2)`` that maps SWAP onto mode-1 parity."""
    return beamsplitter(mode_spec, equatorial_phase=-np.pi / 2)


def measure_modal_swap(state: StateVector, wires: Sequence[int]) -> OutcomeDistribution:
    """Measure the modal SWAP as a beamsplitter followed by mode-1 photon-count parity."""
    wires = list(wires)
    sub = state.spec.sub(wires)
    if len(wires) != 2 or any(k != MODE for k in sub.kinds):
        raise WireKindMismatch("modal SWAP readout needs two mode wires")
    U = modal_swap_beamsplitter(sub)
    psi = apply_array(U, wires, state.amplitudes.reshape(state.spec.dims))
    counts = measure(StateVector(state.spec, psi, normalized=False), PhotonCount(wires[1], "n"))
    return postprocess(counts, ClassicalGate("parity"), ["n"], "z").marginal("z")


__all__ = [
    "ALPHABETS",
    "ClassicalGate",
    "Discard",
    "INT",
    "MeasurementSpec",
    "Observable",
    "OutcomeDistribution",
    "PhotonCount",
    "QubitZ",
    "REAL",
    "SIGN",
    "branches",
    "clean_value",
    "conjugate_observable",
    "eigenspaces",
    "measure",
    "measure_modal_swap",
    "measure_xn",
    "modal_swap_beamsplitter",
    "permute_outcomes",
    "postprocess",
]
