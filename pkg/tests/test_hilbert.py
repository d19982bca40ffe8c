import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from interferoq.errors import (
    DimensionLimitError,
    DimensionMismatch,
    NormalizationError,
    SpecMismatch,
    WireKindMismatch,
)
from interferoq.gates import hadamard, pauli
from interferoq.hilbert import (
    HilbertSpec,
    Operator,
    StateVector,
    apply,
    embed,
    equal_up_to_global_phase,
    inner_product,
    mode,
    qubit,
    tensor,
)

import oracles


def ket(spec, amps, normalized=True):
    return StateVector(spec, amps, normalized=normalized)


Q1 = HilbertSpec.qubits(1)


# --- tensor ---------------------------------------------------------------------


def test_tensor_basis_product():
    s = tensor(StateVector.basis(Q1, [0]), StateVector.basis(Q1, [1]))
    assert s.spec.dims == (2, 2)
    assert np.allclose(s.amplitudes, [0, 1, 0, 0])


def test_tensor_identities():
    eye = tensor(Operator.identity(Q1), Operator.identity(Q1))
    assert np.allclose(eye.matrix, np.eye(4))


def test_tensor_linearity():
    plus = ket(Q1, [1, 1] / np.sqrt(2))
    s = tensor(StateVector.basis(Q1, [0]), plus)
    assert np.allclose(s.amplitudes, np.array([1, 1, 0, 0]) / np.sqrt(2))


def test_dimension_limit(monkeypatch):
    monkeypatch.setenv("INTERFEROQ_MAX_DIM", "16")
    HilbertSpec.qubits(4)
    with pytest.raises(DimensionLimitError):
        HilbertSpec.qubits(5)


def test_spec_validation():
    with pytest.raises(DimensionMismatch):
        mode(0)
    assert qubit().dim == 2 and mode(3).dim == 4
    with pytest.raises(NormalizationError):
        ket(Q1, [1, 1])


# --- apply ------------------------------------------------------------------------


def test_apply_examples():
    one = apply(pauli("x"), [0], StateVector.basis(Q1, [0]))
    assert np.allclose(one.amplitudes, [0, 1])
    plus = apply(hadamard(), [0], StateVector.basis(Q1, [0]))
    assert np.allclose(plus.amplitudes, oracles.H @ [1, 0])


def test_apply_kind_and_dim_errors():
    spec = HilbertSpec((mode(1), qubit()))
    psi = StateVector.basis(spec, [0, 0])
    with pytest.raises(WireKindMismatch):
        apply(pauli("x"), [0], psi)
    with pytest.raises(DimensionMismatch):
        apply(pauli("x"), [5], psi)


@st.composite
def mixed_spec(draw):
    kinds = draw(st.lists(st.sampled_from(["q", 1, 2, 3]), min_size=2, max_size=4))
    return HilbertSpec(tuple(qubit() if k == "q" else mode(k) for k in kinds))


@given(mixed_spec(), st.integers(0, 2**32 - 1), st.booleans())
def test_apply_matches_dense_embedding(spec, seed, diagonal):
    rng = np.random.default_rng(seed)
    t = list(rng.permutation(len(spec))[:2])
    sub = spec.sub(t)
    if diagonal:
        op = Operator(sub, diagonal=np.exp(1j * rng.normal(size=sub.total_dim)))
    else:
        op = Operator(sub, matrix=oracles.random_unitary(sub.total_dim, rng))
    psi = ket(spec, oracles.random_state(spec.total_dim, rng))
    # oracle: permute the targets to the front, kron with identity, permute back
    n = len(spec)
    order = t + [k for k in range(n) if k not in t]
    rest = int(np.prod([spec.dims[k] for k in order[2:]], dtype=int))
    big = np.kron(op.matrix, np.eye(rest))
    tens = psi.amplitudes.reshape(spec.dims).transpose(order).reshape(-1)
    out = (big @ tens).reshape([spec.dims[k] for k in order]).transpose(np.argsort(order)).reshape(-1)
    got = apply(op, t, psi).amplitudes
    assert np.allclose(got, out, atol=1e-12)
    assert np.allclose(embed(op, t, spec).matrix @ psi.amplitudes, out, atol=1e-12)
    assert abs(np.linalg.norm(got) - 1) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_apply_disjoint_targets_factorizes(seed):
    rng = np.random.default_rng(seed)
    spec = HilbertSpec((qubit(), mode(2), qubit()))
    A = Operator(HilbertSpec((qubit(),)), matrix=oracles.random_unitary(2, rng))
    B = Operator(HilbertSpec((mode(2),)), matrix=oracles.random_unitary(3, rng))
    psi = ket(spec, oracles.random_state(spec.total_dim, rng))
    joint = apply(tensor(A, B), [2, 1], psi)
    seq = apply(A, [2], apply(B, [1], psi))
    assert np.allclose(joint.amplitudes, seq.amplitudes, atol=1e-12)


# --- inner products and global phase ------------------------------------------------------


def test_inner_product_examples():
    zero, one = StateVector.basis(Q1, [0]), StateVector.basis(Q1, [1])
    assert inner_product(zero, zero) == 1
    assert inner_product(zero, one) == 0
    spec = HilbertSpec.modes(40).sub([0])
    coh = ket(spec, oracles.coherent(1.0, 41))
    assert abs(inner_product(StateVector.basis(spec, [0]), coh) - np.exp(-0.5)) < 1e-12
    with pytest.raises(SpecMismatch):
        inner_product(zero, coh)


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_inner_product_conjugate_symmetry(seed, d):
    rng = np.random.default_rng(seed)
    spec = HilbertSpec.modes(d - 1)
    a = ket(spec, oracles.random_state(d, rng))
    b = ket(spec, oracles.random_state(d, rng))
    assert np.isclose(inner_product(a, b), np.conj(inner_product(b, a)), atol=1e-14)


def test_global_phase_examples(rng):
    U = oracles.random_unitary(4, rng)
    m = equal_up_to_global_phase(U, np.exp(1j * np.pi / 3) * U, 1e-12)
    assert m.equal and np.isclose(m.phase, np.exp(-1j * np.pi / 3))
    assert not equal_up_to_global_phase(oracles.X, oracles.Z, 1e-12).equal
    assert equal_up_to_global_phase(np.zeros(3), np.zeros(3), 0).equal
    assert not equal_up_to_global_phase(np.ones(3), np.zeros(3), 0.5).equal


@given(st.integers(0, 2**32 - 1), st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_global_phase_is_an_equivalence(seed, t1, t2):
    rng = np.random.default_rng(seed)
    a = oracles.random_state(5, rng)
    b = np.exp(1j * t1) * a
    c = np.exp(1j * t2) * b
    assert equal_up_to_global_phase(a, a, 0).equal
    assert equal_up_to_global_phase(a, b, 1e-12).equal and equal_up_to_global_phase(b, a, 1e-12).equal
    assert equal_up_to_global_phase(a, c, 1e-12).equal
