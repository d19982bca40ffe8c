import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from interferoq.errors import CutoffTooSmall, DimensionMismatch, NonUnitAxis
from interferoq.gates import (
    GATES,
    beamsplitter,
    build_gate,
    controlled,
    cross_kerr,
    differential_phase,
    displacement,
    guard_margin,
    guarded_block,
    hadamard,
    modal_swap,
    parity,
    pauli,
    phase_shifter,
    poisson_tail,
    policy_cutoff,
    rotation_modes,
    rotation_qubit,
    s_gate,
    self_kerr,
    subspace_gate,
)
from interferoq.hilbert import HilbertSpec, Operator, equal_up_to_global_phase, tensor
from interferoq.schwinger import SectorMap, fock_state, j_operator

import oracles

unit_vectors = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)
amplitudes = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


# --- qubit rotations ----------------------------------------------------------------------


def test_rotation_qubit_examples():
    assert np.allclose(rotation_qubit((1, 0, 0), 0).matrix, np.eye(2))
    assert np.allclose(rotation_qubit((1, 0, 0), np.pi / 2).matrix, np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2))
    assert np.allclose(rotation_qubit((1, 0, 0), np.pi).matrix, [[0, -1j], [-1j, 0]])
    with pytest.raises(NonUnitAxis):
        rotation_qubit((1, 1, 0), 0.3)


@given(unit_vectors, st.floats(-4 * np.pi, 4 * np.pi))
def test_rotation_qubit_matches_expm(n, theta):
    n = np.asarray(n) / np.linalg.norm(n)
    assert np.allclose(rotation_qubit(n, theta).matrix, oracles.qubit_rotation(n, theta), atol=1e-12)


def test_quarter_y_rotation_identities():
    R = rotation_qubit((0, 1, 0), np.pi / 2).matrix
    H, X, Z = hadamard().matrix, pauli("x").matrix, pauli("z").matrix
    assert np.allclose(R, H @ Z) and np.allclose(R, X @ H)
    assert np.allclose(s_gate().matrix @ s_gate().matrix, Z)


# --- two-mode rotations -------------------------------------------------------------------


def test_rotation_modes_examples():
    spec = HilbertSpec.modes(4, 4)
    assert np.allclose(rotation_modes((1, 0, 0), 0, spec).matrix, np.eye(25))
    bs = rotation_modes((1, 0, 0), np.pi / 2, spec)
    out = bs.matrix @ fock_state(1, 0, spec).amplitudes
    want = (fock_state(1, 0, spec).amplitudes - 1j * fock_state(0, 1, spec).amplitudes) / np.sqrt(2)
    assert np.allclose(out, want)
    from math import comb

    out = bs.matrix @ fock_state(4, 0, spec).amplitudes
    probs = [abs(out[spec.index((4 - k, k))]) ** 2 for k in range(5)]
    assert np.allclose(probs, [comb(4, k) / 16 for k in range(5)])


@given(unit_vectors, st.floats(-2 * np.pi, 2 * np.pi), st.integers(1, 4), st.integers(1, 4))
def test_rotation_modes_matches_expm(n, theta, c0, c1):
    n = np.asarray(n) / np.linalg.norm(n)
    spec = HilbertSpec.modes(c0, c1)
    got = rotation_modes(n, theta, spec)
    want = oracles.modal_rotation(n, theta, c0 + 1, c1 + 1)
    assert np.allclose(got.matrix, want, atol=1e-10)
    assert got.is_unitary()


@given(unit_vectors, st.floats(-np.pi, np.pi), amplitudes, amplitudes)
def test_beamsplitter_maps_coherent_to_coherent(n, theta, a, b):
    n = np.asarray(n) / np.linalg.norm(n)
    c = 40
    spec = HilbertSpec.modes(c, c)
    ap, bp = rotation_qubit(n, theta).matrix @ [a, b]
    # keep every amplitude well below the cutoff
    if max(abs(a), abs(b), abs(ap), abs(bp)) > 2.5:
        return
    psi = np.kron(oracles.coherent(a, c + 1), oracles.coherent(b, c + 1))
    want = np.kron(oracles.coherent(ap, c + 1), oracles.coherent(bp, c + 1))
    out = rotation_modes(n, theta, spec).matrix @ psi
    assert abs(np.vdot(want, out)) ** 2 >= 1 - 1e-8


@given(unit_vectors, st.integers(1, 5))
def test_full_turn_is_parity_product(n, N):
    n = np.asarray(n) / np.linalg.norm(n)
    sm = SectorMap(N)
    R = rotation_modes(n, 2 * np.pi, sm.mode_spec)
    PP = tensor(parity(N + 1), parity(N + 1))
    assert np.allclose(sm.restrict_modes(R), sm.restrict_modes(PP), atol=1e-10)


def test_beamsplitter_phase_axis():
    spec = HilbertSpec.modes(3, 3)
    assert np.allclose(beamsplitter(spec).matrix, rotation_modes((1, 0, 0), np.pi / 2, spec).matrix)
    assert np.allclose(beamsplitter(spec, np.pi / 2).matrix, rotation_modes((0, 1, 0), np.pi / 2, spec).matrix)


# --- single-mode diagonal gates --------------------------------------------------------------


def test_phase_shifter():
    assert np.allclose(phase_shifter(0, 5).matrix, np.eye(5))
    v = np.zeros(5)
    v[3] = 1
    assert np.allclose(phase_shifter(0.7, 5).matrix @ v, np.exp(-3j * 0.7) * v)


@given(st.floats(-np.pi, np.pi), st.integers(1, 5), st.integers(1, 5))
def test_differential_phase_splits(phi, c0, c1):
    spec = HilbertSpec.modes(c0, c1)
    want = np.kron(phase_shifter(phi / 2, c0 + 1).matrix, phase_shifter(-phi / 2, c1 + 1).matrix)
    assert np.allclose(differential_phase(phi, spec).matrix, want, atol=1e-12)
    # and it is exp(-i J_z phi)
    from scipy.linalg import expm

    assert np.allclose(want, expm(-1j * phi * oracles.schwinger("z", c0 + 1, c1 + 1)), atol=1e-12)


def test_parity_and_kerr():
    P = parity(6).matrix
    assert P[0, 0] == 1 and P[3, 3] == -1
    assert np.allclose(P @ P, np.eye(6))
    assert np.allclose(self_kerr(0, 6).matrix, np.eye(6))
    assert np.allclose(self_kerr(0.3, 6).diagonal, np.exp(-0.3j * np.arange(6) ** 2))
    spec = HilbertSpec.modes(3, 2)
    ck = cross_kerr(0.4, spec)
    for n0 in range(4):
        for n1 in range(3):
            i = spec.index((n0, n1))
            assert np.isclose(ck.diagonal[i], np.exp(-0.4j * n0 * n1))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5 + 1j, 2j, 3.0])
def test_kerr_makes_yurke_stoler_cat(alpha):
    dim = policy_cutoff(abs(alpha)) + 1
    coh = displacement(alpha, dim).matrix[:, 0]
    minus = displacement(-alpha, dim).matrix[:, 0]
    out = self_kerr(np.pi / 2, dim).matrix @ coh
    want = np.exp(-1j * np.pi / 4) * (coh + 1j * minus) / np.sqrt(2)
    assert 1 - abs(np.vdot(want, out)) ** 2 / np.vdot(want, want).real <= 1e-10
    assert np.max(np.abs(want - out)) < 1e-10


# --- displacement -------------------------------------------------------------------------------


def test_displacement_examples():
    assert np.allclose(displacement(0, 8).matrix, np.eye(8))
    dim = policy_cutoff(np.sqrt(2)) + 1
    g = guarded_block(np.sqrt(2), dim)
    col = displacement(np.sqrt(2), dim).matrix[:, 0]
    assert np.allclose(col[:g], oracles.coherent(np.sqrt(2), dim)[:g], atol=1e-12)
    assert np.allclose(col, oracles.coherent(np.sqrt(2), dim), atol=1e-10)
    with pytest.raises(CutoffTooSmall):
        displacement(3.0, 10)


@given(amplitudes)
def test_displacement_matches_expm_and_is_unitary_on_guard(alpha):
    dim = policy_cutoff(abs(alpha)) + 1
    D = displacement(alpha, dim).matrix
    assert np.allclose(D, oracles.displacement_expm(alpha, dim), atol=1e-10)
    g = guarded_block(alpha, dim)
    blk = D[:, :g]
    assert np.allclose(blk.conj().T @ blk, np.eye(g), atol=1e-10)


@given(amplitudes, amplitudes, st.complex_numbers(max_magnitude=1))
def test_displacement_composition(a, b, gamma):
    # the law only holds below cutoff - margin, so leave room for both guards
    dim = policy_cutoff(abs(a) + abs(b) + abs(gamma)) + guard_margin(a) + guard_margin(b) + 1
    psi = oracles.coherent(gamma, dim)
    lhs = displacement(a, dim).matrix @ (displacement(b, dim).matrix @ psi)
    rhs = np.exp(1j * np.imag(a * np.conj(b))) * (displacement(a + b, dim).matrix @ psi)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.0, 2 - 2j])
def test_half_displacements_around_parity(alpha):
    dim = policy_cutoff(abs(alpha)) + 1
    P = parity(dim).matrix
    lhs = displacement(alpha / 2, dim).matrix @ P @ displacement(-alpha / 2, dim).matrix
    rhs = displacement(alpha, dim).matrix @ P
    g = guarded_block(alpha, dim)
    assert np.max(np.abs(lhs[:g, :g] - rhs[:g, :g])) < 1e-10


@given(st.floats(0, 30), st.integers(0, 120))
def test_poisson_tail_matches_scipy(mean, cutoff):
    want = oracles.poisson_tail(mean, cutoff)
    got = poisson_tail(mean, cutoff)
    assert abs(got - want) <= 1e-12 + 1e-9 * want


def test_policy_cutoff_keeps_tail_small():
    for a in np.linspace(0.1, 5, 30):
        assert oracles.poisson_tail(a * a, policy_cutoff(a)) < 1e-12


# --- subspace, controlled, swap --------------------------------------------------------------------


def test_subspace_gates():
    N, dim = 3, 6
    X = subspace_gate("X", N, dim).matrix
    assert np.allclose(X @ oracles.basis(dim, 0), oracles.basis(dim, N))
    assert np.allclose(X @ oracles.basis(dim, 1), oracles.basis(dim, 1))
    Hn = subspace_gate("H", N, dim).matrix
    plus = (oracles.basis(dim, 0) + oracles.basis(dim, N)) / np.sqrt(2)
    assert np.allclose(Hn @ plus, oracles.basis(dim, 0))
    P = subspace_gate("P", N, dim).diagonal
    assert P[0] == 1 and P[N] == -1 and P[2] == 1
    with pytest.raises(DimensionMismatch):
        subspace_gate("X", 6, dim)


def test_controlled_examples(rng):
    cnot = controlled(pauli("x"), 1).matrix
    assert np.allclose(cnot, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    U = Operator(HilbertSpec.modes(2), matrix=oracles.random_unitary(3, rng))
    c0 = controlled(U, 0).matrix
    XI = np.kron(oracles.X, np.eye(3))
    assert np.allclose(c0, XI @ controlled(U, 1).matrix @ XI)
    sw = controlled(displacement(1.0, 22), 1).matrix
    assert np.allclose(sw[:22, :22], np.eye(22)) and np.allclose(sw[22:, 22:], displacement(1.0, 22).matrix)


def test_modal_swap():
    spec = HilbertSpec.modes(3, 3)
    S = modal_swap(spec).matrix
    assert np.allclose(S @ fock_state(1, 0, spec).amplitudes, fock_state(0, 1, spec).amplitudes)
    assert np.allclose(S @ fock_state(2, 2, spec).amplitudes, fock_state(2, 2, spec).amplitudes)
    Rx = rotation_modes((1, 0, 0), np.pi, spec)
    for N in range(4):
        sm = SectorMap(N, spec) if N else None
        if sm is None:
            continue
        assert np.allclose(sm.restrict_modes(modal_swap(spec)), 1j**N * sm.restrict_modes(Rx))
    with pytest.raises(DimensionMismatch):
        modal_swap(HilbertSpec.modes(2, 3))


def test_swap_matches_jx_pi_on_two_photons():
    spec = HilbertSpec.modes(2, 2)
    sm = SectorMap(2, spec)
    Rx = sm.restrict_modes(rotation_modes((1, 0, 0), np.pi, spec))
    S = sm.restrict_modes(modal_swap(spec))
    m = equal_up_to_global_phase(Rx, -S, 1e-12)
    assert m.equal and np.isclose(m.phase, 1)


# --- registry ------------------------------------------------------------------------------------


def _dims_for(kinds):
    return tuple(2 if k == "qubit" else 12 for k in kinds)


def _sample_params(g):
    if g.param_names[:3] == ("nx", "ny", "nz"):
        return (0.6, 0.0, 0.8, 0.37)
    return tuple(2 if i in g.int_params else 0.37 for i in range(len(g.param_names)))


@pytest.mark.parametrize("name", sorted(GATES))
def test_every_registered_gate_is_unitary(name):
    g = GATES[name]
    params = _sample_params(g)
    op = build_gate(name, params, _dims_for(g.kinds))
    assert op.is_unitary()
    if g.hermitian:
        assert op.is_hermitian()


def test_j_operators_generate_rotations():
    from scipy.linalg import expm

    spec = HilbertSpec.modes(3, 3)
    for axis, n in zip("xyz", np.eye(3)):
        want = expm(-0.8j * j_operator(axis, spec).matrix)
        assert np.allclose(rotation_modes(n, 0.8, spec).matrix, want, atol=1e-10)
