from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from interferoq.circuit import (
    DISTRIBUTION,
    CircuitBuilder,
    CircuitIR,
    EquivalenceQuery,
    Expr,
    ExprError,
    Full,
    Measure,
    SubspaceSpan,
    SymmetricSector,
    Unitary,
    check_equivalence,
    defer_measurement,
    diagnose,
    sample,
    simulate,
    unitary_of,
)
from interferoq.errors import (
    DeferralError,
    IncompatibleQuery,
    MalformedCircuit,
    NotMeasurementFree,
    UnsupportedParameter,
)
from interferoq.hilbert import HilbertSpec, StateVector, equal_up_to_global_phase
from interferoq.measurement import ClassicalGate
from interferoq.protocols import build, fock_feedforward
from interferoq.schwinger import j_operator

import oracles


def one_qubit(*gates, measure=True):
    b = CircuitBuilder("t")
    b.qubit("q")
    for g, params in gates:
        b.gate(g, "q", params=params)
    if measure:
        b.measure_z("q", "z")
    return b.build()


# --- expressions ---------------------------------------------------------------------------


def test_expr_evaluator():
    assert Expr("pi/2").evaluate() == pytest.approx(np.pi / 2)
    assert Expr("2*phi").evaluate({"phi": 0.3}) == pytest.approx(0.6)
    assert Expr("1.5+2i").evaluate() == 1.5 + 2j
    assert Expr("sqrt(2)*exp(i*pi)").evaluate() == pytest.approx(-np.sqrt(2))
    assert Expr("2 * phi").text == "2*phi"
    assert Expr("3*phi+theta").names == {"phi", "theta"}
    with pytest.raises(UnsupportedParameter):
        Expr("phi").evaluate()
    for bad in ("__import__('os')", "phi.real", "[1]", "lambda: 1", "open(1)"):
        with pytest.raises(ExprError):
            Expr(bad)


@given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
def test_expr_round_trips_numbers(z):
    assert Expr.of(z).evaluate() == z


# --- simulation ------------------------------------------------------------------------------


def test_simulate_examples():
    assert simulate(one_qubit()).probs == {(1,): 1.0}
    d = simulate(one_qubit(("h", ())))
    assert d[1] == pytest.approx(0.5) and d[-1] == pytest.approx(0.5)
    assert simulate(one_qubit(("x", ()))).probs == {(-1,): 1.0}
    empty = CircuitIR(())
    assert simulate(empty).probs == {(): 1.0}


def test_simulate_phase_and_inputs():
    c = one_qubit(("h", ()), ("zphase", ("phi",)), ("h", ()))
    for phi in np.linspace(-3, 3, 7):
        assert simulate(c, phi)[1] == pytest.approx(np.cos(phi / 2) ** 2)
    with pytest.raises(UnsupportedParameter):
        simulate(c)
    assert simulate(one_qubit(), inputs={"q": 1}).probs == {(-1,): 1.0}
    with pytest.raises(IncompatibleQuery):
        simulate(one_qubit(), inputs=np.ones(3))


def test_count_and_classical_gate():
    b = CircuitBuilder()
    b.mode("a", 3, init=2)
    b.mode("b", 3, init=1)
    b.count("a", "na")
    b.count("b", "nb")
    b.post(ClassicalGate("diff"), ["na", "nb"], "d")
    c = b.output("d").build()
    assert simulate(c).probs == {(1,): 1.0}


def test_conditional_gate_forks():
    b = CircuitBuilder()
    b.qubit("a"), b.qubit("t")
    b.gate("h", "a")
    b.measure_z("a", "y")
    b.gate("x", "t", cctrl=("y", -1))
    b.measure_z("t", "z")
    c = b.output("y", "z").build()
    assert simulate(c).probs == pytest.approx({(1, 1): 0.5, (-1, -1): 0.5})


def test_keep_states_records_post_measurement_state():
    b = CircuitBuilder()
    b.qubit("a"), b.qubit("t")
    b.gate("h", "a")
    b.gate("x", "t", ctrl={"a": 1})
    b.measure_z("a", "y")
    d = simulate(b.build(), keep_states=True)
    assert np.allclose(d.states[(-1,)].amplitudes, [0, 0, 0, 1])


def test_sample_is_seeded():
    c = one_qubit(("h", ()))
    a = sample(c, 1000, seed=7)
    assert a == sample(c, 1000, seed=7)
    assert sum(a.values()) == 1000
    assert 400 < a[(1,)] < 600


# --- well-formedness -------------------------------------------------------------------------


def test_diagnose_reports_problems():
    q = one_qubit(("h", ()), measure=False)
    c = CircuitIR(q.wires, (Measure("z", ("q",), "z"), q.instructions[0]))
    codes = [i.code for i in diagnose(c)]
    assert codes[:2] == ["UnknownWire", "UseAfterMeasure"]
    with pytest.raises(MalformedCircuit):
        CircuitBuilder().gate("nope", "q").build()


# --- unitaries ---------------------------------------------------------------------------------


def test_unitary_of_examples():
    H = unitary_of(one_qubit(("h", ()), measure=False))
    assert np.allclose(H.matrix, oracles.H)
    with pytest.raises(NotMeasurementFree):
        unitary_of(one_qubit())


@pytest.mark.parametrize("N", [1, 2, 3])
def test_conventional_gates_compose_to_jx_rotation(N):
    c = build("conventional-modal", N=N)
    gates = [ins for ins in c.instructions if isinstance(ins, Unitary)]
    u = replace(c, instructions=tuple(gates), outputs=())
    spec = u.spec
    from scipy.linalg import expm

    for phi in (0.3, 1.1):
        U = unitary_of(u, phi).matrix
        want = expm(1j * phi * j_operator("x", spec).matrix)
        sector = [spec.index((N - k, k)) for k in range(N + 1)]
        blk = np.ix_(sector, sector)
        assert equal_up_to_global_phase(U[blk], want[blk], 1e-10)


# --- deferral -------------------------------------------------------------------------------------


@pytest.mark.parametrize("N", [1, 2, 3])
def test_defer_measurement_preserves_distribution(N):
    c = fock_feedforward(N)
    d = defer_measurement(c)
    assert not any(isinstance(i, Unitary) and i.condition for i in d.instructions)
    for phi in np.linspace(-np.pi, np.pi, 9):
        assert simulate(c, phi).tv_distance(simulate(d, phi)) < 1e-12


def test_defer_measurement_errors():
    b = CircuitBuilder()
    b.mode("m", 2)
    b.count("m", "n")
    b.post(ClassicalGate("parity"), ["n"], "x")
    c = b.build()
    with pytest.raises(DeferralError):
        defer_measurement(c, "n")
    with pytest.raises(DeferralError):
        defer_measurement(c, "nothing")
    assert defer_measurement(one_qubit()) == one_qubit()


def test_discard_position_does_not_matter():
    def circ(discard_first):
        b = CircuitBuilder()
        b.qubit("a"), b.qubit("t")
        b.gate("h", "a")
        b.gate("x", "t", ctrl={"a": 1})
        if discard_first:
            b.discard("a")
        b.gate("h", "t")
        b.measure_z("t", "z")
        if not discard_first:
            b.discard("a")
        return b.output("z").build()

    assert simulate(circ(True)).tv_distance(simulate(circ(False))) < 1e-14


# --- equivalence ------------------------------------------------------------------------------------


def test_equivalence_unitary():
    h = one_qubit(("h", ()), measure=False)
    x = one_qubit(("x", ()), measure=False)
    assert check_equivalence(EquivalenceQuery(h, h))
    r = check_equivalence(EquivalenceQuery(h, x))
    assert not r and r.witness["input"] == (0,)
    # global phase is ignored
    zz = one_qubit(("z", ()), ("z", ()), measure=False)
    empty = one_qubit(measure=False)
    assert check_equivalence(EquivalenceQuery(zz, empty)).max_deviation < 1e-14
    # restricted domain
    z = one_qubit(("z", ()), measure=False)
    assert check_equivalence(EquivalenceQuery(z, empty, domain=SubspaceSpan(((0,),))))
    assert not check_equivalence(EquivalenceQuery(z, empty, domain=Full()))


def test_equivalence_distribution_and_errors():
    a = build("noon", N=2)
    b = build("noon-qubit", N=2)
    assert check_equivalence(EquivalenceQuery(a, b, compare=DISTRIBUTION))
    with pytest.raises(IncompatibleQuery):
        check_equivalence(EquivalenceQuery(a, one_qubit(measure=False)))
    with pytest.raises(IncompatibleQuery):
        check_equivalence(EquivalenceQuery(a, b, domain=SymmetricSector(2)))


@given(st.integers(0, 2**32 - 1))
def test_equivalence_on_symmetric_sector_of_rotations(seed):
    rng = np.random.default_rng(seed)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    theta = float(rng.uniform(-np.pi, np.pi))
    params = [*n, theta]
    b = CircuitBuilder()
    b.mode("a", 2), b.mode("b", 2)
    b.gate("rot2", "a", "b", params=params)
    modes = b.build()
    b = CircuitBuilder()
    b.mode("a", 2), b.mode("b", 2)
    b.gate("rot2", "a", "b", params=[*n, theta + 2 * np.pi])
    other = b.build()
    # a full extra turn is a parity product: +1 on even sectors
    assert check_equivalence(EquivalenceQuery(modes, other, domain=SymmetricSector(2)))
    # and -1 on odd sectors, which is a global phase there
    assert check_equivalence(EquivalenceQuery(modes, other, domain=SymmetricSector(1)))
    assert not check_equivalence(EquivalenceQuery(modes, other, domain=Full()))


def test_simulate_with_state_input():
    c = one_qubit(("h", ()))
    psi = StateVector(HilbertSpec.qubits(1), [1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert simulate(c, inputs=psi)[1] == pytest.approx(1.0)
