"""Circuit IR, exhaustive-branch simulator, measurement deferral and equivalence checks.

Wires are referenced by name.  Quantum wires are qubits or truncated modes;
classical wires carry typed values (``sign``, ``int`` or ``real``) and are
written exactly once, by a measurement or a classical gate.  Gate parameters
are small expressions that may mention the phase ``phi`` (bound at simulate
time).
"""

from __future__ import annotations

import ast
import math
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Mapping, Sequence

import numpy as np

from .config import TOLERANCES
from .errors import (
    ClassicalError,
    DeferralError,
    IncompatibleQuery,
    MalformedCircuit,
    NotMeasurementFree,
    UnsupportedParameter,
)
from .gates import GATES, build_gate
from .hilbert import (
    MODE,
    QUBIT,
    HilbertSpec,
    Operator,
    StateVector,
    Subsystem,
    apply_array,
    equal_up_to_global_phase,
)
from .measurement import (
    INT,
    REAL,
    SIGN,
    ClassicalGate,
    MeasurementSpec,
    OutcomeDistribution,
    branches,
    eigenspaces,
)
from .schwinger import SectorMap

CLASSICAL = "classical"

# --- parameter expressions -------------------------------------------------------

_FUNCS = {"sqrt": np.sqrt, "exp": np.exp, "cos": np.cos, "sin": np.sin}
_CONSTS = {"pi": math.pi, "i": 1j}
_IMAG_LITERAL = re.compile(r"(?<![\w.])(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)i\b")


class ExprError(ValueError):
    pass


@lru_cache(maxsize=4096)
def _compile(text: str):
    src = _IMAG_LITERAL.sub(r"\1j", text)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"cannot parse parameter {text!r}") from exc
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise ExprError(f"unsupported call in {text!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, complex)) or isinstance(node.value, bool):
                raise ExprError(f"unsupported literal in {text!r}")
        elif not isinstance(
            node,
            (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Load, ast.Add, ast.Sub, ast.Mult,
             ast.Div, ast.Pow, ast.USub, ast.UAdd),
        ):
            raise ExprError(f"unsupported syntax {type(node).__name__} in {text!r}")
    free = frozenset(n for n in names if n not in _CONSTS and n not in _FUNCS)
    return compile(tree, "<param>", "eval"), free


def format_number(x) -> str:
    """Round-trippable text for a real or complex number (complex written ``a+bi``)."""
    z = complex(x)
    if z.imag == 0:
        r = z.real
        return str(int(r)) if isinstance(x, (int, np.integer)) else repr(float(r))
    re_txt = repr(float(z.real))
    sign = "+" if z.imag >= 0 else "-"
    return f"{re_txt}{sign}{repr(abs(float(z.imag)))}i"


@dataclass(frozen=True)
class Expr:
    """A gate parameter: canonical text plus a restricted evaluator."""

    text: str

    def __post_init__(self):
        object.__setattr__(self, "text", "".join(str(self.text).split()))
        _compile(self.text)

    @classmethod
    def of(cls, value) -> "Expr":
        if isinstance(value, Expr):
            return value
        if isinstance(value, str):
            return cls(value)
        return cls(format_number(value))

    @property
    def names(self) -> frozenset:
        return _compile(self.text)[1]

    def evaluate(self, env: Mapping[str, Any] | None = None):
        code, free = _compile(self.text)
        env = env or {}
        missing = [n for n in free if env.get(n) is None]
        if missing:
            raise UnsupportedParameter(f"unbound parameter(s) {sorted(missing)} in {self.text!r}")
        scope = dict(_CONSTS)
        scope.update({k: v for k, v in env.items() if k in free})
        scope.update(_FUNCS)
        val = complex(eval(code, {"__builtins__": {}}, scope))
        return val.real if val.imag == 0 else val

    def __str__(self) -> str:
        return self.text


# --- IR --------------------------------------------------------------------------


@dataclass(frozen=True)
class WireDecl:
    name: str
    kind: str  # qubit | mode | classical
    cutoff: int | None = None
    alphabet: str | None = None
    init: int = 0

    @property
    def is_quantum(self) -> bool:
        return self.kind in (QUBIT, MODE)

    @property
    def subsystem(self) -> Subsystem:
        if self.kind == QUBIT:
            return Subsystem(QUBIT, 2)
        if self.kind == MODE:
            return Subsystem(MODE, int(self.cutoff) + 1)
        raise MalformedCircuit(f"classical wire {self.name!r} has no Hilbert space")


@dataclass(frozen=True)
class GateCall:
    """A registered gate with parameters, or a named custom operator."""

    name: str
    params: tuple = ()
    operator: Operator | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(Expr.of(p) for p in self.params))

    @property
    def names(self) -> frozenset:
        out = frozenset()
        for p in self.params:
            out |= p.names
        return out

    def resolve(self, dims: tuple[int, ...], env: Mapping[str, Any]) -> Operator:
        if self.operator is not None:
            if self.operator.spec.dims != tuple(dims):
                raise MalformedCircuit(f"custom gate {self.name!r} has dims {self.operator.spec.dims}")
            return self.operator
        values = tuple(p.evaluate(env) for p in self.params)
        return build_gate(self.name, values, tuple(dims))


@dataclass(frozen=True)
class Unitary:
    gate: GateCall
    wires: tuple[str, ...]
    controls: tuple[tuple[str, int], ...] = ()
    condition: tuple[str, Any] | None = None

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(self.wires))
        object.__setattr__(self, "controls", tuple((w, int(v)) for w, v in self.controls))
        if self.condition is not None:
            object.__setattr__(self, "condition", tuple(self.condition))


@dataclass(frozen=True)
class Measure:
    kind: str  # z | count | obs | discard
    wires: tuple[str, ...]
    label: str | None = None
    observable: GateCall | None = None

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(self.wires))


@dataclass(frozen=True)
class ClassicalOp:
    gate: ClassicalGate
    inputs: tuple[str, ...]
    label: str

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))


Instruction = Unitary | Measure | ClassicalOp


@dataclass(frozen=True)
class CircuitIR:
    wires: tuple[WireDecl, ...]
    instructions: tuple = ()
    outputs: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(self.wires))
        object.__setattr__(self, "instructions", tuple(self.instructions))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    def wire(self, name: str) -> WireDecl:
        for w in self.wires:
            if w.name == name:
                return w
        raise MalformedCircuit(f"unknown wire {name!r}")

    @property
    def quantum_wires(self) -> tuple[WireDecl, ...]:
        return tuple(w for w in self.wires if w.is_quantum)

    @property
    def spec(self) -> HilbertSpec:
        return HilbertSpec(tuple(w.subsystem for w in self.quantum_wires))

    @property
    def parameters(self) -> frozenset:
        out = frozenset()
        for ins in self.instructions:
            if isinstance(ins, Unitary):
                out |= ins.gate.names
            elif isinstance(ins, Measure) and ins.observable is not None:
                out |= ins.observable.names
        return out

    def written_labels(self) -> tuple[str, ...]:
        out = []
        for ins in self.instructions:
            if isinstance(ins, (Measure, ClassicalOp)) and ins.label is not None:
                out.append(ins.label)
        return tuple(out)

    def result_labels(self) -> tuple[str, ...]:
        return self.outputs or self.written_labels()

    def uses_displacement(self) -> bool:
        return any(isinstance(i, Unitary) and i.gate.name == "disp" for i in self.instructions)


# --- validation ------------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    index: int | None  # instruction index, or None for declarations / outputs
    operand: int | None = None  # which operand of the instruction, when relevant


def _measure_alphabet(ins: Measure) -> str:
    if ins.kind == "z":
        return SIGN
    if ins.kind == "count":
        return INT
    obs = ins.observable
    if obs.operator is None and GATES.get(obs.name) is not None and GATES[obs.name].hermitian:
        return SIGN
    return REAL


def diagnose(c: CircuitIR) -> list[Issue]:
    """Every well-formedness problem found, in program order."""
    issues: list[Issue] = []
    decl: dict[str, WireDecl] = {}
    for w in c.wires:
        if w.name in decl:
            issues.append(Issue("DuplicateWire", f"wire {w.name!r} declared twice", None))
            continue
        decl[w.name] = w
        if w.kind == MODE and (w.cutoff is None or w.cutoff < 1):
            issues.append(Issue("BadParameter", f"mode {w.name!r} needs cutoff >= 1", None))
        if w.is_quantum:
            top = 1 if w.kind == QUBIT else (w.cutoff or 0)
            if not 0 <= w.init <= top:
                issues.append(Issue("BadParameter", f"init {w.init} outside wire {w.name!r}", None))
        if w.kind == CLASSICAL and w.alphabet not in (SIGN, INT, REAL):
            issues.append(Issue("AlphabetMismatch", f"unknown alphabet {w.alphabet!r}", None))
    written: set[str] = set()
    measured: set[str] = set()

    def quantum(name, i, k, expected_kind=None):
        w = decl.get(name)
        if w is None:
            issues.append(Issue("UnknownWire", f"unknown wire {name!r}", i, k))
            return None
        if not w.is_quantum:
            issues.append(Issue("WireKindMismatch", f"{name!r} is classical", i, k))
            return None
        if expected_kind is not None and w.kind != expected_kind:
            issues.append(
                Issue("WireKindMismatch", f"{expected_kind} operand but {name!r} is a {w.kind}", i, k)
            )
            return None
        if name in measured:
            issues.append(Issue("UseAfterMeasure", f"wire {name!r} used after measurement", i, k))
        return w

    def read(label, i, k):
        w = decl.get(label)
        if w is None:
            issues.append(Issue("UnknownWire", f"unknown classical wire {label!r}", i, k))
            return None
        if w.kind != CLASSICAL:
            issues.append(Issue("WireKindMismatch", f"{label!r} is not classical", i, k))
            return None
        if label not in written:
            issues.append(Issue("ReadBeforeWrite", f"{label!r} read before it is written", i, k))
        return w

    def write(label, alphabet, i, k):
        w = decl.get(label)
        if w is None:
            issues.append(Issue("UnknownWire", f"unknown classical wire {label!r}", i, k))
            return
        if w.kind != CLASSICAL:
            issues.append(Issue("WireKindMismatch", f"{label!r} is not classical", i, k))
            return
        if label in written:
            issues.append(Issue("SingleAssignment", f"{label!r} written twice", i, k))
        written.add(label)
        if alphabet is not None and w.alphabet != REAL and w.alphabet != alphabet:
            issues.append(
                Issue("AlphabetMismatch", f"{label!r} declared {w.alphabet}, receives {alphabet}", i, k)
            )

    for i, ins in enumerate(c.instructions):
        if isinstance(ins, Unitary):
            g = ins.gate
            gdef = GATES.get(g.name)
            if g.operator is None and gdef is None:
                issues.append(Issue("UnknownGate", f"unknown gate {g.name!r}", i))
                continue
            kinds = gdef.kinds if g.operator is None else g.operator.spec.kinds
            if len(ins.wires) != len(kinds):
                issues.append(
                    Issue("ArityError", f"{g.name} acts on {len(kinds)} wire(s), got {len(ins.wires)}", i)
                )
            elif g.operator is None and len(g.params) != gdef.n_params:
                issues.append(
                    Issue("ParamCount", f"{g.name} takes {gdef.n_params} parameter(s), got {len(g.params)}", i)
                )
            else:
                for k, (wname, kind) in enumerate(zip(ins.wires, kinds)):
                    quantum(wname, i, k, kind)
            if len(set(ins.wires)) != len(ins.wires):
                issues.append(Issue("DuplicateOperand", f"repeated operand in {g.name}", i))
            for k, (cw, val) in enumerate(ins.controls):
                w = quantum(cw, i, len(ins.wires) + k)
                if w is None:
                    continue
                op_k = len(ins.wires) + k
                if cw in ins.wires:
                    issues.append(Issue("InvalidControl", f"control {cw!r} is also a target", i, op_k))
                top = 1 if w.kind == QUBIT else w.cutoff
                if not 0 <= val <= top:
                    issues.append(Issue("InvalidControl", f"control value {val} outside {cw!r}", i, op_k))
            if ins.condition is not None:
                lbl, val = ins.condition
                w = read(lbl, i, None)
                if w is not None and w.alphabet == SIGN and val not in (1, -1):
                    issues.append(Issue("InvalidControl", f"sign wire {lbl!r} compared with {val!r}", i))
        elif isinstance(ins, Measure):
            if ins.kind == "discard":
                for k, wname in enumerate(ins.wires):
                    quantum(wname, i, k)
                measured.update(ins.wires)
                continue
            if ins.kind == "z":
                if len(ins.wires) != 1:
                    issues.append(Issue("ArityError", "z measurement takes one qubit", i))
                else:
                    quantum(ins.wires[0], i, 0, QUBIT)
            elif ins.kind == "count":
                if len(ins.wires) != 1:
                    issues.append(Issue("ArityError", "photon count takes one mode", i))
                else:
                    quantum(ins.wires[0], i, 0, MODE)
            elif ins.kind == "obs":
                g = ins.observable
                gdef = GATES.get(g.name) if g is not None else None
                if g is None or (g.operator is None and gdef is None):
                    issues.append(Issue("UnknownGate", f"unknown observable {getattr(g, 'name', None)!r}", i))
                else:
                    kinds = gdef.kinds if g.operator is None else g.operator.spec.kinds
                    if len(kinds) != len(ins.wires):
                        issues.append(Issue("ArityError", f"observable {g.name} arity mismatch", i))
                    else:
                        for k, (wname, kind) in enumerate(zip(ins.wires, kinds)):
                            quantum(wname, i, k, kind)
            else:
                issues.append(Issue("Syntax", f"unknown measurement kind {ins.kind!r}", i))
                continue
            measured.update(ins.wires)
            write(ins.label, _measure_alphabet(ins), i, None)
        elif isinstance(ins, ClassicalOp):
            alphs = []
            for k, lbl in enumerate(ins.inputs):
                w = read(lbl, i, k)
                alphs.append(w.alphabet if w is not None else None)
            if len(set(ins.inputs)) != len(ins.inputs):
                issues.append(Issue("DuplicateOperand", "repeated classical input", i))
            out_alph = None
            if None not in alphs:
                if not ins.gate.accepts(alphs):
                    issues.append(
                        Issue("AlphabetMismatch", f"{ins.gate.kind} cannot take inputs {alphs}", i)
                    )
                else:
                    out_alph = ins.gate.output_alphabet(alphs)
            write(ins.label, out_alph, i, None)
        else:
            issues.append(Issue("Syntax", f"unknown instruction {ins!r}", i))
    for lbl in c.outputs:
        if lbl not in written:
            issues.append(Issue("ReadBeforeWrite", f"output {lbl!r} is never written", None))
    return issues


def validate(c: CircuitIR) -> None:
    issues = diagnose(c)
    if issues:
        first = issues[0]
        where = f" (instruction {first.index})" if first.index is not None else ""
        raise MalformedCircuit(f"{first.code}: {first.message}{where}")


# --- simulation ------------------------------------------------------------------


def _apply_unitary(psi: np.ndarray, op: Operator, axes: Sequence[int], controls) -> np.ndarray:
    if not controls:
        return apply_array(op, axes, psi)
    idx = [slice(None)] * psi.ndim
    for ax, lvl in controls:
        idx[ax] = lvl
    idx = tuple(idx)
    removed = sorted(ax for ax, _ in controls)
    shifted = [a - sum(1 for r in removed if r < a) for a in axes]
    out = np.array(psi, copy=True)
    out[idx] = apply_array(op, shifted, psi[idx])
    return out


class _Context:
    def __init__(self, c: CircuitIR, env: Mapping[str, Any]):
        self.c = c
        self.env = env
        self.qwires = c.quantum_wires
        self.axis = {w.name: k for k, w in enumerate(self.qwires)}
        self.dims = tuple(w.subsystem.dim for w in self.qwires)

    def op(self, gate: GateCall, wires) -> Operator:
        return gate.resolve(tuple(self.dims[self.axis[w]] for w in wires), self.env)

    def apply(self, psi, ins: Unitary):
        axes = [self.axis[w] for w in ins.wires]
        ctrls = [(self.axis[w], v) for w, v in ins.controls]
        return _apply_unitary(psi, self.op(ins.gate, ins.wires), axes, ctrls)

    def mspec(self, ins: Measure) -> MeasurementSpec:
        axes = tuple(self.axis[w] for w in ins.wires)
        obs = self.op(ins.observable, ins.wires) if ins.kind == "obs" else None
        return MeasurementSpec(ins.kind, axes, ins.label, obs)


def _initial(c: CircuitIR, ctx: _Context, inputs) -> np.ndarray:
    spec = c.spec
    if inputs is None or isinstance(inputs, Mapping):
        levels = [w.init for w in ctx.qwires]
        for name, lvl in (inputs or {}).items():
            levels[ctx.axis[name]] = int(lvl)
        return StateVector.basis(spec, levels).amplitudes.reshape(ctx.dims)
    if isinstance(inputs, StateVector):
        if inputs.spec.dims != spec.dims or inputs.spec.kinds != spec.kinds:
            raise IncompatibleQuery(f"input on {inputs.spec.dims}, circuit on {spec.dims}")
        return np.array(inputs.amplitudes).reshape(ctx.dims)
    arr = np.asarray(inputs, dtype=complex)
    if arr.size != spec.total_dim:
        raise IncompatibleQuery("input amplitude count does not match the circuit")
    return StateVector(spec, arr).amplitudes.reshape(ctx.dims)


def _env(c: CircuitIR, phi, params) -> dict:
    env = dict(params or {})
    if phi is not None:
        env["phi"] = phi
    missing = [n for n in c.parameters if env.get(n) is None]
    if missing:
        raise UnsupportedParameter(f"circuit {c.name!r} needs values for {sorted(missing)}")
    return env


def _needed_for_conditions(c: CircuitIR) -> set[str]:
    need = {ins.condition[0] for ins in c.instructions if isinstance(ins, Unitary) and ins.condition}
    changed = True
    while changed:
        changed = False
        for ins in c.instructions:
            if isinstance(ins, ClassicalOp) and ins.label in need:
                for lbl in ins.inputs:
                    if lbl not in need:
                        need.add(lbl)
                        changed = True
    return need


def _eval_classical(ins: ClassicalOp, vals: dict):
    return ins.gate(*(vals[lbl] for lbl in ins.inputs))


def simulate(
    c: CircuitIR,
    phi: float | None = None,
    params: Mapping[str, Any] | None = None,
    inputs=None,
    keep_states: bool = False,
    branch_prune: float = TOLERANCES.branch_prune,
) -> OutcomeDistribution:
    """Exact joint distribution of the circuit's output classical wires.

    Measurements whose results never steer a later gate are evaluated from the
    final amplitudes (they act on wires nothing else touches); the rest fork the
    state into weighted branches.  ``keep_states`` forks on every measurement and
    records the normalized post-measurement state for each output value when it is
    pure (a single contributing branch).
    """
    validate(c)
    env = _env(c, phi, params)
    ctx = _Context(c, env)
    psi0 = _initial(c, ctx, inputs)

    need = _needed_for_conditions(c)
    forked, terminal = [], []
    for ins in c.instructions:
        if isinstance(ins, Measure) and ins.kind == "discard":
            continue
        deferrable = isinstance(ins, (Measure, ClassicalOp)) and ins.label not in need
        (terminal if deferrable and not keep_states else forked).append(ins)

    dropped = 0.0
    live: list[tuple[dict, np.ndarray]] = [({}, psi0)]
    for ins in forked:
        if isinstance(ins, Unitary):
            if ins.condition is None:
                live = [(v, ctx.apply(p, ins)) for v, p in live]
            else:
                lbl, want = ins.condition
                live = [(v, ctx.apply(p, ins) if v[lbl] == want else p) for v, p in live]
        elif isinstance(ins, Measure):
            ms = ctx.mspec(ins)
            nxt = []
            for v, p in live:
                for val, proj in branches(p, ms, ctx.dims):
                    w = float(np.vdot(proj, proj).real)
                    if w < branch_prune:
                        dropped += w
                        continue
                    nxt.append(({**v, ins.label: val}, proj))
            live = nxt
        else:
            live = [({**v, ins.label: _eval_classical(ins, v)}, p) for v, p in live]

    labels = c.result_labels()
    probs: dict[tuple, float] = {}
    states: dict[tuple, Any] = {}
    for vals, psi in live:
        outcomes, lost = _terminal_outcomes(ctx, terminal, vals, psi)
        dropped += lost
        for full, p in outcomes:
            key = tuple(full[lbl] for lbl in labels)
            probs[key] = probs.get(key, 0.0) + p
            if keep_states:
                states[key] = None if key in states else psi
    out_states = None
    if keep_states:
        out_states = {
            k: StateVector.from_unnormalized(c.spec, v.reshape(-1))
            for k, v in states.items()
            if v is not None
        }
    return OutcomeDistribution(labels, probs, out_states, dropped_mass=dropped)


def _terminal_outcomes(ctx: _Context, terminal: list, vals: dict, psi: np.ndarray):
    """Outcome table of measurements on wires that no later gate touches.

    Observables are rotated into their eigenbasis so every measurement becomes a
    readout of computational-basis levels of ``|psi|^2``.
    """
    measures = [ins for ins in terminal if isinstance(ins, Measure)]
    readers = []  # (label, axes, level -> value)
    for ins in measures:
        axes = [ctx.axis[w] for w in ins.wires]
        if ins.kind == "obs":
            es = eigenspaces(ctx.op(ins.observable, ins.wires))
            rot = Operator(ctx.op(ins.observable, ins.wires).spec, matrix=es.basis.conj().T)
            psi = apply_array(rot, axes, psi)
            readers.append((ins.label, axes, es.index_values()))
        elif ins.kind == "z":
            readers.append((ins.label, axes, [1, -1]))
        else:
            readers.append((ins.label, axes, list(range(ctx.dims[axes[0]]))))
    prob = np.abs(psi) ** 2
    measured_axes = [a for _, axes, _ in readers for a in axes]
    rest = tuple(a for a in range(prob.ndim) if a not in measured_axes)
    table = prob.sum(axis=rest) if rest else prob
    # remaining axes are in ascending order; permute them to reader order
    order = sorted(measured_axes)
    table = np.transpose(table, [order.index(a) for a in measured_axes]) if measured_axes else table
    shapes = [[ctx.dims[a] for a in axes] for _, axes, _ in readers]
    flat = table.reshape([int(np.prod(s)) for s in shapes]) if readers else np.asarray(table)
    merged: dict[tuple, float] = {}
    for idx in zip(*np.nonzero(flat)) if readers else [()]:
        key = tuple(r[2][k] for r, k in zip(readers, idx))
        merged[key] = merged.get(key, 0.0) + float(flat[idx])
    out, lost = [], 0.0
    for key, p in merged.items():
        full = dict(vals)
        full.update({r[0]: v for r, v in zip(readers, key)})
        try:
            for ins in terminal:
                if isinstance(ins, ClassicalOp):
                    full[ins.label] = _eval_classical(ins, full)
        except ClassicalError:
            # values off a classical gate's domain can only arise from rounding-level weights
            if p > 1e-12:
                raise
            lost += p
            continue
        out.append((full, p))
    return out, lost


def sample(
    c: CircuitIR, shots: int, seed: int | None = None, phi: float | None = None, **kwargs
) -> dict[tuple, int]:
    """Seeded Monte Carlo counts drawn from the exact distribution."""
    dist = simulate(c, phi=phi, **kwargs)
    keys = list(dist.probs)
    p = np.array([dist.probs[k] for k in keys])
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(int(shots), p / p.sum())
    return {k: int(n) for k, n in zip(keys, draws) if n}


def unitary_of(c: CircuitIR, phi: float | None = None, params: Mapping[str, Any] | None = None) -> Operator:
    """Product of the circuit's gates, for measurement-free circuits."""
    validate(c)
    for ins in c.instructions:
        if not isinstance(ins, Unitary) or ins.condition is not None:
            raise NotMeasurementFree(f"circuit {c.name!r} contains {type(ins).__name__}")
    ctx = _Context(c, _env(c, phi, params))
    n = c.spec.total_dim
    psi = np.eye(n, dtype=complex).reshape(ctx.dims + (n,))
    for ins in c.instructions:
        psi = ctx.apply(psi, ins)
    return Operator(c.spec, matrix=psi.reshape(n, n))


# --- measurement deferral -------------------------------------------------------------


def defer_measurement(c: CircuitIR, label: str | None = None) -> CircuitIR:
    """Replace classical control by a qubit result with coherent control, measuring at the end.

    With ``label=None`` every qubit-``z`` result that steers a gate is deferred.
    Results that feed a classical gate cannot be deferred.
    """
    validate(c)
    if label is None:
        out = c
        for lbl in c.written_labels():
            if any(isinstance(i, Unitary) and i.condition and i.condition[0] == lbl for i in c.instructions):
                out = defer_measurement(out, lbl)
        return out
    pos = [k for k, ins in enumerate(c.instructions) if isinstance(ins, Measure) and ins.label == label]
    if not pos:
        raise DeferralError(f"no measurement writes {label!r}")
    k = pos[0]
    meas = c.instructions[k]
    if meas.kind != "z":
        raise DeferralError(f"{label!r} is not a qubit Z measurement")
    for ins in c.instructions:
        if isinstance(ins, ClassicalOp) and label in ins.inputs:
            raise DeferralError(f"{label!r} feeds classical gate {ins.gate.kind}")
    users = [i for i in c.instructions if isinstance(i, Unitary) and i.condition and i.condition[0] == label]
    if not users:
        return c
    qwire = meas.wires[0]
    new = []
    for i, ins in enumerate(c.instructions):
        if i == k:
            continue
        if ins in users and ins.condition[0] == label:
            level = (1 - int(ins.condition[1])) // 2
            ins = replace(ins, controls=ins.controls + ((qwire, level),), condition=None)
        new.append(ins)
    new.append(meas)
    return replace(c, instructions=tuple(new))


# --- equivalence -------------------------------------------------------------------------


@dataclass(frozen=True)
class Full:
    pass


@dataclass(frozen=True)
class SymmetricSector:
    N: int


@dataclass(frozen=True)
class SubspaceSpan:
    states: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))


UNITARY = "unitary"
DISTRIBUTION = "distribution"


@dataclass(frozen=True)
class EquivalenceQuery:
    left: CircuitIR
    right: CircuitIR
    domain: Any = None
    compare: str = UNITARY
    tol: float | None = None
    phi_grid: tuple | None = None
    inputs: tuple | None = None
    params: Mapping[str, Any] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class EquivalenceResult:
    equal: bool
    max_deviation: float
    witness: dict | None

    def __bool__(self) -> bool:
        return self.equal


def default_phi_grid(points: int = 25) -> np.ndarray:
    return np.linspace(-np.pi, np.pi, points)


def _domain_basis(domain, spec: HilbertSpec) -> tuple[np.ndarray, list]:
    """Columns spanning the domain, plus a label per column for witnesses."""
    n = spec.total_dim
    if domain is None or isinstance(domain, Full):
        labels = [tuple(int(x) for x in np.unravel_index(k, spec.dims)) for k in range(n)]
        return np.eye(n, dtype=complex), labels
    if isinstance(domain, SymmetricSector):
        N = domain.N
        if all(k == QUBIT for k in spec.kinds) and len(spec) == N:
            return SectorMap(N).symmetric_basis(), [("dicke", N, k) for k in range(N + 1)]
        if len(spec) == 2 and all(k == MODE for k in spec.kinds):
            sm = SectorMap(N, spec)
            return sm.sector_basis(), [(N - k, k) for k in range(N + 1)]
        raise IncompatibleQuery("symmetric sector needs N qubits or two modes")
    if isinstance(domain, SubspaceSpan):
        cols, labels = [], []
        for st in domain.states:
            if isinstance(st, StateVector):
                cols.append(np.asarray(st.amplitudes))
                labels.append(f"state{len(labels)}")
            else:
                cols.append(StateVector.basis(spec, st).amplitudes)
                labels.append(tuple(st))
        return np.stack(cols, axis=1), labels
    raise IncompatibleQuery(f"unknown domain {domain!r}")


def _grid(q: EquivalenceQuery) -> list:
    uses_phi = "phi" in (q.left.parameters | q.right.parameters)
    if not uses_phi:
        return [None]
    grid = q.phi_grid if q.phi_grid is not None else default_phi_grid()
    return [float(x) for x in grid]


def check_equivalence(q: EquivalenceQuery) -> EquivalenceResult:
    """Compare two circuits as unitaries (up to global phase) or as output distributions."""
    tol = q.tol
    if tol is None:
        coherent = q.left.uses_displacement() or q.right.uses_displacement()
        tol = TOLERANCES.equiv_coherent if coherent else TOLERANCES.equiv_exact
    worst, witness = 0.0, None
    if q.compare == UNITARY:
        ls, rs = q.left.spec, q.right.spec
        if ls.dims != rs.dims or ls.kinds != rs.kinds:
            raise IncompatibleQuery(f"circuits act on {ls.dims} and {rs.dims}")
        B, labels = _domain_basis(q.domain, ls)
        for phi in _grid(q):
            UL = unitary_of(q.left, phi, q.params).matrix @ B
            UR = unitary_of(q.right, phi, q.params).matrix @ B
            dev = equal_up_to_global_phase(UL, UR, tol).deviation
            if dev > worst or witness is None:
                worst = max(worst, dev)
                diff = np.abs(UL - _aligned_phase(UL, UR) * UR)
                col = int(np.unravel_index(int(np.argmax(diff)), diff.shape)[1])
                witness = {"input": labels[col], "phi": phi}
        equal = worst <= tol
        return EquivalenceResult(bool(equal), float(worst), None if equal else witness)
    if q.compare != DISTRIBUTION:
        raise IncompatibleQuery(f"unknown comparison {q.compare!r}")
    if set(q.left.result_labels()) != set(q.right.result_labels()):
        raise IncompatibleQuery(
            f"output labels {q.left.result_labels()} vs {q.right.result_labels()}"
        )
    inputs = list(q.inputs) if q.inputs is not None else [None]
    for phi in _grid(q):
        for k, inp in enumerate(inputs):
            li, ri = inp if isinstance(inp, tuple) and len(inp) == 2 else (inp, inp)
            dl = simulate(q.left, phi, q.params, li)
            dr = simulate(q.right, phi, q.params, ri).marginal(dl.labels)
            dev = dl.tv_distance(dr)
            if dev > worst:
                worst = dev
                keys = set(dl.probs) | set(dr.probs)
                key = max(keys, key=lambda kk: abs(dl[kk] - dr[kk]))
                witness = {"phi": phi, "input": k, "outcome": key}
    equal = worst <= tol
    return EquivalenceResult(bool(equal), float(worst), None if equal else witness)


def _aligned_phase(A: np.ndarray, B: np.ndarray) -> complex:
    """Unit phase taking B's largest entry onto A's entry at the same place."""
    k = int(np.argmax(np.abs(B)))
    r = A.flat[k] / B.flat[k] if B.flat[k] != 0 else 1.0
    return r / abs(r) if abs(r) > 0 else 1.0


# --- builder -------------------------------------------------------------------------------


class CircuitBuilder:
    """Imperative helper for assembling a :class:`CircuitIR`.

    Classical wires are declared on first write with the alphabet the writer
    produces.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self.wires: list[WireDecl] = []
        self.instructions: list = []
        self.outputs: list[str] = []
        self._alph: dict[str, str] = {}

    def qubit(self, name: str, init: int = 0) -> str:
        self.wires.append(WireDecl(name, QUBIT, init=init))
        return name

    def mode(self, name: str, cutoff: int, init: int = 0) -> str:
        self.wires.append(WireDecl(name, MODE, cutoff=int(cutoff), init=init))
        return name

    def _classical(self, name: str, alphabet: str) -> str:
        self.wires.append(WireDecl(name, CLASSICAL, alphabet=alphabet))
        self._alph[name] = alphabet
        return name

    def gate(self, name: str, *wires: str, params=(), ctrl=(), cctrl=None, operator=None):
        if isinstance(ctrl, Mapping):
            ctrl = tuple(ctrl.items())
        self.instructions.append(Unitary(GateCall(name, tuple(params), operator), wires, tuple(ctrl), cctrl))
        return self

    def measure_z(self, wire: str, label: str) -> str:
        self.instructions.append(Measure("z", (wire,), label))
        return self._classical(label, SIGN)

    def count(self, wire: str, label: str) -> str:
        self.instructions.append(Measure("count", (wire,), label))
        return self._classical(label, INT)

    def observe(self, gate: GateCall, wires: Sequence[str], label: str, alphabet: str | None = None) -> str:
        ins = Measure("obs", tuple(wires), label, gate)
        self.instructions.append(ins)
        return self._classical(label, alphabet or _measure_alphabet(ins))

    def discard(self, *wires: str):
        self.instructions.append(Measure("discard", wires))
        return self

    def post(self, gate: ClassicalGate, inputs: Sequence[str], label: str) -> str:
        self.instructions.append(ClassicalOp(gate, tuple(inputs), label))
        return self._classical(label, gate.output_alphabet([self._alph[i] for i in inputs]))

    def output(self, *labels: str):
        self.outputs.extend(labels)
        return self

    def build(self) -> CircuitIR:
        c = CircuitIR(tuple(self.wires), tuple(self.instructions), tuple(self.outputs), self.name)
        validate(c)
        return c
