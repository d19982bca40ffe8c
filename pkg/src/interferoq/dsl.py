"""Line-oriented text format for circuits (``.qc`` files).

::

    circuit noon N=2            # optional name, rest of line
    mode m0 cutoff 2
    mode m1 cutoff 2 init 0
    qubit q init 1
    classical n int
    hn(2) m1
    xn(2) m0 ctrl m1=0
    rz2(phi) m0 m1
    zn(2) m0 cctrl y=-1
    measure count m1 -> n
    measure obs parity m1 -> p
    discard m0
    post mapcount(2) n -> z
    output z

Every statement is one line; ``#`` starts a comment.  Complex literals are
written ``a+bi``.  Problems are reported as :class:`Diagnostic` records with
a code, a 1-based line and column, and a message.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .circuit import (
    CLASSICAL,
    CircuitIR,
    ClassicalOp,
    Expr,
    ExprError,
    GateCall,
    Measure,
    Unitary,
    WireDecl,
    diagnose,
)
from .errors import InterferoqError
from .gates import GATES
from .hilbert import MODE, QUBIT
from .measurement import ALPHABETS, ClassicalGate

MAX_DIAGNOSTICS = 20

CODES = (
    "InvalidToken",
    "Syntax",
    "UnknownGate",
    "ArityError",
    "ParamCount",
    "WireKindMismatch",
    "UnknownWire",
    "DuplicateWire",
    "SingleAssignment",
    "ReadBeforeWrite",
    "UseAfterMeasure",
    "AlphabetMismatch",
    "BadParameter",
    "InvalidControl",
    "DuplicateOperand",
)

_POST_ARGS = {"sum": 0, "diff": 0, "product": 0, "parity": 0, "mapcount": 1, "cexchange": 2}


@dataclass(frozen=True)
class Diagnostic:
    code: str
    line: int
    col: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.code}: {self.message}"


class DslError(InterferoqError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str  # word | params | arrow | eq | value
    text: str
    col: int


_WORD = re.compile(r"[A-Za-z0-9_]+")
_VALUE = re.compile(r"[+-]?\d+")


class _LineError(Exception):
    def __init__(self, code, col, message):
        self.code, self.col, self.message = code, col, message


def _tokenize(line: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(line)
    while i < n:
        ch = line[i]
        if ch.isspace():
            i += 1
        elif line.startswith("->", i):
            toks.append(Token("arrow", "->", i + 1))
            i += 2
        elif ch == "=":
            m = _VALUE.match(line, i + 1)
            if not m:
                raise _LineError("InvalidToken", i + 2, "expected an integer after '='")
            toks.append(Token("eq", "=", i + 1))
            toks.append(Token("value", m.group(), i + 2))
            i = m.end()
        elif ch == "(":
            depth, j = 0, i
            while j < n:
                if line[j] == "(":
                    depth += 1
                elif line[j] == ")":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if depth:
                raise _LineError("InvalidToken", i + 1, "unbalanced parenthesis")
            toks.append(Token("params", line[i + 1 : j], i + 1))
            i = j + 1
        else:
            m = _WORD.match(line, i)
            if not m:
                raise _LineError("InvalidToken", i + 1, f"unexpected character {ch!r}")
            toks.append(Token("word", m.group(), i + 1))
            i = m.end()
    return toks


def _split_params(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    parts.append("".join(cur))
    if len(parts) == 1 and not parts[0].strip():
        return []
    return [p.strip() for p in parts]


class _Cursor:
    def __init__(self, toks: list[Token], eol_col: int):
        self.toks = toks
        self.i = 0
        self.eol_col = eol_col

    def peek(self, kind=None, text=None):
        if self.i >= len(self.toks):
            return None
        t = self.toks[self.i]
        if kind is not None and t.kind != kind:
            return None
        if text is not None and t.text != text:
            return None
        return t

    def take(self, kind, what, text=None) -> Token:
        t = self.peek(kind, text)
        if t is None:
            col = self.toks[self.i].col if self.i < len(self.toks) else self.eol_col
            raise _LineError("Syntax", col, f"expected {what}")
        self.i += 1
        return t

    def done(self):
        if self.i < len(self.toks):
            t = self.toks[self.i]
            raise _LineError("Syntax", t.col, f"unexpected {t.text!r}")


def _exprs(tok: Token | None, allow_free: bool = True) -> tuple:
    if tok is None:
        return ()
    out = []
    for p in _split_params(tok.text):
        if not p:
            raise _LineError("BadParameter", tok.col, "empty parameter")
        try:
            e = Expr(p)
        except ExprError as exc:
            raise _LineError("BadParameter", tok.col, str(exc)) from None
        extra = e.names - {"phi"}
        if extra or (e.names and not allow_free):
            raise _LineError("BadParameter", tok.col, f"unknown symbol(s) {sorted(extra or e.names)}")
        out.append(e)
    return tuple(out)


def _int_arg(e: Expr, col: int) -> int:
    v = e.evaluate({})
    if isinstance(v, complex) or v != int(v):
        raise _LineError("BadParameter", col, f"expected an integer, got {e.text}")
    return int(v)


@dataclass
class _Where:
    line: int
    gate_col: int
    operand_cols: list
    label_col: int | None = None
    cond_col: int | None = None


def check(text: str) -> tuple[CircuitIR | None, list[Diagnostic]]:
    """Parse and type-check; returns the circuit (if clean) and all diagnostics."""
    diags: list[Diagnostic] = []
    wires: list[WireDecl] = []
    seen: set[str] = set()
    instructions: list = []
    where: list[_Where] = []
    outputs: list[str] = []
    output_pos: list[tuple[str, int, int]] = []
    name = ""

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped == "circuit" or stripped.startswith("circuit "):
            name = stripped[len("circuit") :].strip()
            continue
        try:
            toks = _tokenize(line)
            cur = _Cursor(toks, len(line) + 1)
            head = cur.take("word", "a statement")
            kw = head.text
            if kw in ("qubit", "mode", "classical"):
                wtok = cur.take("word", "a wire name")
                decl = _declaration(kw, wtok, cur)
                cur.done()
                if wtok.text in seen:
                    raise _LineError("DuplicateWire", wtok.col, f"wire {wtok.text!r} already declared")
                seen.add(wtok.text)
                wires.append(decl)
            elif kw == "output":
                labels = []
                while cur.peek("word"):
                    t = cur.take("word", "a label")
                    labels.append(t)
                if not labels:
                    raise _LineError("Syntax", len(line) + 1, "expected at least one label")
                cur.done()
                for t in labels:
                    outputs.append(t.text)
                    output_pos.append((t.text, lineno, t.col))
            elif kw == "measure":
                ins, w = _measure(cur, lineno, head)
                instructions.append(ins)
                where.append(w)
            elif kw == "discard":
                ops = []
                while cur.peek("word"):
                    ops.append(cur.take("word", "a wire"))
                if not ops:
                    raise _LineError("Syntax", len(line) + 1, "expected a wire")
                cur.done()
                instructions.append(Measure("discard", tuple(t.text for t in ops)))
                where.append(_Where(lineno, head.col, [t.col for t in ops]))
            elif kw == "post":
                ins, w = _post(cur, lineno)
                instructions.append(ins)
                where.append(w)
            else:
                ins, w = _gate(head, cur, lineno)
                instructions.append(ins)
                where.append(w)
        except _LineError as err:
            diags.append(Diagnostic(err.code, lineno, err.col, err.message))

    declared = {w.name: w for w in wires}
    written = set()
    for ins in instructions:
        if isinstance(ins, (Measure, ClassicalOp)) and ins.label:
            written.add(ins.label)
    for lbl, ln, col in output_pos:
        if lbl not in declared:
            diags.append(Diagnostic("UnknownWire", ln, col, f"unknown output {lbl!r}"))
        elif lbl not in written:
            diags.append(Diagnostic("ReadBeforeWrite", ln, col, f"output {lbl!r} is never written"))

    circuit = CircuitIR(tuple(wires), tuple(instructions), tuple(outputs), name)
    for issue in diagnose(circuit):
        if issue.index is None:
            continue  # declaration and output problems are reported above
        w = where[issue.index]
        diags.append(Diagnostic(issue.code, w.line, _issue_col(issue, w), issue.message))
    if not diags:
        diags.extend(_parameter_checks(circuit, where))
    diags = _dedupe(sorted(diags, key=lambda d: (d.line, d.col)))[:MAX_DIAGNOSTICS]
    return (None if diags else circuit), diags


def _dedupe(diags):
    out, seen = [], set()
    for d in diags:
        key = (d.code, d.line, d.col)
        if key not in seen:
            seen.add(key)
            out.append(d)
    return out


def _issue_col(issue, w: _Where) -> int:
    if issue.operand is not None and issue.operand < len(w.operand_cols):
        return w.operand_cols[issue.operand]
    if issue.code in ("UnknownGate", "ArityError", "ParamCount", "DuplicateOperand"):
        return w.gate_col
    if w.label_col is not None:
        return w.label_col
    if w.cond_col is not None:
        return w.cond_col
    return w.gate_col


def _parameter_checks(c: CircuitIR, where: list[_Where]) -> list[Diagnostic]:
    """Build every parameterized gate once (phi bound to a test value) to surface bad values."""
    out = []
    dims = {w.name: w.subsystem.dim for w in c.quantum_wires}
    for k, ins in enumerate(c.instructions):
        gate = ins.gate if isinstance(ins, Unitary) else getattr(ins, "observable", None)
        if gate is None or gate.operator is not None:
            continue
        try:
            gate.resolve(tuple(dims[w] for w in ins.wires), {"phi": 0.1})
        except (InterferoqError, ValueError) as exc:
            w = where[k]
            out.append(Diagnostic("BadParameter", w.line, w.gate_col, str(exc)))
    return out


def _declaration(kw: str, wtok: Token, cur: _Cursor) -> WireDecl:
    if kw == "classical":
        a = cur.take("word", "an alphabet (sign, int or real)")
        if a.text not in ALPHABETS:
            raise _LineError("AlphabetMismatch", a.col, f"unknown alphabet {a.text!r}")
        return WireDecl(wtok.text, CLASSICAL, alphabet=a.text)
    cutoff = None
    if kw == "mode":
        cur.take("word", "'cutoff'", text="cutoff")
        ct = cur.take("word", "a cutoff")
        if not ct.text.isdigit() or int(ct.text) < 1:
            raise _LineError("BadParameter", ct.col, f"cutoff must be a positive integer, got {ct.text!r}")
        cutoff = int(ct.text)
    init = 0
    if cur.peek("word", "init"):
        cur.take("word", "'init'")
        it = cur.take("word", "an initial level")
        top = 1 if kw == "qubit" else cutoff
        if not it.text.isdigit() or int(it.text) > top:
            raise _LineError("BadParameter", it.col, f"initial level {it.text!r} outside the wire")
        init = int(it.text)
    return WireDecl(wtok.text, QUBIT if kw == "qubit" else MODE, cutoff=cutoff, init=init)


def _label(cur: _Cursor) -> Token:
    cur.take("arrow", "'->'")
    t = cur.take("word", "a classical label")
    cur.done()
    return t


def _measure(cur: _Cursor, lineno: int, head: Token):
    kind = cur.take("word", "z, count or obs")
    if kind.text in ("z", "count"):
        wt = cur.take("word", "a wire")
        lt = _label(cur)
        return Measure(kind.text, (wt.text,), lt.text), _Where(lineno, kind.col, [wt.col], lt.col)
    if kind.text == "obs":
        gt = cur.take("word", "an observable gate")
        params = _exprs(cur.peek("params") and cur.take("params", "parameters"), allow_free=False)
        ops = []
        while cur.peek("word"):
            ops.append(cur.take("word", "a wire"))
        lt = _label(cur)
        if gt.text not in GATES:
            raise _LineError("UnknownGate", gt.col, f"unknown gate {gt.text!r}")
        ins = Measure("obs", tuple(t.text for t in ops), lt.text, GateCall(gt.text, params))
        return ins, _Where(lineno, gt.col, [t.col for t in ops], lt.col)
    raise _LineError("Syntax", kind.col, f"unknown measurement {kind.text!r}")


def _post(cur: _Cursor, lineno: int):
    gt = cur.take("word", "a classical gate")
    ptok = cur.peek("params") and cur.take("params", "arguments")
    args = _exprs(ptok, allow_free=False)
    if gt.text not in _POST_ARGS:
        raise _LineError("UnknownGate", gt.col, f"unknown classical gate {gt.text!r}")
    if len(args) != _POST_ARGS[gt.text]:
        raise _LineError("ParamCount", gt.col, f"{gt.text} takes {_POST_ARGS[gt.text]} argument(s)")
    ins_tok = []
    while cur.peek("word"):
        ins_tok.append(cur.take("word", "an input"))
    lt = _label(cur)
    col = ptok.col if ptok else gt.col
    if gt.text == "mapcount":
        N = _int_arg(args[0], col)
        if N < 1:
            raise _LineError("BadParameter", col, "mapcount needs N >= 1")
        gate = ClassicalGate("mapcount", N)
    elif gt.text == "cexchange":
        N, trig = _int_arg(args[0], col), _int_arg(args[1], col)
        if N < 1 or trig not in (1, -1):
            raise _LineError("BadParameter", col, "cexchange needs N >= 1 and trigger +1 or -1")
        gate = ClassicalGate("cexchange", N, trigger=trig)
    else:
        gate = ClassicalGate(gt.text)
    if gate.arity is not None and len(ins_tok) != gate.arity:
        raise _LineError("ArityError", gt.col, f"{gt.text} takes {gate.arity} input(s), got {len(ins_tok)}")
    if not ins_tok:
        raise _LineError("ArityError", gt.col, f"{gt.text} needs at least one input")
    ins = ClassicalOp(gate, tuple(t.text for t in ins_tok), lt.text)
    return ins, _Where(lineno, gt.col, [t.col for t in ins_tok], lt.col)


def _gate(head: Token, cur: _Cursor, lineno: int):
    params = _exprs(cur.peek("params") and cur.take("params", "parameters"))
    ops = []
    while cur.peek("word") and cur.peek("word").text not in ("ctrl", "cctrl"):
        ops.append(cur.take("word", "a wire"))
    controls, ctrl_cols, condition, cond_col = [], [], None, None
    while cur.peek("word"):
        kw = cur.take("word", "ctrl or cctrl")
        wt = cur.take("word", "a wire")
        cur.take("eq", "'='")
        val = int(cur.take("value", "a value").text)
        if kw.text == "ctrl":
            controls.append((wt.text, val))
            ctrl_cols.append(wt.col)
        elif kw.text == "cctrl":
            if condition is not None:
                raise _LineError("InvalidControl", kw.col, "at most one classical condition")
            condition, cond_col = (wt.text, val), wt.col
        else:
            raise _LineError("Syntax", kw.col, f"unexpected {kw.text!r}")
    cur.done()
    if head.text not in GATES:
        raise _LineError("UnknownGate", head.col, f"unknown gate {head.text!r}")
    if not ops:
        raise _LineError("ArityError", head.col, f"{head.text} needs wire operands")
    ins = Unitary(GateCall(head.text, params), tuple(t.text for t in ops), tuple(controls), condition)
    return ins, _Where(lineno, head.col, [t.col for t in ops] + ctrl_cols, None, cond_col)


def parse(text: str) -> CircuitIR:
    """Parse a ``.qc`` program; raises :class:`DslError` listing the diagnostics."""
    circuit, diags = check(text)
    if diags:
        raise DslError(diags)
    return circuit


def load(path) -> CircuitIR:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def shipped_circuits() -> dict:
    """Sample ``.qc`` files bundled with the package, keyed by file stem."""
    root = resources.files("interferoq") / "circuits"
    return {f.name.removesuffix(".qc"): f for f in sorted(root.iterdir(), key=lambda f: f.name) if f.name.endswith(".qc")}


# --- serialization ------------------------------------------------------------------


def _fmt_int(v: int) -> str:
    return f"+{v}" if v > 0 else str(v)


def _gate_text(g: GateCall) -> str:
    if g.operator is not None:
        raise InterferoqError(f"custom gate {g.name!r} has no text form")
    if g.params:
        return f"{g.name}({','.join(p.text for p in g.params)})"
    return g.name


def serialize(c: CircuitIR) -> str:
    lines = []
    if c.name:
        lines.append(f"circuit {c.name}")
    for w in c.wires:
        if w.kind == QUBIT:
            lines.append(f"qubit {w.name}" + (f" init {w.init}" if w.init else ""))
        elif w.kind == MODE:
            lines.append(f"mode {w.name} cutoff {w.cutoff}" + (f" init {w.init}" if w.init else ""))
        else:
            lines.append(f"classical {w.name} {w.alphabet}")
    for ins in c.instructions:
        if isinstance(ins, Unitary):
            parts = [_gate_text(ins.gate), *ins.wires]
            parts += [f"ctrl {w}={v}" for w, v in ins.controls]
            if ins.condition is not None:
                parts.append(f"cctrl {ins.condition[0]}={_fmt_int(int(ins.condition[1]))}")
            lines.append(" ".join(parts))
        elif isinstance(ins, Measure):
            if ins.kind == "discard":
                lines.append("discard " + " ".join(ins.wires))
            elif ins.kind == "obs":
                lines.append(f"measure obs {_gate_text(ins.observable)} {' '.join(ins.wires)} -> {ins.label}")
            else:
                lines.append(f"measure {ins.kind} {ins.wires[0]} -> {ins.label}")
        else:
            g = ins.gate
            if g.kind == "mapcount":
                head = f"mapcount({g.N})"
            elif g.kind == "cexchange":
                head = f"cexchange({g.N},{g.trigger})"
            elif g.kind == "table":
                raise InterferoqError("lookup-table classical gates have no text form")
            else:
                head = g.kind
            lines.append(f"post {head} {' '.join(ins.inputs)} -> {ins.label}")
    if c.outputs:
        lines.append("output " + " ".join(c.outputs))
    return "\n".join(lines) + "\n"


__all__ = ["CODES", "Diagnostic", "DslError", "check", "load", "parse", "serialize"]
