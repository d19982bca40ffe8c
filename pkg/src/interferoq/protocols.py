"""Phase-estimation interferometers as circuits, their closed-form fringes,
and the sweep / sensitivity / scaling harness.

Mode wires come first and a helper qubit (if any) last.  Each protocol ends
in a sign-valued wire ``z``; the conventional interferometers end in the
integer wire ``2m`` instead.  The phase to estimate is the free parameter
``phi``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .circuit import CircuitBuilder, CircuitIR, GateCall, Unitary, format_number, simulate
from .config import TOLERANCES
from .errors import DegenerateOperatingPoint, UnsupportedParameter
from .gates import policy_cutoff
from .hilbert import HilbertSpec, Operator, StateVector
from .measurement import ClassicalGate, OutcomeDistribution

PI = np.pi

FOCK = "fock"
COHERENT = "coherent"


@dataclass(frozen=True)
class ProtocolId:
    """A protocol name plus its size parameter (``N`` or ``alpha``)."""

    name: str
    N: int | None = None
    alpha: complex | None = None
    shift: float | None = None  # optional fringe-shift angle for the qubit-assisted variants
    cutoff: int | None = None  # override the default Fock cutoff

    def __post_init__(self):
        if self.name not in PROTOCOLS:
            raise UnsupportedParameter(f"unknown protocol {self.name!r}")
        fam = PROTOCOLS[self.name].family
        if fam == FOCK:
            if self.N is None or int(self.N) != self.N or self.N < 1:
                raise UnsupportedParameter(f"{self.name} needs an integer N >= 1, got {self.N!r}")
            object.__setattr__(self, "N", int(self.N))
        else:
            if self.alpha is None or self.alpha == 0:
                raise UnsupportedParameter(f"{self.name} needs a nonzero alpha")
            object.__setattr__(self, "alpha", complex(self.alpha))
        if self.shift is not None and not PROTOCOLS[self.name].shiftable:
            raise UnsupportedParameter(f"{self.name} has no fringe-shift gate")

    @property
    def family(self) -> str:
        return PROTOCOLS[self.name].family

    @property
    def resource(self) -> float:
        return float(self.N) if self.family == FOCK else abs(self.alpha) ** 2


def _as_id(pid, **kwargs) -> ProtocolId:
    if isinstance(pid, ProtocolId):
        return replace(pid, **kwargs) if kwargs else pid
    return ProtocolId(pid, **kwargs)


@dataclass(frozen=True)
class _Entry:
    family: str
    builder: Callable[[ProtocolId], CircuitIR]
    signal: str = "z"
    shiftable: bool = False
    postselected: tuple[str, str] | None = None  # (herald label, conditional label)
    default_phi0: Callable[[ProtocolId], float] | None = None


PROTOCOLS: dict[str, _Entry] = {}


def _protocol(name, family, signal="z", shiftable=False, postselected=None, phi0=None):
    def deco(fn):
        PROTOCOLS[name] = _Entry(family, fn, signal, shiftable, postselected, phi0)
        return fn

    return deco


def _cut(pid: ProtocolId, amplitude_factor: float = 1.0) -> int:
    if pid.cutoff is not None:
        return pid.cutoff
    if pid.family == FOCK:
        return pid.N
    return policy_cutoff(amplitude_factor * abs(pid.alpha))


def _a(pid: ProtocolId, scale=1.0) -> complex:
    return complex(scale * pid.alpha)


# --- conventional interferometers -------------------------------------------------------


@_protocol("conventional-qubit", FOCK, signal="2m", phi0=lambda p: PI / 2)
def _conventional_qubit(pid):
    b = CircuitBuilder(f"conventional-qubit N={pid.N}")
    qs = [b.qubit(f"q{j}") for j in range(pid.N)]
    for q in qs:
        b.gate("ry", q, params=["pi/2"])
        b.gate("rz", q, params=["phi"])
        b.gate("ry", q, params=["-pi/2"])
    zs = [b.measure_z(q, f"z{j}") for j, q in enumerate(qs)]
    b.post(ClassicalGate("sum"), zs, "2m")
    return b.output("2m").build()


def _conventional_modes(b: CircuitBuilder):
    b.gate("ry2", "m0", "m1", params=["pi/2"])
    b.gate("rz2", "m0", "m1", params=["phi"])
    b.gate("ry2", "m0", "m1", params=["-pi/2"])
    b.count("m0", "n0")
    b.count("m1", "n1")
    b.post(ClassicalGate("diff"), ["n0", "n1"], "2m")
    return b.output("2m").build()


@_protocol("conventional-modal", FOCK, signal="2m", phi0=lambda p: PI / 2)
def _conventional_modal(pid):
    b = CircuitBuilder(f"conventional-modal N={pid.N}")
    b.mode("m0", _cut(pid), init=pid.N)
    b.mode("m1", _cut(pid))
    return _conventional_modes(b)


@_protocol("conventional-coherent", COHERENT, signal="2m", phi0=lambda p: PI / 2)
def _conventional_coherent(pid):
    b = CircuitBuilder(f"conventional-coherent alpha={format_number(pid.alpha)}")
    c = _cut(pid)
    b.mode("m0", c)
    b.mode("m1", c)
    b.gate("disp", "m0", params=[_a(pid)])
    return _conventional_modes(b)


# --- Heisenberg-limited Fock-state interferometers ---------------------------------------


@_protocol("fock-single-mode", FOCK)
def _fock_single_mode(pid):
    N = pid.N
    b = CircuitBuilder(f"fock-single-mode N={N}")
    b.mode("m", _cut(pid))
    b.gate("hn", "m", params=[N])
    b.gate("phase", "m", params=["phi"])
    b.gate("hn", "m", params=[N])
    b.count("m", "n")
    b.post(ClassicalGate("mapcount", N), ["n"], "z")
    return b.output("z").build()


@_protocol("fock-single-mode-qubit", FOCK, shiftable=True)
def _fock_single_mode_qubit(pid):
    N = pid.N
    b = CircuitBuilder(f"fock-single-mode-qubit N={N}")
    b.mode("m", _cut(pid))
    b.qubit("q")
    b.gate("h", "q")
    b.gate("xn", "m", params=[N], ctrl={"q": 1})
    if pid.shift is not None:
        b.gate("zphase", "q", params=[pid.shift])
    b.gate("phase", "m", params=["phi"])
    b.gate("xn", "m", params=[N], ctrl={"q": 1})
    b.gate("h", "q")
    b.measure_z("q", "z")
    return b.output("z").build()


@_protocol("noon", FOCK)
def _noon(pid):
    N = pid.N
    b = CircuitBuilder(f"noon N={N}")
    b.mode("m0", _cut(pid))
    b.mode("m1", _cut(pid))
    b.gate("hn", "m1", params=[N])
    b.gate("xn", "m0", params=[N], ctrl={"m1": 0})
    b.gate("rz2", "m0", "m1", params=["phi"])
    b.gate("xn", "m0", params=[N], ctrl={"m1": 0})
    b.gate("hn", "m1", params=[N])
    b.count("m1", "n")
    b.post(ClassicalGate("mapcount", N), ["n"], "z")
    b.discard("m0")
    return b.output("z").build()


@_protocol("noon-qubit", FOCK, shiftable=True)
def _noon_qubit(pid):
    N = pid.N
    b = CircuitBuilder(f"noon-qubit N={N}")
    b.mode("m0", _cut(pid), init=N)
    b.mode("m1", _cut(pid))
    b.qubit("q")
    b.gate("h", "q")
    b.gate("ry2", "m0", "m1", params=["pi"], ctrl={"q": 1})
    if pid.shift is not None:
        b.gate("zphase", "q", params=[pid.shift])
    b.gate("rz2", "m0", "m1", params=["phi"])
    b.gate("ry2", "m0", "m1", params=["-pi"], ctrl={"q": 1})
    b.gate("h", "q")
    b.measure_z("q", "z")
    return b.output("z").build()


@_protocol("cat-state", FOCK)
def _cat_state(pid):
    N = pid.N
    b = CircuitBuilder(f"cat-state N={N}")
    qs = [b.qubit(f"q{j}") for j in range(N)]
    c = b.qubit("c")
    b.gate("h", c)
    for q in qs:
        b.gate("z", q, ctrl={c: 1})
        b.gate("x", q, ctrl={c: 1})
    for q in qs:
        b.gate("rz", q, params=["phi"])
    for _ in range(N):
        b.gate("z", c)
    for q in qs:
        b.gate("z", q, ctrl={c: 1})
        b.gate("x", q, ctrl={c: 1})
        b.gate("z", q, ctrl={c: 1})
    b.gate("h", c)
    b.measure_z(c, "z")
    b.discard(*qs)
    return b.output("z").build()


@_protocol("fock-postselected", FOCK, postselected=("y", "n"))
def _fock_postselected(pid):
    N = pid.N
    b = CircuitBuilder(f"fock-postselected N={N}")
    b.mode("m", _cut(pid))
    b.qubit("q")
    b.gate("h", "q")
    b.gate("xn", "m", params=[N], ctrl={"q": 1})
    b.gate("h", "q")
    b.measure_z("q", "y")
    b.gate("phase", "m", params=["phi"])
    b.gate("hn", "m", params=[N])
    b.count("m", "n")
    b.post(ClassicalGate("cexchange", N, trigger=EXCHANGE_TRIGGER), ["n", "y"], "n_ex")
    b.post(ClassicalGate("mapcount", N), ["n_ex"], "z")
    return b.output("z").build()


# The exchange must fire on y = -1 for the output to reproduce the (1 + z cos N phi)/2 fringe.
EXCHANGE_TRIGGER = -1


@_protocol("fock-coherent-prep", FOCK)
def _fock_coherent_prep(pid):
    N = pid.N
    b = CircuitBuilder(f"fock-coherent-prep N={N}")
    b.mode("m", _cut(pid))
    b.qubit("q")
    b.gate("h", "q")
    b.gate("xn", "m", params=[N], ctrl={"q": 1})
    b.gate("h", "q")
    b.gate("zn", "m", params=[N], ctrl={"q": 1})
    b.gate("h", "q")
    b.discard("q")
    b.gate("phase", "m", params=["phi"])
    b.gate("hn", "m", params=[N])
    b.count("m", "n")
    b.post(ClassicalGate("mapcount", N), ["n"], "z")
    return b.output("z").build()


def fock_feedforward(N: int) -> CircuitIR:
    """Herald-and-correct form of the single-mode protocol: the qubit result
    classically steers a Z_N correction on the mode before the phase shifter."""
    b = CircuitBuilder(f"fock-feedforward N={N}")
    b.mode("m", N)
    b.qubit("q")
    b.gate("h", "q")
    b.gate("xn", "m", params=[N], ctrl={"q": 1})
    b.gate("h", "q")
    b.measure_z("q", "y")
    b.gate("zn", "m", params=[N], cctrl=("y", -1))
    b.gate("phase", "m", params=["phi"])
    b.gate("hn", "m", params=[N])
    b.count("m", "n")
    b.post(ClassicalGate("mapcount", N), ["n"], "z")
    return b.output("z").build()


def _noon_prep(b: CircuitBuilder):
    b.gate("h", "q")
    b.gate("ry2", "m0", "m1", params=["pi"], ctrl={"q": 1})
    b.gate("h", "q")


def _swap_readout(b: CircuitBuilder, label: str):
    b.gate("rz2", "m0", "m1", params=["phi"])
    b.gate("ry2", "m0", "m1", params=["-pi/2"])
    b.count("m1", "n")
    b.post(ClassicalGate("parity"), ["n"], label)
    b.discard("m0")


@_protocol("noon-postselected", FOCK, postselected=("y", "x"))
def _noon_postselected(pid):
    N = pid.N
    b = CircuitBuilder(f"noon-postselected N={N}")
    b.mode("m0", _cut(pid), init=N)
    b.mode("m1", _cut(pid))
    b.qubit("q")
    _noon_prep(b)
    b.measure_z("q", "y")
    _swap_readout(b, "x")
    b.post(ClassicalGate("product"), ["y", "x"], "z")
    return b.output("z").build()


@_protocol("noon-coherent-prep", FOCK)
def _noon_coherent_prep(pid):
    N = pid.N
    b = CircuitBuilder(f"noon-coherent-prep N={N}")
    b.mode("m0", _cut(pid), init=N)
    b.mode("m1", _cut(pid))
    b.qubit("q")
    _noon_prep(b)
    # P_N fixes |N,0> and negates |0,N>; mode-1 parity does this only for odd N
    if N % 2:
        b.gate("parity", "m1", ctrl={"q": 1})
    else:
        b.gate("pn", "m1", params=[N], ctrl={"q": 1})
    b.gate("h", "q")
    b.discard("q")
    _swap_readout(b, "z")
    return b.output("z").build()


# --- coherent-state interferometers ---------------------------------------------------------


@_protocol("coherent-single-mode-qubit", COHERENT, phi0=lambda p: 0.0)
def _coherent_single_mode_qubit(pid):
    b = CircuitBuilder(f"coherent-single-mode-qubit alpha={format_number(pid.alpha)}")
    b.mode("m", _cut(pid, 2.0))
    b.qubit("q")
    b.gate("h", "q")
    b.gate("disp", "m", params=[_a(pid, -1)], ctrl={"q": 1})
    b.gate("s", "q")
    b.gate("phase", "m", params=["phi"])
    b.gate("disp", "m", params=[_a(pid)], ctrl={"q": 1})
    b.gate("h", "q")
    b.measure_z("q", "z")
    return b.output("z").build()


@_protocol("modal-cat-postselected", COHERENT, postselected=("y", "x"), phi0=lambda p: 0.0)
def _modal_cat_postselected(pid):
    b = CircuitBuilder(f"modal-cat-postselected alpha={format_number(pid.alpha)}")
    b.mode("m", _cut(pid, 2.0))
    b.qubit("q")
    b.gate("h", "q")
    b.gate("disp", "m", params=[_a(pid)], ctrl={"q": 1})
    b.gate("s", "q")
    b.gate("h", "q")
    b.measure_z("q", "y")
    b.gate("phase", "m", params=["phi"])
    b.gate("disp", "m", params=[_a(pid, -0.5)])
    b.count("m", "n")
    b.post(ClassicalGate("parity"), ["n"], "x")
    b.post(ClassicalGate("product"), ["y", "x"], "z")
    return b.output("z").build()


@_protocol("modal-cat-coherent", COHERENT, phi0=lambda p: 0.0)
def _modal_cat_coherent(pid):
    b = CircuitBuilder(f"modal-cat-coherent alpha={format_number(pid.alpha)}")
    b.mode("m", _cut(pid, 2.0))
    b.qubit("q")
    b.gate("h", "q")
    for _ in range(2):
        # D(alpha/2) . controlled-parity . D(-alpha/2) acts as a controlled D(alpha) Pi
        b.gate("disp", "m", params=[_a(pid, -0.5)])
        b.gate("parity", "m", ctrl={"q": 1})
        b.gate("disp", "m", params=[_a(pid, 0.5)])
        b.gate("s", "q")
        b.gate("h", "q")
    b.discard("q")
    b.gate("phase", "m", params=["phi"])
    b.gate("disp", "m", params=[_a(pid, -0.5)])
    b.count("m", "n")
    b.post(ClassicalGate("parity"), ["n"], "z")
    return b.output("z").build()


def _obbo_switch(b: CircuitBuilder, pid):
    b.gate("h", "q")
    b.gate("disp", "m1", params=[_a(pid)], ctrl={"q": 1})
    b.gate("x", "q")
    b.gate("disp", "m0", params=[_a(pid)], ctrl={"q": 1})
    b.gate("x", "q")
    b.gate("s", "q")


def _two_modes_and_qubit(name, pid) -> CircuitBuilder:
    b = CircuitBuilder(f"{name} alpha={format_number(pid.alpha)}")
    c = _cut(pid)
    b.mode("m0", c)
    b.mode("m1", c)
    b.qubit("q")
    return b


@_protocol("coherent-two-mode-qubit", COHERENT, phi0=lambda p: 0.0)
def _coherent_two_mode_qubit(pid):
    b = _two_modes_and_qubit("coherent-two-mode-qubit", pid)
    _obbo_switch(b, pid)
    b.gate("rz2", "m0", "m1", params=["phi"])
    b.gate("ry2", "m0", "m1", params=["-pi"], ctrl={"q": 1})
    b.gate("h", "q")
    b.measure_z("q", "z")
    return b.output("z").build()


@_protocol("obbo-postselected", COHERENT, postselected=("y", "x"), phi0=lambda p: 0.0)
def _obbo_postselected(pid):
    b = _two_modes_and_qubit("obbo-postselected", pid)
    _obbo_switch(b, pid)
    b.gate("h", "q")
    b.measure_z("q", "y")
    _swap_readout(b, "x")
    b.post(ClassicalGate("product"), ["y", "x"], "z")
    return b.output("z").build()


@_protocol("obbo-coherent", COHERENT, phi0=lambda p: 0.0)
def _obbo_coherent(pid):
    b = _two_modes_and_qubit("obbo-coherent", pid)
    _obbo_switch(b, pid)
    b.gate("h", "q")
    for m in ("m0", "m1"):
        b.gate("parity", m, ctrl={"q": 1})
        b.gate("disp", m, params=[_a(pid)], ctrl={"q": 1})
    b.gate("s", "q")
    b.gate("h", "q")
    b.discard("q")
    _swap_readout(b, "z")
    return b.output("z").build()


@_protocol("obbo-kerr-prep", COHERENT, phi0=lambda p: 0.0)
def _obbo_kerr_prep(pid):
    b = CircuitBuilder(f"obbo-kerr-prep alpha={format_number(pid.alpha)}")
    c = _cut(pid)
    b.mode("m0", c)
    b.mode("m1", c)
    b.gate("disp", "m0", params=[_a(pid)])
    b.gate("ry2", "m0", "m1", params=["pi/2"])
    b.gate("kerr", "m1", params=["pi/2"])
    b.gate("parity", "m1")
    b.gate("ry2", "m0", "m1", params=["pi/2"])
    _swap_readout(b, "z")
    return b.output("z").build()


@_protocol("obbo-kerr-prep-qubits", FOCK, phi0=lambda p: 0.0)
def _obbo_kerr_prep_qubits(pid):
    N = pid.N
    b = CircuitBuilder(f"obbo-kerr-prep-qubits N={N}")
    qs = [b.qubit(f"q{j}") for j in range(N)]
    for q in qs:
        b.gate("z", q)
    for q in qs:
        b.gate("h", q)
    for j in range(N):
        for k in range(j + 1, N):
            b.gate("z", qs[k], ctrl={qs[j]: 1})
    for q in qs:
        b.gate("s", q)
    for q in qs:
        b.gate("h", q)
    for q in qs:
        b.gate("x", q)
    for q in qs:
        b.gate("rz", q, params=["phi"])
        b.gate("ry", q, params=["-pi/2"])
    zs = [b.measure_z(q, f"z{j}") for j, q in enumerate(qs)]
    b.post(ClassicalGate("product"), zs, "z")
    return b.output("z").build()


# --- public constructors -----------------------------------------------------------------------


def build(pid, **kwargs) -> CircuitIR:
    """Circuit for a protocol, e.g. ``build("noon", N=3)``."""
    pid = _as_id(pid, **kwargs)
    return PROTOCOLS[pid.name].builder(pid)


def signal_label(pid) -> str:
    return PROTOCOLS[_as_id(pid).name].signal


def default_phi0(pid) -> float:
    pid = _as_id(pid)
    entry = PROTOCOLS[pid.name]
    if entry.default_phi0 is not None:
        return entry.default_phi0(pid)
    return PI / (2 * pid.N)


def phase_index(c: CircuitIR) -> int:
    """Index of the first instruction that depends on ``phi``."""
    for k, ins in enumerate(c.instructions):
        if isinstance(ins, Unitary) and "phi" in ins.gate.names:
            return k
    raise UnsupportedParameter(f"circuit {c.name!r} has no phase-dependent gate")


def prepared_state(pid, **kwargs):
    """State entering the phase shifter.

    Returns a :class:`StateVector` for protocols without earlier measurements,
    otherwise a dict from herald outcomes to the post-measurement states.
    """
    c = build(pid, **kwargs)
    k = phase_index(c)
    prefix = replace(c, instructions=c.instructions[:k], outputs=())
    dist = simulate(prefix, keep_states=True)
    if dist.labels == ():
        return dist.states[()]
    return dict(dist.states)


# --- closed forms ------------------------------------------------------------------------------


def _coh_terms(alpha, phi):
    a2 = abs(alpha) ** 2
    decay = np.exp(-2 * a2 * np.sin(phi / 2) ** 2)
    return a2, np.sin(a2 * np.sin(phi)) * decay, decay


def reference_distribution(pid, phi: float, **kwargs) -> dict | None:
    """Closed-form outcome probabilities for the signal wire, keyed by value."""
    pid = _as_id(pid, **kwargs)
    name = pid.name
    if name in ("conventional-qubit", "conventional-modal"):
        N = pid.N
        c = np.cos(phi / 2) ** 2
        return {2 * k - N: comb(N, k) * c**k * (1 - c) ** (N - k) for k in range(N + 1)}
    if name == "conventional-coherent":
        return None  # Skellam; see conventional_coherent_reference
    if pid.family == FOCK and name != "obbo-kerr-prep-qubits":
        arg = pid.N * phi
        if pid.shift is not None:
            arg += -pid.shift if name == "fock-single-mode-qubit" else pid.shift
        return {z: 0.5 * (1 + z * np.cos(arg)) for z in (1, -1)}
    if name == "obbo-kerr-prep-qubits":
        return {z: 0.5 * (1 - z * np.sin(pid.N * phi)) for z in (1, -1)}
    a2, S, _ = _coh_terms(pid.alpha, phi)
    if name in ("coherent-single-mode-qubit", "modal-cat-postselected"):
        return {z: 0.5 * (1 + z * S) for z in (1, -1)}
    if name == "modal-cat-coherent":
        return {z: modal_cat_conditional(pid.alpha, phi, z, 1) for z in (1, -1)}
    if name in ("coherent-two-mode-qubit", "obbo-postselected"):
        return {z: 0.5 * (1 - z * S) for z in (1, -1)}
    if name in ("obbo-coherent", "obbo-kerr-prep"):
        return {z: 0.5 * (1 + z * np.exp(-a2) - z * S) for z in (1, -1)}
    return None


def conventional_coherent_reference(alpha, phi: float, support: Iterable[int]) -> dict:
    """P(n0 - n1 = k) for independent Poisson counts with means |a|^2 cos^2, |a|^2 sin^2."""
    a2 = abs(alpha) ** 2
    mu0, mu1 = a2 * np.cos(phi / 2) ** 2, a2 * np.sin(phi / 2) ** 2
    out = {}
    for k in support:
        if mu1 == 0:
            out[k] = float(stats.poisson.pmf(k, mu0))
        elif mu0 == 0:
            out[k] = float(stats.poisson.pmf(-k, mu1))
        else:
            out[k] = float(stats.skellam.pmf(k, mu0, mu1))
    return out


def modal_cat_conditional(alpha, phi: float, x: int, y: int) -> float:
    """p(x|y) for the heralded single-mode cat-state protocol (exact)."""
    a2, S, _ = _coh_terms(alpha, phi)
    e = np.exp(-a2 / 2)
    g = np.exp(-4 * a2 * np.sin(phi / 2) ** 2)
    return 0.5 * (1 + 0.5 * x * e * (1 + g) + x * y * S)


def obbo_conditional(alpha, phi: float, x: int, y: int) -> float:
    """p(x|y) for the heralded two-mode coherent protocol (exact)."""
    a2, S, _ = _coh_terms(alpha, phi)
    return 0.5 * (1 + x * np.exp(-a2) - x * y * S)


def conditional_reference(pid, phi: float, x, y) -> float | None:
    pid = _as_id(pid)
    if pid.name == "modal-cat-postselected":
        return modal_cat_conditional(pid.alpha, phi, x, y)
    if pid.name == "obbo-postselected":
        return obbo_conditional(pid.alpha, phi, x, y)
    if pid.name == "noon-postselected":
        return 0.5 * (1 + x * y * np.cos(pid.N * phi))
    if pid.name == "fock-postselected":
        c = 0.5 * (1 + y * np.cos(pid.N * phi))
        return c if x == 0 else 1 - c
    return None


# --- sweeps and sensitivity --------------------------------------------------------------------


@dataclass
class ProtocolReport:
    protocol: ProtocolId
    phis: np.ndarray
    distributions: list
    mean: np.ndarray
    variance: np.ndarray
    reference: list = field(default_factory=list)
    max_deviation: float | None = None

    def probability(self, value) -> np.ndarray:
        return np.array([d[value] for d in self.distributions])


def fringe_sweep(pid, phis: Sequence[float] | None = None, **kwargs) -> ProtocolReport:
    """Simulate the protocol across ``phis`` and compare with its closed form."""
    pid = _as_id(pid, **kwargs)
    phis = np.asarray(phis if phis is not None else np.linspace(-PI, PI, 25), dtype=float)
    c = build(pid)
    label = signal_label(pid)
    dists, refs, worst = [], [], None
    for phi in phis:
        d = simulate(c, float(phi)).marginal(label)
        dists.append(d)
        if pid.name == "conventional-coherent":
            ref = conventional_coherent_reference(pid.alpha, phi, [k for (k,) in d.probs])
        else:
            ref = reference_distribution(pid, phi)
        refs.append(ref)
        if ref is not None:
            dev = max(abs(d[k] - v) for k, v in ref.items())
            dev = max([dev] + [p for (k,), p in d.items() if k not in ref])
            worst = dev if worst is None else max(worst, dev)
    return ProtocolReport(
        pid,
        phis,
        dists,
        np.array([d.expectation(label) for d in dists]),
        np.array([d.variance(label) for d in dists]),
        refs,
        worst,
    )


@dataclass
class ConditionalReport:
    protocol: ProtocolId
    phis: np.ndarray
    herald: dict  # y -> array of r_y
    conditional: dict  # (x, y) -> array of p(x|y)
    marginal: dict  # x -> array of p(x)
    product: dict  # z -> array of p(z)
    reference: dict  # (x, y) -> array of closed-form p(x|y)


def conditional_fringes(pid, phis: Sequence[float] | None = None, **kwargs) -> ConditionalReport:
    """Herald statistics, conditional fringes and marginals of a post-selected protocol."""
    pid = _as_id(pid, **kwargs)
    entry = PROTOCOLS[pid.name]
    if entry.postselected is None:
        raise UnsupportedParameter(f"{pid.name} is not a post-selected protocol")
    ylab, xlab = entry.postselected
    phis = np.asarray(phis if phis is not None else np.linspace(-PI, PI, 25), dtype=float)
    c = build(pid)
    c = replace(c, outputs=(ylab, xlab, "z"))
    herald, cond, marg, prod, ref = {}, {}, {}, {}, {}
    for i, phi in enumerate(phis):
        d = simulate(c, float(phi))
        ys = d.marginal(ylab)
        xs = d.marginal(xlab)
        zs = d.marginal("z")
        for (y,), r in ys.items():
            herald.setdefault(y, np.zeros(len(phis)))[i] = r
        for (x,), p in xs.items():
            marg.setdefault(x, np.zeros(len(phis)))[i] = p
        for (z,), p in zs.items():
            prod.setdefault(z, np.zeros(len(phis)))[i] = p
        xvals = sorted({k[1] for k in d.probs})
        for y in (1, -1):
            if ys[y] == 0:
                continue
            cd = d.marginal((ylab, xlab)).conditional(ylab, y)
            for x in xvals:
                cond.setdefault((x, y), np.full(len(phis), np.nan))[i] = cd[x]
                r = conditional_reference(pid, phi, x, y)
                if r is not None:
                    ref.setdefault((x, y), np.full(len(phis), np.nan))[i] = r
    return ConditionalReport(pid, phis, herald, cond, marg, prod, ref)


def _signal_stats(c: CircuitIR, label: str, phi: float) -> tuple[float, float]:
    d = simulate(c, phi).marginal(label)
    return d.expectation(label), d.std(label)


def sensitivity(pid, phi0: float | None = None, h: float = TOLERANCES.fd_step, **kwargs) -> float:
    """Error-propagation phase uncertainty std(signal) / |d<signal>/dphi| at ``phi0``.

    The derivative is a central difference Richardson-extrapolated from steps h and h/2.
    """
    pid = _as_id(pid, **kwargs)
    phi0 = default_phi0(pid) if phi0 is None else float(phi0)
    c = build(pid)
    label = signal_label(pid)

    def mean(phi):
        return simulate(c, phi).marginal(label).expectation(label)

    d1 = (mean(phi0 + h) - mean(phi0 - h)) / (2 * h)
    d2 = (mean(phi0 + h / 2) - mean(phi0 - h / 2)) / h
    deriv = (4 * d2 - d1) / 3
    if abs(deriv) < TOLERANCES.deriv_floor:
        raise DegenerateOperatingPoint(f"|d<{label}>/dphi| = {abs(deriv):.2e} at phi0 = {phi0}")
    return _signal_stats(c, label, phi0)[1] / abs(deriv)


@dataclass
class ScalingFit:
    exponent: float
    resources: np.ndarray
    deltas: np.ndarray
    intercept: float


def scaling_fit(family, params: Iterable, phi0=None, **kwargs) -> ScalingFit:
    """Log-log slope of delta-phi against the resource count.

    ``family`` is a protocol name (parameters are N for Fock families and the
    amplitude alpha for coherent ones, whose resource is |alpha|^2) or a
    callable ``param -> (resource, delta_phi)``.
    """
    params = list(params)
    resources, deltas = [], []
    for p in params:
        if callable(family):
            r, dp = family(p)
        else:
            key = "N" if PROTOCOLS[family].family == FOCK else "alpha"
            pid = ProtocolId(family, **{key: p}, **kwargs)
            p0 = phi0(pid) if callable(phi0) else phi0
            r, dp = pid.resource, sensitivity(pid, p0)
        resources.append(r)
        deltas.append(dp)
    resources = np.asarray(resources, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    slope, intercept = np.polyfit(np.log(resources), np.log(deltas), 1)
    return ScalingFit(float(slope), resources, deltas, float(intercept))


# --- disentangling circuits ------------------------------------------------------------------


def balanced_involution_pair(d: int, rng: np.random.Generator) -> tuple[Operator, Operator]:
    """Random Hermitian unitary U with equal +/-1 eigenspaces, and a unitary P with P U P^dag = -U."""
    if d % 2:
        raise UnsupportedParameter("balanced eigenspaces need an even dimension")
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    V, _ = np.linalg.qr(X)
    half = d // 2
    U = V @ np.diag([1.0] * half + [-1.0] * half) @ V.conj().T
    flip = np.zeros((d, d))
    flip[:half, half:] = np.eye(half)
    flip[half:, :half] = np.eye(half)
    P = V @ flip @ V.conj().T
    spec = HilbertSpec.modes(d - 1)
    return Operator(spec, matrix=0.5 * (U + U.conj().T)), Operator(spec, matrix=P)


def disentangling_circuits(U: Operator, P: Operator) -> dict[str, CircuitIR]:
    """Four readouts of the relative phase between the qubit branches of a
    system-qubit state; all give the same distribution of ``z``.

    (i) controlled-U, Hadamard, Z; (ii) joint observable U (x) X;
    (iii) Hadamard, Z -> y, observable U -> x, z = x y;
    (iv) Hadamard, controlled-P, observable U, qubit discarded.
    """
    cut = U.spec.dims[0] - 1
    X = Operator(HilbertSpec.qubits(1), matrix=[[0, 1], [1, 0]])
    UX = Operator(U.spec + X.spec, matrix=np.kron(U.matrix, X.matrix))
    out = {}

    b = CircuitBuilder("disentangle-i")
    b.mode("s", cut), b.qubit("q")
    b.gate("U", "s", ctrl={"q": 1}, operator=U)
    b.gate("h", "q")
    b.measure_z("q", "z")
    out["i"] = b.output("z").build()

    b = CircuitBuilder("disentangle-ii")
    b.mode("s", cut), b.qubit("q")
    b.observe(GateCall("UX", (), UX), ["s", "q"], "z", alphabet="real")
    out["ii"] = b.output("z").build()

    b = CircuitBuilder("disentangle-iii")
    b.mode("s", cut), b.qubit("q")
    b.gate("h", "q")
    b.measure_z("q", "y")
    b.observe(GateCall("U", (), U), ["s"], "x", alphabet="real")
    b.post(ClassicalGate("product"), ["y", "x"], "z")
    out["iii"] = b.output("z").build()

    b = CircuitBuilder("disentangle-iv")
    b.mode("s", cut), b.qubit("q")
    b.gate("h", "q")
    b.gate("P", "s", ctrl={"q": 1}, operator=P)
    b.discard("q")
    b.observe(GateCall("U", (), U), ["s"], "z", alphabet="real")
    out["iv"] = b.output("z").build()
    return out


def relative_state(q0: float, psi0: np.ndarray, psi1: np.ndarray) -> StateVector:
    """sqrt(q0) |psi0>|0> + sqrt(1 - q0) |psi1>|1> on (system, qubit)."""
    psi0 = np.asarray(psi0, dtype=complex)
    psi1 = np.asarray(psi1, dtype=complex)
    amps = np.sqrt(q0) * np.kron(psi0, [1, 0]) + np.sqrt(1 - q0) * np.kron(psi1, [0, 1])
    spec = HilbertSpec.modes(len(psi0) - 1) + HilbertSpec.qubits(1)
    return StateVector(spec, amps)


def disentangling_reference(q0: float, psi0, psi1, U: Operator) -> dict:
    """Closed form (1 + 2 z sqrt(q0 q1) Re<psi0|U|psi1>)/2."""
    re = np.vdot(psi0, U.matrix @ np.asarray(psi1)).real
    c = 2 * np.sqrt(q0 * (1 - q0)) * re
    return {1: 0.5 * (1 + c), -1: 0.5 * (1 - c)}


__all__ = [
    "COHERENT",
    "ConditionalReport",
    "EXCHANGE_TRIGGER",
    "FOCK",
    "PROTOCOLS",
    "ProtocolId",
    "ProtocolReport",
    "ScalingFit",
    "balanced_involution_pair",
    "build",
    "conditional_fringes",
    "conditional_reference",
    "conventional_coherent_reference",
    "default_phi0",
    "disentangling_circuits",
    "disentangling_reference",
    "fock_feedforward",
    "fringe_sweep",
    "modal_cat_conditional",
    "obbo_conditional",
    "phase_index",
    "prepared_state",
    "reference_distribution",
    "relative_state",
    "scaling_fit",
    "sensitivity",
    "signal_label",
]
