"""Unitary constructors for qubit wires, mode wires and mixed qubit-mode wires.

Conventions: ``|0>`` is the +1 eigenstate of ``Z``; a two-mode rotation
``exp(-i J.n theta)`` transforms creation operators by the transpose of the
2x2 matrix returned by :func:`rotation_qubit` for the same axis and angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import ceil, lgamma, log
from typing import Callable, Sequence

import numpy as np

from .config import TOLERANCES
from .errors import CutoffTooSmall, DimensionMismatch, NonUnitAxis, UnsupportedParameter
from .hilbert import MODE, QUBIT, HilbertSpec, Operator, Subsystem, mode, qubit
from .schwinger import ladder

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S_GATE = np.array([[1, 0], [0, 1j]], dtype=complex)

_QUBIT_SPEC = HilbertSpec((qubit(),))


def _qubit_op(m: np.ndarray) -> Operator:
    return Operator(_QUBIT_SPEC, matrix=m)


def pauli(name: str) -> Operator:
    return _qubit_op({"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z, "i": I2}[name.lower()])


def hadamard() -> Operator:
    return _qubit_op(HADAMARD)


def s_gate() -> Operator:
    return Operator(_QUBIT_SPEC, diagonal=[1, 1j])


def _unit_axis(axis: Sequence[float]) -> np.ndarray:
    n = np.asarray(axis, dtype=float).reshape(-1)
    if n.size != 3:
        raise NonUnitAxis("rotation axis must have three components")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise NonUnitAxis(f"rotation axis {n.tolist()} is not a unit vector")
    return n


def rotation_matrix(axis: Sequence[float], theta: float) -> np.ndarray:
    """The 2x2 matrix ``exp(-i sigma.n theta/2)`` written out entrywise."""
    nx, ny, nz = _unit_axis(axis)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c - 1j * nz * s, (-1j * nx - ny) * s], [(-1j * nx + ny) * s, c + 1j * nz * s]],
        dtype=complex,
    )


def rotation_qubit(axis: Sequence[float], theta: float) -> Operator:
    return _qubit_op(rotation_matrix(axis, theta))


def _two_mode_spec(spec) -> HilbertSpec:
    if isinstance(spec, int):
        return HilbertSpec.modes(spec, spec)
    if len(spec) != 2 or any(k != MODE for k in spec.kinds):
        raise DimensionMismatch("expected a two-mode HilbertSpec")
    return spec


def _sector_generator(axis: tuple, s: int, d0: int, d1: int):
    """Block of n.J on the states |s-k, k>, plus their flat indices."""
    nx, ny, nz = axis
    ks = np.arange(max(0, s - (d0 - 1)), min(s, d1 - 1) + 1)
    n0 = s - ks
    idx = n0 * d1 + ks
    block = np.diag(0.5 * nz * (n0 - ks)).astype(complex)
    # a^dag b |n0, n1> = sqrt((n0 + 1) n1) |n0 + 1, n1 - 1>, i.e. row k-1 from column k
    amp = np.sqrt((n0[1:] + 1.0) * ks[1:])
    upper = 0.5 * (nx - 1j * ny) * amp
    block[np.arange(len(ks) - 1), np.arange(1, len(ks))] = upper
    block[np.arange(1, len(ks)), np.arange(len(ks) - 1)] = upper.conj()
    return idx, block


@lru_cache(maxsize=32)
def _rotation_modes_matrix(axis: tuple, theta: float, d0: int, d1: int) -> np.ndarray:
    out = np.zeros((d0 * d1, d0 * d1), dtype=complex)
    # generator n.J is block diagonal in total photon number; exponentiate per block
    for s in range(d0 + d1 - 1):
        idx, block = _sector_generator(axis, s, d0, d1)
        w, V = np.linalg.eigh(block)
        out[np.ix_(idx, idx)] = (V * np.exp(-1j * theta * w)) @ V.conj().T
    out.setflags(write=False)
    return out


def rotation_modes(axis: Sequence[float], theta: float, mode_spec) -> Operator:
    """``exp(-i J.n theta)`` on two truncated modes."""
    spec = _two_mode_spec(mode_spec)
    n = tuple(float(v) for v in _unit_axis(axis))
    d0, d1 = spec.dims
    return Operator(spec, matrix=_rotation_modes_matrix(n, float(theta), d0, d1))


def beamsplitter(mode_spec, equatorial_phase: float = 0.0) -> Operator:
    """50/50 beamsplitter: a pi/2 rotation about an equatorial axis."""
    axis = (np.cos(equatorial_phase), np.sin(equatorial_phase), 0.0)
    return rotation_modes(axis, np.pi / 2, mode_spec)


def _mode_spec(dim: int) -> HilbertSpec:
    return HilbertSpec((Subsystem(MODE, int(dim)),))


def phase_shifter(phi: float, dim: int) -> Operator:
    """``exp(-i a^dag a phi)`` on one mode."""
    n = np.arange(dim)
    return Operator(_mode_spec(dim), diagonal=np.exp(-1j * n * phi))


def differential_phase(phi: float, mode_spec) -> Operator:
    """``exp(-i J_z phi)`` on two modes."""
    spec = _two_mode_spec(mode_spec)
    d0, d1 = spec.dims
    jz = 0.5 * (np.arange(d0)[:, None] - np.arange(d1)[None, :])
    return Operator(spec, diagonal=np.exp(-1j * phi * jz).reshape(-1))


def parity(dim: int) -> Operator:
    return Operator(_mode_spec(dim), diagonal=(-1.0) ** np.arange(dim))


def self_kerr(theta: float, dim: int) -> Operator:
    n = np.arange(dim)
    return Operator(_mode_spec(dim), diagonal=np.exp(-1j * theta * n**2))


def cross_kerr(theta: float, mode_spec) -> Operator:
    spec = _two_mode_spec(mode_spec)
    d0, d1 = spec.dims
    nn = np.arange(d0)[:, None] * np.arange(d1)[None, :]
    return Operator(spec, diagonal=np.exp(-1j * theta * nn).reshape(-1))


def poisson_tail(mean: float, cutoff: int) -> float:
    """Poisson mass strictly above ``cutoff``, summed term by term."""
    if mean <= 0:
        return 0.0
    total = 0.0
    n = cutoff + 1
    log_mean = log(mean)
    while True:
        term = np.exp(n * log_mean - mean - lgamma(n + 1))
        total += term
        if n > mean and term < 1e-18 * max(total, 1e-300):
            break
        if term == 0.0 and n > mean:
            break
        n += 1
    return float(total)


def policy_cutoff(max_amplitude: float) -> int:
    """Default Fock cutoff for coherent amplitudes up to ``max_amplitude``."""
    a = abs(max_amplitude)
    return int(ceil(a * a + 8 * a + 12))


def guard_margin(alpha: complex) -> int:
    return int(ceil(4 * abs(alpha)))


@lru_cache(maxsize=256)
def _displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    a = ladder(dim)
    # exp(alpha a^dag - alpha* a) = exp(-i h) with h Hermitian
    h = 1j * (alpha * a.conj().T - np.conj(alpha) * a)
    w, V = np.linalg.eigh(h)
    out = (V * np.exp(-1j * w)) @ V.conj().T
    out.setflags(write=False)
    return out


def displacement(alpha: complex, dim: int, tail_tol: float = TOLERANCES.tail) -> Operator:
    """Truncated ``D(alpha)``; raises if the coherent tail beyond the cutoff is too heavy."""
    alpha = complex(alpha)
    tail = poisson_tail(abs(alpha) ** 2, dim - 1)
    if tail >= tail_tol:
        raise CutoffTooSmall(
            f"cutoff {dim - 1} leaves coherent tail {tail:.2e} for |alpha|={abs(alpha):.4g}"
        )
    if alpha == 0:
        return Operator.identity(_mode_spec(dim))
    return Operator(_mode_spec(dim), matrix=_displacement_matrix(alpha, int(dim)))


def guarded_block(alpha: complex, dim: int) -> int:
    """Number of low Fock levels on which a truncated ``D(alpha)`` is trusted."""
    return max(dim - guard_margin(alpha), 0)


def subspace_gate(kind: str, N: int, dim: int) -> Operator:
    """2x2 gate X_N, Z_N, H_N or P_N on span{|0>, |N>}, identity on other levels."""
    N = int(N)
    if not 1 <= N <= dim - 1:
        raise DimensionMismatch(f"N={N} outside 1..cutoff={dim - 1}")
    kind = kind.upper().removesuffix("_N")
    blocks = {"X": PAULI_X, "Z": PAULI_Z, "H": HADAMARD, "P": PAULI_Z}
    if kind not in blocks:
        raise ValueError(f"unknown subspace gate {kind!r}")
    m = np.eye(dim, dtype=complex)
    idx = [0, N]
    m[np.ix_(idx, idx)] = blocks[kind]
    if kind in ("Z", "P"):
        return Operator(_mode_spec(dim), diagonal=np.diag(m))
    return Operator(_mode_spec(dim), matrix=m)


def controlled(inner: Operator, control_value: int = 1, control: Subsystem = None) -> Operator:
    """``P_v (x) inner + (I - P_v) (x) I`` with the control as the first subsystem.

    A qubit control selects ``|v>``; a mode control selects Fock level ``v``.
    """
    control = control or qubit()
    v = int(control_value)
    if not 0 <= v < control.dim:
        raise DimensionMismatch(f"control value {v} outside 0..{control.dim - 1}")
    spec = HilbertSpec((control,)) + inner.spec
    proj = np.zeros(control.dim)
    proj[v] = 1.0
    if inner.is_diagonal:
        diag = np.kron(proj, inner.diagonal) + np.kron(1 - proj, np.ones(inner.dim))
        return Operator(spec, diagonal=diag)
    m = np.kron(np.diag(proj), inner.matrix) + np.kron(np.diag(1 - proj), np.eye(inner.dim))
    return Operator(spec, matrix=m)


def modal_swap(mode_spec) -> Operator:
    """``|n0, n1> -> |n1, n0>``; needs equal cutoffs."""
    spec = _two_mode_spec(mode_spec)
    d0, d1 = spec.dims
    if d0 != d1:
        raise DimensionMismatch("modal swap requires equal cutoffs")
    perm = np.arange(d0 * d1).reshape(d0, d1).T.reshape(-1)
    m = np.zeros((d0 * d1, d0 * d1), dtype=complex)
    m[perm, np.arange(d0 * d1)] = 1.0
    return Operator(spec, matrix=m)


# --- registry used by the circuit IR and the DSL -----------------------------


@dataclass(frozen=True)
class GateDef:
    name: str
    kinds: tuple[str, ...]
    param_names: tuple[str, ...]
    build: Callable[..., Operator]
    int_params: tuple[int, ...] = ()
    hermitian: bool = False

    @property
    def n_params(self) -> int:
        return len(self.param_names)


def _real(x, name="parameter") -> float:
    z = complex(x)
    if abs(z.imag) > 1e-15:
        raise UnsupportedParameter(f"{name} must be real, got {x!r}")
    return z.real


def _int(x) -> int:
    r = _real(x)
    if r != round(r):
        raise UnsupportedParameter(f"expected an integer, got {x!r}")
    return int(round(r))


def _fixed(m):
    return lambda dims: _qubit_op(m)


GATES: dict[str, GateDef] = {}


def _register(name, kinds, params, build, int_params=(), hermitian=False):
    GATES[name] = GateDef(name, tuple(kinds), tuple(params), build, tuple(int_params), hermitian)


_Q, _M = QUBIT, MODE
_register("x", [_Q], [], lambda dims: _qubit_op(PAULI_X), hermitian=True)
_register("y", [_Q], [], lambda dims: _qubit_op(PAULI_Y), hermitian=True)
_register("z", [_Q], [], lambda dims: pauli("z"), hermitian=True)
_register("h", [_Q], [], lambda dims: hadamard(), hermitian=True)
_register("s", [_Q], [], lambda dims: s_gate())
_register("sdg", [_Q], [], lambda dims: s_gate().dagger())
_register("rx", [_Q], ["theta"], lambda dims, t: rotation_qubit((1, 0, 0), _real(t)))
_register("ry", [_Q], ["theta"], lambda dims, t: rotation_qubit((0, 1, 0), _real(t)))
_register("rz", [_Q], ["theta"], lambda dims, t: rotation_qubit((0, 0, 1), _real(t)))
_register(
    "rot",
    [_Q],
    ["nx", "ny", "nz", "theta"],
    lambda dims, nx, ny, nz, t: rotation_qubit((_real(nx), _real(ny), _real(nz)), _real(t)),
)
# exp(i theta/2) exp(-i Z theta/2) = diag(1, e^{i theta}); S is theta = pi/2
_register(
    "zphase",
    [_Q],
    ["theta"],
    lambda dims, t: Operator(_QUBIT_SPEC, diagonal=[1, np.exp(1j * _real(t))]),
)
_register("phase", [_M], ["phi"], lambda dims, p: phase_shifter(_real(p), dims[0]))
_register("disp", [_M], ["alpha"], lambda dims, a: displacement(complex(a), dims[0]))
_register("parity", [_M], [], lambda dims: parity(dims[0]), hermitian=True)
_register("kerr", [_M], ["theta"], lambda dims, t: self_kerr(_real(t), dims[0]))
for _kind in ("x", "z", "h", "p"):
    _register(
        f"{_kind}n",
        [_M],
        ["N"],
        (lambda k: lambda dims, n: subspace_gate(k, _int(n), dims[0]))(_kind),
        int_params=(0,),
        hermitian=True,
    )
_register("bs", [_M, _M], [], lambda dims: beamsplitter(HilbertSpec.modes(dims[0] - 1, dims[1] - 1)))
for _ax, _vec in (("x", (1, 0, 0)), ("y", (0, 1, 0))):
    _register(
        f"r{_ax}2",
        [_M, _M],
        ["theta"],
        (lambda v: lambda dims, t: rotation_modes(v, _real(t), HilbertSpec.modes(dims[0] - 1, dims[1] - 1)))(_vec),
    )
_register(
    "rz2",
    [_M, _M],
    ["theta"],
    lambda dims, t: differential_phase(_real(t), HilbertSpec.modes(dims[0] - 1, dims[1] - 1)),
)
_register(
    "rot2",
    [_M, _M],
    ["nx", "ny", "nz", "theta"],
    lambda dims, nx, ny, nz, t: rotation_modes(
        (_real(nx), _real(ny), _real(nz)), _real(t), HilbertSpec.modes(dims[0] - 1, dims[1] - 1)
    ),
)
_register(
    "swap",
    [_M, _M],
    [],
    lambda dims: modal_swap(HilbertSpec.modes(dims[0] - 1, dims[1] - 1)),
    hermitian=True,
)
_register(
    "xkerr",
    [_M, _M],
    ["theta"],
    lambda dims, t: cross_kerr(_real(t), HilbertSpec.modes(dims[0] - 1, dims[1] - 1)),
)


@lru_cache(maxsize=1024)
def build_gate(name: str, params: tuple, dims: tuple[int, ...]) -> Operator:
    """Construct a registered gate for concrete parameter values and wire dims."""
    gdef = GATES[name]
    if len(params) != gdef.n_params:
        raise UnsupportedParameter(f"{name} takes {gdef.n_params} parameters, got {len(params)}")
    return gdef.build(dims, *params)


__all__ = [
    "GATES",
    "GateDef",
    "beamsplitter",
    "build_gate",
    "controlled",
    "cross_kerr",
    "differential_phase",
    "displacement",
    "guard_margin",
    "guarded_block",
    "hadamard",
    "modal_swap",
    "mode",
    "parity",
    "pauli",
    "phase_shifter",
    "poisson_tail",
    "policy_cutoff",
    "rotation_matrix",
    "rotation_modes",
    "rotation_qubit",
    "s_gate",
    "self_kerr",
    "subspace_gate",
]
