"""Independent reference implementations used by the tests.

Nothing here imports the package under test: matrices are built from
scratch with numpy/scipy and fringe formulas are written out directly.
"""

from itertools import product
from math import comb, factorial

import numpy as np
from scipy import linalg, stats

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
H = (X + Z) / np.sqrt(2)
PAULI = {"x": X, "y": Y, "z": Z}


def kron_all(*ms):
    out = np.array([[1.0 + 0j]])
    for m in ms:
        out = np.kron(out, m)
    return out


def annihilation(dim):
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = np.sqrt(n)
    return a


def basis(dim, k):
    v = np.zeros(dim, dtype=complex)
    v[k] = 1
    return v


# --- qubits and Dicke states ------------------------------------------------------


def dicke(N, n1):
    """Equal superposition of all N-bit strings with n1 ones (bit 0 is the leftmost qubit)."""
    v = np.zeros(2**N, dtype=complex)
    for bits in product((0, 1), repeat=N):
        if sum(bits) == n1:
            v[int("".join(map(str, bits)), 2)] = 1
    return v / np.linalg.norm(v)


def collective_spin(axis, N):
    """(1/2) sum_j sigma_axis on qubit j."""
    out = np.zeros((2**N, 2**N), dtype=complex)
    for j in range(N):
        ops = [I2] * N
        ops[j] = PAULI[axis]
        out += kron_all(*ops)
    return out / 2


def qubit_rotation(n, theta):
    nx, ny, nz = n
    return linalg.expm(-0.5j * theta * (nx * X + ny * Y + nz * Z))


# --- two modes --------------------------------------------------------------------------


def schwinger(axis, d0, d1):
    """Schwinger operators built from kron'd ladder operators on (mode 0, mode 1)."""
    a = np.kron(annihilation(d0), np.eye(d1))
    b = np.kron(np.eye(d0), annihilation(d1))
    ad, bd = a.conj().T, b.conj().T
    if axis == "x":
        return 0.5 * (ad @ b + bd @ a)
    if axis == "y":
        return -0.5j * (ad @ b - bd @ a)
    return 0.5 * (ad @ a - bd @ b)


def sector_block(op, N, d0, d1):
    """Rows/cols |N-k, k>, k = 0..N, of a two-mode operator."""
    idx = [(N - k) * d1 + k for k in range(N + 1)]
    return op[np.ix_(idx, idx)]


def modal_rotation(n, theta, d0, d1):
    gen = sum(c * schwinger(ax, d0, d1) for c, ax in zip(n, "xyz"))
    return linalg.expm(-1j * theta * gen)


# --- single mode ------------------------------------------------------------------------


def coherent(alpha, dim):
    """Truncated Fock expansion of |alpha> (not renormalized)."""
    n = np.arange(dim)
    fact = np.array([float(factorial(int(k))) for k in n])
    return np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.sqrt(fact)


def displacement_expm(alpha, dim):
    a = annihilation(dim)
    return linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)


def poisson_tail(mean, cutoff):
    """P(n > cutoff) for Poisson(mean), via scipy's survival function."""
    return float(stats.poisson.sf(cutoff, mean))


# --- fringe formulas ------------------------------------------------------------------------


def heisenberg_fringe(z, N, phi):
    return 0.5 * (1 + z * np.cos(N * phi))


def binomial_2m(N, phi):
    """Distribution of 2m = n0 - n1 when each photon exits mode 0 w.p. cos^2(phi/2)."""
    p = np.cos(phi / 2) ** 2
    return {2 * k - N: comb(N, k) * p**k * (1 - p) ** (N - k) for k in range(N + 1)}


def coherent_single_mode(z, alpha, phi):
    a2 = abs(alpha) ** 2
    return 0.5 * (1 + z * np.sin(a2 * np.sin(phi)) * np.exp(-2 * a2 * np.sin(phi / 2) ** 2))


def coherent_two_mode(z, alpha, phi):
    a2 = abs(alpha) ** 2
    return 0.5 * (1 - z * np.sin(a2 * np.sin(phi)) * np.exp(-2 * a2 * np.sin(phi / 2) ** 2))


def obbo_conditional(x, y, alpha, phi):
    a2 = abs(alpha) ** 2
    s = np.sin(a2 * np.sin(phi)) * np.exp(-2 * a2 * np.sin(phi / 2) ** 2)
    return 0.5 * (1 + x * np.exp(-a2) - x * y * s)


def disentangling(z, q0, psi0, psi1, U):
    re = np.vdot(psi0, U @ psi1).real
    return 0.5 * (1 + 2 * z * np.sqrt(q0 * (1 - q0)) * re)


def skellam(k, mu0, mu1):
    return float(stats.skellam.pmf(k, mu0, mu1))


# --- random objects ---------------------------------------------------------------------------


def random_unitary(d, rng):
    return stats.unitary_group.rvs(d, random_state=rng)


def random_hermitian(d, rng):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (A + A.conj().T) / 2


def random_state(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def tv(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
