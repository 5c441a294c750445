"""Independent dense reference computations used by the tests.

Nothing here touches the package's kernels: Pauli operators are built from
Kronecker products of 2x2 matrices, exponentials from a Hermitian
eigendecomposition, and costs by explicit loops over bitstrings.
"""

import itertools
from functools import reduce

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli_string(n, factors):
    """Dense ``n``-qubit operator; qubit 0 is the leftmost Kronecker factor."""
    return reduce(np.kron, [PAULI[factors.get(q, "I")] for q in range(n)])


def hypercube(n):
    return sum(pauli_string(n, {a: "X"}) for a in range(n)).real


def hopping(n, pairs):
    return sum(
        pauli_string(n, {a: "X", b: "X"}) + pauli_string(n, {a: "Y", b: "Y"})
        for a, b in pairs
    ).real


def circulant(generator):
    """``W[j, k] = w[(j - k) mod M]`` built by explicit indexing."""
    m = len(generator)
    return np.array([[generator[(j - k) % m] for k in range(m)] for j in range(m)], dtype=float)


def expm_herm(h, t):
    """``exp(-i t H)`` for Hermitian ``H`` via ``numpy.linalg.eigh``."""
    lam, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * lam)) @ v.conj().T


def bits(index, n):
    return [(index >> (n - 1 - q)) & 1 for q in range(n)]


def maxcut_costs(edges, n):
    return np.array(
        [sum(b[u] == b[v] for u, v in edges) for b in (bits(i, n) for i in range(2 ** n))],
        dtype=float,
    )


def qaoa_state(q, n, thetas):
    """Dense QAOA evolution from ``|+>`` with ``thetas = (g1, t1, g2, t2, ...)``."""
    psi = np.full(2 ** n, 2 ** (-n / 2), dtype=complex)
    w = hypercube(n)
    for g, t in zip(thetas[0::2], thetas[1::2]):
        psi = np.exp(-1j * g * q) * psi
        psi = expm_herm(w, t) @ psi
    return psi


def random_state(rng, size):
    psi = rng.normal(size=size) + 1j * rng.normal(size=size)
    return psi / np.linalg.norm(psi)


def net_positions(assets):
    """``sum z`` per basis state of the two-qubits-per-asset encoding."""
    out = []
    for i in range(4 ** assets):
        b = bits(i, 2 * assets)
        out.append(sum(b[2 * k] - b[2 * k + 1] for k in range(assets)))
    return np.array(out)


def constrained_count(assets, net):
    return sum(1 for z in itertools.product((-1, 0, 1), repeat=assets) if sum(z) == net)
