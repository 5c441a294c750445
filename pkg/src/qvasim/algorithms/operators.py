"""Operator generators: Pauli-term sums, hypercube, complete-graph and parity mixers.

Qubit 0 is the most significant bit of a basis index, so for ``n`` qubits
qubit ``a`` is bit ``n - 1 - a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from ..partition import PartitionScheme, StructuralError, plan_partition
from ..propagators import (
    CirculantSpectrum,
    DiagonalOperator,
    SparseOperator,
    circulant_eigenvalues,
)

PAULIS = ("X", "Y", "Z")


def qubit_bit(n: int, qubit: int) -> int:
    """Bit position of ``qubit`` inside a basis index."""
    return n - 1 - qubit


@dataclass
class PauliTermList:
    """Real-coefficient sum of Pauli strings on ``n`` qubits.

    Each term is ``(coefficient, {qubit: "X" | "Y" | "Z"})``; an empty
    factor map is the identity.
    """

    n: int
    terms: list[tuple[float, dict[int, str]]] = field(default_factory=list)

    def __post_init__(self):
        if self.n < 1:
            raise StructuralError("a Pauli sum needs at least one qubit")
        clean = []
        for coef, factors in self.terms:
            factors = {int(q): str(p).upper() for q, p in dict(factors).items()}
            for q, p in factors.items():
                if not 0 <= q < self.n:
                    raise StructuralError(f"qubit {q} outside a {self.n}-qubit register")
                if p not in PAULIS:
                    raise StructuralError(f"unknown Pauli factor {p!r}")
            clean.append((float(coef), factors))
        self.terms = clean

    def add(self, coefficient: float, factors: Mapping[int, str]) -> "PauliTermList":
        self.terms.extend(PauliTermList(self.n, [(coefficient, factors)]).terms)
        return self

    def __add__(self, other: "PauliTermList") -> "PauliTermList":
        if other.n != self.n:
            raise StructuralError("cannot add Pauli sums on different registers")
        return PauliTermList(self.n, self.terms + other.terms)

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def is_diagonal(self) -> bool:
        return all(p == "Z" for _, f in self.terms for p in f.values())

    def _masks(self, factors):
        masks = {"X": 0, "Y": 0, "Z": 0}
        for q, p in factors.items():
            masks[p] |= 1 << qubit_bit(self.n, q)
        return masks

    def diagonal_block(self, local_size: int, offset: int) -> np.ndarray:
        """Entries ``offset .. offset + local_size`` of a Z-only sum."""
        if not self.is_diagonal:
            raise StructuralError("Pauli sum has off-diagonal (X or Y) factors")
        idx = np.arange(offset, offset + local_size, dtype=np.int64)
        out = np.zeros(local_size)
        for coef, factors in self.terms:
            zmask = self._masks(factors)["Z"]
            out += coef * _parity_sign(idx & zmask)
        return out

    def diagonal(self, scheme: PartitionScheme | None = None, pool=None) -> DiagonalOperator:
        scheme = scheme or plan_partition(2 ** self.n, 1)
        self._check_scheme(scheme)
        return DiagonalOperator.from_function(self.diagonal_block, scheme, pool)

    def row_block(self, local_size: int, offset: int) -> sp.csr_matrix:
        """CSR rows ``offset .. offset + local_size`` with global columns."""
        size = 2 ** self.n
        rows = np.arange(offset, offset + local_size, dtype=np.int64)
        r_all, c_all, v_all = [], [], []
        for coef, factors in self.terms:
            m = self._masks(factors)
            cols = rows ^ (m["X"] | m["Y"])
            n_y = bin(m["Y"]).count("1")
            vals = coef * (1j ** n_y) * _parity_sign(cols & (m["Z"] | m["Y"]))
            r_all.append(rows - offset)
            c_all.append(cols)
            v_all.append(vals)
        if not r_all:
            return sp.csr_matrix((local_size, size))
        block = sp.coo_matrix(
            (np.concatenate(v_all), (np.concatenate(r_all), np.concatenate(c_all))),
            shape=(local_size, size),
        ).tocsr()
        block.sum_duplicates()
        if block.nnz and np.max(np.abs(block.data.imag)) > 1e-12:
            raise StructuralError("Pauli sum is not a real matrix")
        block = sp.csr_matrix(block.real)
        block.eliminate_zeros()
        return block

    def sparse(self, scheme: PartitionScheme | None = None, pool=None) -> SparseOperator:
        scheme = scheme or plan_partition(2 ** self.n, 1)
        self._check_scheme(scheme)
        return SparseOperator.from_function(self.row_block, scheme, pool)

    def _check_scheme(self, scheme):
        if scheme.system_size != 2 ** self.n:
            raise StructuralError(
                f"scheme of size {scheme.system_size} for a {self.n}-qubit operator"
            )


def _parity_sign(bits: np.ndarray) -> np.ndarray:
    """``(-1) ** popcount(bits)`` elementwise."""
    bits = np.array(bits, dtype=np.uint64)
    parity = np.zeros(bits.shape, dtype=np.uint64)
    while np.any(bits):
        parity ^= bits & np.uint64(1)
        bits >>= np.uint64(1)
    return 1.0 - 2.0 * parity.astype(np.float64)


def hypercube_block(n: int, local_size: int, offset: int) -> sp.csr_matrix:
    """Rows of ``sum_a X_a``: index ``i`` couples to every ``i ^ (1 << b)``."""
    rows = np.arange(offset, offset + local_size, dtype=np.int64)
    cols = rows[:, None] ^ (np.int64(1) << np.arange(n, dtype=np.int64))[None, :]
    cols.sort(axis=1)
    indptr = np.arange(0, local_size * n + 1, n, dtype=np.int64)
    data = np.ones(local_size * n)
    return sp.csr_matrix((data, cols.ravel(), indptr), shape=(local_size, 2 ** n))


def hypercube_mixer(
    n: int, scheme: PartitionScheme | None = None, pool=None
) -> SparseOperator:
    """Adjacency matrix of the ``n``-dimensional hypercube, built per block."""
    if n < 1:
        raise StructuralError("hypercube mixer needs n >= 1")
    scheme = scheme or plan_partition(2 ** n, 1)
    if scheme.system_size != 2 ** n:
        raise StructuralError(f"scheme of size {scheme.system_size} for n={n}")
    return SparseOperator.from_function(
        lambda size, offset: hypercube_block(n, size, offset), scheme, pool
    )


def complete_mixer_spectrum(size: int) -> CirculantSpectrum:
    """Spectrum of the complete graph ``K_M``: ``M - 1`` once, then ``-1``."""
    if size < 2:
        raise StructuralError("complete-graph mixer needs M >= 2")
    row = np.ones(size)
    row[0] = 0.0
    return circulant_eigenvalues(row)


def hopping_terms(n: int, pairs: Iterable[tuple[int, int]]) -> PauliTermList:
    """``sum (X_a X_b + Y_a Y_b)`` over qubit pairs."""
    terms = PauliTermList(n)
    for a, b in pairs:
        terms.add(1.0, {a: "X", b: "X"})
        terms.add(1.0, {a: "Y", b: "Y"})
    return terms


def parity_pairs(qubits: Sequence[int]) -> tuple[list, list, list]:
    """Qubit pairs of the odd, even and closing layers over a qubit sequence.

    Pairs are taken between neighbours in ``qubits``; the ring is closed by
    the even layer for an even count and by the last layer for an odd count.
    """
    qubits = list(qubits)
    size = len(qubits)
    odd = [(qubits[i], qubits[i + 1]) for i in range(0, size - 1, 2)]
    even = [(qubits[i], qubits[i + 1]) for i in range(1, size - 1, 2)]
    last = []
    if size % 2 == 0 and size > 2:
        even.append((qubits[-1], qubits[0]))
    elif size % 2 == 1 and size > 1:
        last.append((qubits[-1], qubits[0]))
    return odd, even, last


def parity_mixers(
    qubits: Sequence[int], n: int, scheme: PartitionScheme | None = None, pool=None
) -> list[SparseOperator]:
    """``[B_odd, B_even, B_last]`` over the given qubits; empty layers are zero.

    Each layer preserves the number of 1-bits among ``qubits``. Apply them in
    the returned order with a shared time.
    """
    qubits = [int(q) for q in qubits]
    if not qubits:
        raise StructuralError("parity mixer needs at least one qubit")
    if len(set(qubits)) != len(qubits):
        raise StructuralError("parity mixer qubits must be distinct")
    if min(qubits) < 0 or max(qubits) >= n:
        raise StructuralError(f"parity mixer qubits must lie in [0, {n})")
    return [hopping_terms(n, layer).sparse(scheme, pool) for layer in parity_pairs(qubits)]
