"""Sparse mixing unitaries via a scaled truncated-Taylor exponential action.

``exp(-i t W) psi`` is computed as ``s`` substeps of
``sum_k (-i t W / s)^k psi / k!``, where ``s`` is chosen from a 1-norm bound
so that every substep converges below ``TAYLOR_TOL`` within ``MAX_DEGREE``
terms. No dense exponential is formed; each term costs one distributed SpMV.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..partition import (
    NumericError,
    PartitionedState,
    PartitionScheme,
    StructuralError,
    allgather,
    map_blocks,
    plan_partition,
)

MAX_DEGREE = 30
TAYLOR_TOL = 1e-14
# 3**27 / 27! < 1e-15, so a substep with ||tW/s||_1 <= 3 meets TAYLOR_TOL
# before MAX_DEGREE.
SUBSTEP_NORM = 3.0


@dataclass(eq=False)
class SparseOperator:
    """Real symmetric matrix stored as CSR row blocks with global columns."""

    scheme: PartitionScheme
    blocks: tuple[sp.csr_matrix, ...]
    _complex: tuple | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        n = self.scheme.system_size
        if len(self.blocks) != self.scheme.worker_count:
            raise StructuralError("one CSR block per worker required")
        blocks = []
        for block, size in zip(self.blocks, self.scheme.local_sizes):
            block = sp.csr_matrix(block, dtype=np.float64)
            if block.shape != (size, n):
                raise StructuralError(
                    f"CSR block has shape {block.shape}, expected ({size}, {n})"
                )
            blocks.append(block)
        self.blocks = tuple(blocks)

    @classmethod
    def from_matrix(cls, matrix, scheme: PartitionScheme) -> "SparseOperator":
        matrix = sp.csr_matrix(matrix)
        if np.iscomplexobj(matrix.data):
            if np.any(np.abs(matrix.data.imag) > 1e-12):
                raise StructuralError("sparse mixers must have real entries")
            matrix = sp.csr_matrix(matrix.real)
        n = scheme.system_size
        if matrix.shape != (n, n):
            raise StructuralError(f"matrix shape {matrix.shape} does not match N={n}")
        blocks = tuple(matrix[a:b] for a, b in map(scheme.bounds, range(scheme.worker_count)))
        return cls(scheme, blocks)

    @classmethod
    def from_function(cls, fn, scheme: PartitionScheme, pool=None) -> "SparseOperator":
        """Build each row block from ``fn(local_size, offset)``."""
        blocks = map_blocks(pool, fn, scheme.local_sizes, scheme.offsets)
        return cls(scheme, tuple(blocks))

    @property
    def nnz(self) -> int:
        return sum(b.nnz for b in self.blocks)

    def to_matrix(self) -> sp.csr_matrix:
        return sp.vstack(self.blocks, format="csr")

    def repartition(self, scheme: PartitionScheme) -> "SparseOperator":
        if scheme == self.scheme:
            return self
        return SparseOperator.from_matrix(self.to_matrix(), scheme)

    def one_norm(self) -> float:
        """Max absolute row sum (equals the 1-norm for symmetric matrices)."""
        sums = [float(np.asarray(abs(b).sum(axis=1)).max()) for b in self.blocks if b.shape[0]]
        return float(max(sums, default=0.0))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        m = self.to_matrix()
        diff = m - m.T
        return diff.nnz == 0 or float(np.max(np.abs(diff.data))) <= tol

    def complex_blocks(self) -> tuple[sp.csr_matrix, ...]:
        with self._lock:
            if self._complex is None:
                self._complex = tuple(b.astype(np.complex128) for b in self.blocks)
            return self._complex


def read_sparse(path, scheme: PartitionScheme | None = None) -> SparseOperator:
    """Read the text format: header ``N nnz`` then ``row col value`` lines."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise StructuralError(f"{path}: header must be 'N nnz'")
        n, nnz = int(header[0]), int(header[1])
        data = np.loadtxt(fh, ndmin=2) if nnz else np.empty((0, 3))
    if data.shape != (nnz, 3):
        raise StructuralError(f"{path}: expected {nnz} entries, found {data.shape[0]}")
    rows, cols = data[:, 0].astype(np.int64), data[:, 1].astype(np.int64)
    if nnz and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise StructuralError(f"{path}: index out of range for N={n}")
    matrix = sp.coo_matrix((data[:, 2], (rows, cols)), shape=(n, n)).tocsr()
    return SparseOperator.from_matrix(matrix, scheme or plan_partition(n, 1))


def write_sparse(path, op: SparseOperator) -> None:
    m = op.to_matrix().tocoo()
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.nnz}\n")
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def spmv(state: PartitionedState, op: SparseOperator) -> PartitionedState:
    """Distributed ``W psi``: every worker reads the gathered amplitudes it needs."""
    if op.scheme != state.scheme:
        raise StructuralError("operator and state are partitioned differently")
    x = allgather(state)
    return state.map(lambda _, w: w @ x, op.complex_blocks())


def _max_abs(pool, blocks, ranks) -> float:
    vals = map_blocks(pool, lambda r: np.max(np.abs(blocks[r]), initial=0.0), ranks)
    return float(max(vals, default=0.0))


def sparse_mix(
    state: PartitionedState, op: SparseOperator, t: float
) -> PartitionedState:
    """Apply ``exp(-i t W)`` to a partitioned state without densifying ``W``."""
    t = float(t)
    if not math.isfinite(t):
        raise NumericError(f"mixing time is not finite: {t}")
    if op.scheme != state.scheme:
        raise StructuralError("operator and state are partitioned differently")
    bound = abs(t) * op.one_norm()
    if bound == 0.0:
        return state.copy()
    substeps = max(1, math.ceil(bound / SUBSTEP_NORM))
    tau = t / substeps

    scheme = state.scheme
    pool = state.pool
    ranks = scheme.active
    mats = op.complex_blocks()
    buf = np.empty(scheme.system_size, dtype=np.complex128)
    acc = [b.copy() for b in state.blocks]

    for _ in range(substeps):
        term = [b.copy() for b in acc]
        prev = _max_abs(pool, acc, ranks)
        for k in range(1, MAX_DEGREE + 1):
            allgather(state.with_blocks(term), buf)
            scale = -1j * tau / k

            def step(r):
                nxt = mats[r] @ buf
                nxt *= scale
                acc[r] += nxt
                term[r] = nxt
                return np.max(np.abs(nxt), initial=0.0), np.max(np.abs(acc[r]), initial=0.0)

            sizes = map_blocks(pool, step, ranks)
            size = max(s for s, _ in sizes)
            acc_norm = max(a for _, a in sizes)
            if size + prev <= TAYLOR_TOL * acc_norm:
                break
            prev = size
        else:
            residual = (size + prev) / max(acc_norm, 1e-300)
            raise NumericError(
                f"Taylor series did not converge in {MAX_DEGREE} terms "
                f"(relative residual estimate {residual:.3e})"
            )
    return state.with_blocks(acc)
