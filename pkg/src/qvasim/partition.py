"""Partitioned state vectors and the collectives that act on them.

A global vector of length ``N`` is split into contiguous blocks, one per
worker. Worker ``r`` owns ``local_sizes[r]`` elements starting at global index
``offsets[r]``. Workers that receive zero elements are excluded from every
collective.

Workers are threads of a :class:`concurrent.futures.ThreadPoolExecutor`;
numpy/scipy kernels release the GIL so block-local work runs concurrently.
"""

from __future__ import annotations

import itertools
import math
import os
import struct
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PartitionScheme",
    "PartitionedState",
    "StructuralError",
    "NumericError",
    "plan_partition",
    "make_pool",
    "usable_cores",
    "map_blocks",
    "scatter",
    "gather",
    "inner_product",
    "norm",
    "expectation",
    "allgather",
    "write_state",
    "read_state",
]

STATE_MAGIC = b"QVAS"
STATE_RECORD = b"c128\x00\x00\x00\x00"


class StructuralError(ValueError):
    """Mismatched shapes, schemes or parameter counts."""


class NumericError(ArithmeticError):
    """Non-finite input or a numerical method that failed to converge."""


@dataclass(frozen=True)
class PartitionScheme:
    system_size: int
    worker_count: int
    local_sizes: tuple[int, ...]
    offsets: tuple[int, ...]

    def __post_init__(self):
        if len(self.local_sizes) != self.worker_count:
            raise StructuralError("one local size per worker required")
        if sum(self.local_sizes) != self.system_size:
            raise StructuralError("local sizes must sum to the system size")
        expected = tuple(np.cumsum((0,) + self.local_sizes[:-1]).tolist())
        if tuple(self.offsets) != expected:
            raise StructuralError("offsets must be the running sum of local sizes")

    @property
    def active(self) -> tuple[int, ...]:
        """Ranks holding at least one element."""
        return tuple(r for r, size in enumerate(self.local_sizes) if size > 0)

    @property
    def excluded(self) -> tuple[int, ...]:
        return tuple(r for r, size in enumerate(self.local_sizes) if size == 0)

    @property
    def partition_table(self) -> np.ndarray:
        """Global start index of every block followed by ``system_size``."""
        return np.asarray(self.offsets + (self.system_size,), dtype=np.int64)

    def bounds(self, rank: int) -> tuple[int, int]:
        start = self.offsets[rank]
        return start, start + self.local_sizes[rank]

    def owner(self, index: int) -> int:
        """Rank that stores global element ``index``."""
        rank = int(np.searchsorted(self.partition_table, index, side="right")) - 1
        while self.local_sizes[rank] == 0:
            rank -= 1
        return rank


def plan_partition(
    system_size: int, worker_count: int, unit: int = 1
) -> PartitionScheme:
    """Split ``system_size`` elements over ``worker_count`` contiguous blocks.

    Parameters
    ----------
    system_size : int
        Global vector length.
    worker_count : int
        Number of workers.
    unit : int, optional
        Block sizes are made multiples of ``unit`` (the last active block
        absorbs any remainder when ``unit`` does not divide ``system_size``).

    Returns
    -------
    PartitionScheme
        Near-equal blocks; leftover units go to the lowest ranks.
    """
    if system_size < 1 or worker_count < 1:
        raise StructuralError("system_size and worker_count must be positive")
    if unit < 1:
        raise StructuralError("unit must be positive")
    units, tail = divmod(system_size, unit)
    base, extra = divmod(units, worker_count)
    sizes = [(base + (1 if r < extra else 0)) * unit for r in range(worker_count)]
    if tail:
        last = max(r for r, s in enumerate(sizes) if s > 0) if any(sizes) else 0
        sizes[last] += tail
    offsets = np.cumsum([0] + sizes[:-1]).tolist()
    return PartitionScheme(system_size, worker_count, tuple(sizes), tuple(offsets))


def usable_cores() -> int:
    """CPU cores this process may run on."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def make_pool(worker_count: int, threads: int | None = None) -> ThreadPoolExecutor | None:
    """Thread pool serving ``worker_count`` blocks, or None for inline execution.

    ``threads`` defaults to ``min(worker_count, usable_cores())``. Blocks keep
    their layout whatever the thread count, so results do not depend on it;
    on a single core the blocks simply run one after another.
    """
    threads = min(worker_count, usable_cores() if threads is None else threads)
    if threads <= 1:
        return None
    return ThreadPoolExecutor(max_workers=threads, thread_name_prefix="qva")


def map_blocks(pool: Executor | None, fn: Callable, *columns: Sequence) -> list:
    """Apply ``fn`` to aligned per-worker arguments, concurrently if pooled."""
    args = list(zip(*columns))
    if pool is None or len(args) <= 1:
        return [fn(*a) for a in args]
    return list(pool.map(lambda a: fn(*a), args))


@dataclass
class PartitionedState:
    scheme: PartitionScheme
    blocks: list[np.ndarray]
    pool: Executor | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.blocks) != self.scheme.worker_count:
            raise StructuralError("one block per worker required")
        for r, (block, size) in enumerate(zip(self.blocks, self.scheme.local_sizes)):
            if block.shape != (size,):
                raise StructuralError(
                    f"block {r} has shape {block.shape}, expected ({size},)"
                )

    @property
    def system_size(self) -> int:
        return self.scheme.system_size

    def copy(self) -> "PartitionedState":
        return PartitionedState(self.scheme, [b.copy() for b in self.blocks], self.pool)

    def with_blocks(self, blocks: list[np.ndarray]) -> "PartitionedState":
        return PartitionedState(self.scheme, blocks, self.pool)

    def map(self, fn: Callable, *columns: Sequence) -> "PartitionedState":
        """New state whose block ``r`` is ``fn(block_r, *column_r)``."""
        return self.with_blocks(map_blocks(self.pool, fn, self.blocks, *columns))


def scatter(
    vector: np.ndarray, scheme: PartitionScheme, pool: Executor | None = None
) -> PartitionedState:
    vector = np.asarray(vector, dtype=np.complex128)
    if vector.shape != (scheme.system_size,):
        raise StructuralError(
            f"vector of length {vector.shape} does not match N={scheme.system_size}"
        )
    blocks = [vector[a:b].copy() for a, b in map(scheme.bounds, range(scheme.worker_count))]
    return PartitionedState(scheme, blocks, pool)


def gather(state: PartitionedState) -> np.ndarray:
    """Concatenate blocks in offset order (the root's view of the state)."""
    return np.concatenate(state.blocks) if state.blocks else np.empty(0, np.complex128)


def allgather(state: PartitionedState, out: np.ndarray | None = None) -> np.ndarray:
    """Every worker writes its block into one shared global buffer."""
    if out is None:
        out = np.empty(state.system_size, dtype=np.complex128)
    scheme = state.scheme

    def put(rank):
        a, b = scheme.bounds(rank)
        out[a:b] = state.blocks[rank]

    map_blocks(state.pool, put, scheme.active)
    return out


def _exact_sum(pieces: Sequence[np.ndarray]) -> float:
    """Correctly rounded sum of all elements, so results do not depend on
    how the vector is split over workers."""
    return math.fsum(itertools.chain.from_iterable(p.tolist() for p in pieces))


def _check_same(a: PartitionScheme, b: PartitionScheme):
    if a != b:
        raise StructuralError("operands are partitioned with different schemes")


def inner_product(a: PartitionedState, b: PartitionedState) -> complex:
    """Global ``<a|b>``."""
    _check_same(a.scheme, b.scheme)
    prods = map_blocks(
        a.pool, lambda r: np.conj(a.blocks[r]) * b.blocks[r], a.scheme.active
    )
    return complex(_exact_sum([p.real for p in prods]), _exact_sum([p.imag for p in prods]))


def norm(state: PartitionedState) -> float:
    probs = map_blocks(
        state.pool,
        lambda r: state.blocks[r].real ** 2 + state.blocks[r].imag ** 2,
        state.scheme.active,
    )
    return math.sqrt(_exact_sum(probs))


def expectation(
    state: PartitionedState,
    observables: Sequence[np.ndarray],
    observable_map: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """Global ``sum_i |c_i|^2 g(q_i)``.

    ``observables`` holds one real block per worker, partitioned like the
    state (a :class:`~qvasim.propagators.DiagonalOperator` is accepted).
    """
    blocks = getattr(observables, "blocks", observables)
    scheme = getattr(observables, "scheme", None)
    if scheme is not None:
        _check_same(state.scheme, scheme)
    if len(blocks) != state.scheme.worker_count:
        raise StructuralError("observable partition does not match the state")

    def weighted(r):
        q = blocks[r]
        if q.shape != state.blocks[r].shape:
            raise StructuralError("observable block shape does not match the state")
        if observable_map is not None:
            q = np.asarray(observable_map(q), dtype=np.float64)
        if not np.all(np.isfinite(q)):
            raise NumericError(f"non-finite observable value on worker {r}")
        c = state.blocks[r]
        return (c.real ** 2 + c.imag ** 2) * q

    return _exact_sum(map_blocks(state.pool, weighted, state.scheme.active))


def write_state(path, state: PartitionedState | np.ndarray) -> None:
    """Binary dump: ``b"QVAS"``, u64 N, 8-byte record tag ``c128``, then data.

    All fields little-endian; data is N interleaved (re, im) float64 pairs.
    """
    vector = gather(state) if isinstance(state, PartitionedState) else state
    vector = np.ascontiguousarray(vector, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(STATE_MAGIC)
        fh.write(struct.pack("<Q", vector.size))
        fh.write(STATE_RECORD)
        fh.write(vector.tobytes())


def read_state(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(20)
        if len(header) != 20 or header[:4] != STATE_MAGIC:
            raise StructuralError(f"{path}: not a state dump")
        (size,) = struct.unpack("<Q", header[4:12])
        if header[12:20] != STATE_RECORD:
            raise StructuralError(f"{path}: unsupported record type {header[12:20]!r}")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != size:
        raise StructuralError(f"{path}: expected {size} amplitudes, found {data.size}")
    return data.astype(np.complex128)
