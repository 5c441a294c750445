"""Phase-shift unitaries with a diagonal exponent."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..partition import (
    NumericError,
    PartitionedState,
    PartitionScheme,
    StructuralError,
    map_blocks,
)


@dataclass(frozen=True, eq=False)
class DiagonalOperator:
    """Real diagonal ``diag(O)`` stored as one block per worker."""

    scheme: PartitionScheme
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.blocks) != self.scheme.worker_count:
            raise StructuralError("one block per worker required")
        for block, size in zip(self.blocks, self.scheme.local_sizes):
            if block.shape != (size,):
                raise StructuralError("diagonal block does not match the partition")
            if not np.all(np.isfinite(block)):
                raise NumericError("diagonal operator entries must be finite")

    @classmethod
    def from_array(cls, values, scheme: PartitionScheme) -> "DiagonalOperator":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (scheme.system_size,):
            raise StructuralError(
                f"{values.shape[0] if values.ndim else 0} values for N={scheme.system_size}"
            )
        blocks = tuple(
            values[a:b].copy() for a, b in map(scheme.bounds, range(scheme.worker_count))
        )
        return cls(scheme, blocks)

    @classmethod
    def from_function(
        cls, fn: Callable[[int, int], np.ndarray], scheme: PartitionScheme, pool=None
    ) -> "DiagonalOperator":
        """Build each block from ``fn(local_size, offset)``, one call per worker."""
        blocks = map_blocks(
            pool,
            lambda size, offset: np.asarray(fn(size, offset), dtype=np.float64).reshape(size),
            scheme.local_sizes,
            scheme.offsets,
        )
        return cls(scheme, tuple(blocks))

    def to_array(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    def repartition(self, scheme: PartitionScheme) -> "DiagonalOperator":
        if scheme == self.scheme:
            return self
        return DiagonalOperator.from_array(self.to_array(), scheme)


def phase_shift(
    state: PartitionedState, op: DiagonalOperator, gamma: float
) -> PartitionedState:
    """``c_i <- exp(-i gamma o_i) c_i``; block-local, no communication."""
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise NumericError(f"phase parameter is not finite: {gamma}")
    if op.scheme != state.scheme:
        raise StructuralError("operator and state are partitioned differently")
    return state.map(lambda c, o: c * np.exp(-1j * gamma * o), op.blocks)
