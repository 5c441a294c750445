"""Circulant mixing unitaries applied through the discrete Fourier transform.

A circulant ``W`` is diagonalised by the unitary DFT ``F``, so
``exp(-i t W) psi = F^-1 exp(-i t Lambda) F psi``. Only the spectrum is
stored; the dense matrix never exists outside of tests.

When the partition allows it the transform is distributed: the global vector
is viewed as an ``n1 x n2`` row-major matrix, each worker owning a slab of
rows, and the transform is carried out as column FFTs, a twiddle multiply
and row FFTs separated by all-to-all exchanges. The spectrum then lives in a
transposed layout (entry ``k1 + n1*k2`` at row ``k1``, column ``k2``), which
is fine because it is only ever multiplied elementwise before transforming
back. Otherwise the vector is gathered, transformed and scattered.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from ..partition import (
    NumericError,
    PartitionedState,
    PartitionScheme,
    StructuralError,
    allgather,
    map_blocks,
)

SYMMETRIC_IMAG_TOL = 1e-10


@dataclass(eq=False)
class CirculantSpectrum:
    size: int
    eigenvalues: np.ndarray
    _layouts: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues)
        if self.eigenvalues.shape != (self.size,):
            raise StructuralError("spectrum length does not match its size")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.eigenvalues)

    def transposed_blocks(self, n1: int, n2: int, workers: int) -> list[np.ndarray]:
        """Eigenvalues laid out like a distributed spectrum (row slabs of k1)."""
        key = (n1, n2, workers)
        with self._lock:
            if key not in self._layouts:
                grid = self.eigenvalues.reshape(n2, n1).T
                rows = n1 // workers
                self._layouts[key] = [
                    np.ascontiguousarray(grid[r * rows : (r + 1) * rows])
                    for r in range(workers)
                ]
            return self._layouts[key]


def circulant_eigenvalues(first_row) -> CirculantSpectrum:
    """Eigenvalues ``lambda_j = sum_k w_k exp(-2 pi i j k / M)`` of a circulant.

    The generator ``w`` defines ``W[j, k] = w[(j - k) mod M]``; for the
    symmetric generators used as mixers this is also the first row. Nearly
    real spectra (imaginary parts below 1e-10) are returned as real arrays.
    """
    w = np.asarray(first_row, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise StructuralError("first row must be a non-empty 1-D array")
    lam = np.fft.fft(w)
    if np.max(np.abs(lam.imag), initial=0.0) <= SYMMETRIC_IMAG_TOL * max(
        1.0, np.max(np.abs(lam.real), initial=0.0)
    ):
        lam = lam.real.copy()
    return CirculantSpectrum(w.size, lam)


def circulant_from_spectrum(eigenvalues) -> CirculantSpectrum:
    eigenvalues = np.asarray(eigenvalues)
    return CirculantSpectrum(eigenvalues.size, eigenvalues)


def _grid(size: int, workers: int) -> tuple[int, int] | None:
    """Factor ``size = n1 * n2`` with both factors divisible by ``workers``."""
    if workers < 2:
        return None
    best = None
    for n1 in range(workers, math.isqrt(size) + 1, workers):
        if size % n1 == 0 and (size // n1) % workers == 0:
            best = (n1, size // n1)
    return best


def distributed_layout(scheme: PartitionScheme) -> tuple[int, int] | None:
    """Grid used by the distributed transform, or None if it cannot apply."""
    k = scheme.worker_count
    if k < 2 or len(set(scheme.local_sizes)) != 1:
        return None
    return _grid(scheme.system_size, k)


def _alltoall_columns(pool, slabs, n1, n2, k):
    """Row slabs (n1/k x n2) -> column slabs (n1 x n2/k)."""
    cols = n2 // k
    return map_blocks(
        pool,
        lambda r: np.vstack([s[:, r * cols : (r + 1) * cols] for s in slabs]),
        range(k),
    )


def _alltoall_rows(pool, slabs, n1, n2, k):
    """Column slabs (n1 x n2/k) -> row slabs (n1/k x n2)."""
    rows = n1 // k
    return map_blocks(
        pool,
        lambda r: np.hstack([s[r * rows : (r + 1) * rows, :] for s in slabs]),
        range(k),
    )


@lru_cache(maxsize=16)
def _twiddles(n1, n2, k, sign):
    rows = np.arange(n1)[:, None]
    cols = n2 // k
    out = []
    for r in range(k):
        n2_idx = np.arange(r * cols, (r + 1) * cols)[None, :]
        w = np.exp(sign * 2j * np.pi * rows * n2_idx / (n1 * n2))
        w.setflags(write=False)
        out.append(w)
    return tuple(out)


def _distributed_mix(state, spectrum, t, n1, n2):
    k = state.scheme.worker_count
    pool = state.pool
    rows = n1 // k
    fwd_tw = _twiddles(n1, n2, k, -1)
    slabs = [b.reshape(rows, n2) for b in state.blocks]

    cols = _alltoall_columns(pool, slabs, n1, n2, k)
    cols = map_blocks(
        pool, lambda c, w: scipy.fft.fft(c, axis=0, norm="ortho") * w, cols, fwd_tw
    )
    spec = _alltoall_rows(pool, cols, n1, n2, k)
    lam = spectrum.transposed_blocks(n1, n2, k)

    def diagonal_step(s, lam_r):
        s = scipy.fft.fft(s, axis=1, norm="ortho")
        s *= np.exp(-1j * t * lam_r)
        return scipy.fft.ifft(s, axis=1, norm="ortho")

    spec = map_blocks(pool, diagonal_step, spec, lam)
    cols = _alltoall_columns(pool, spec, n1, n2, k)
    cols = map_blocks(
        pool,
        lambda c, w: scipy.fft.ifft(c * np.conj(w), axis=0, norm="ortho"),
        cols,
        fwd_tw,
    )
    slabs = _alltoall_rows(pool, cols, n1, n2, k)
    return state.with_blocks([s.reshape(-1) for s in slabs])


def circulant_mix(
    state: PartitionedState, spectrum: CirculantSpectrum, t: float
) -> PartitionedState:
    """Apply ``exp(-i t W)`` for the circulant ``W`` with the given spectrum."""
    t = float(t)
    if not math.isfinite(t):
        raise NumericError(f"mixing time is not finite: {t}")
    if spectrum.size != state.system_size:
        raise StructuralError(
            f"spectrum of size {spectrum.size} for a state of size {state.system_size}"
        )
    layout = distributed_layout(state.scheme)
    if layout is not None:
        return _distributed_mix(state, spectrum, t, *layout)

    psi = allgather(state)
    psi = scipy.fft.fft(psi, norm="ortho")
    psi *= np.exp(-1j * t * spectrum.eigenvalues)
    psi = scipy.fft.ifft(psi, norm="ortho")
    scheme = state.scheme
    return state.with_blocks(
        [psi[a:b].copy() for a, b in map(scheme.bounds, range(scheme.worker_count))]
    )
