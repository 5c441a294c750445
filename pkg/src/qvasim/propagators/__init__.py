"""Unitary-action kernels: diagonal phase shifts, circulant and sparse mixers."""

from .circulant import (
    CirculantSpectrum,
    circulant_eigenvalues,
    circulant_from_spectrum,
    circulant_mix,
)
from .diagonal import DiagonalOperator, phase_shift
from .sparse import SparseOperator, read_sparse, sparse_mix, spmv, write_sparse

__all__ = [
    "CirculantSpectrum",
    "DiagonalOperator",
    "SparseOperator",
    "circulant_eigenvalues",
    "circulant_from_spectrum",
    "circulant_mix",
    "phase_shift",
    "read_sparse",
    "sparse_mix",
    "spmv",
    "write_sparse",
]
