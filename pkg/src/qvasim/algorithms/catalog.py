"""Prebuilt ansatz specifications for QAOA, ex-QAOA, QAOAz and QWOA."""

from __future__ import annotations

import math
from functools import reduce
from typing import Sequence

import numpy as np

from ..ansatz import AnsatzSpec, UnitarySpec
from ..partition import StructuralError
from ..propagators import DiagonalOperator, SparseOperator
from .operators import PauliTermList, complete_mixer_spectrum, hypercube_mixer, parity_mixers
from .problems import portfolio_qualities, portfolio_qubit_qualities


def _phase_source(qualities):
    """Accept an array, a DiagonalOperator or a ``(local_size, offset)`` generator."""
    if callable(qualities) and not isinstance(qualities, DiagonalOperator):
        return lambda scheme, _: DiagonalOperator.from_function(qualities, scheme)
    return qualities


def _hypercube(n):
    return lambda scheme, _: hypercube_mixer(n, scheme)


def _check_size(qualities, size):
    length = getattr(qualities, "scheme", None)
    length = length.system_size if length is not None else (
        None if callable(qualities) else np.asarray(qualities).size
    )
    if length is not None and length != size:
        raise StructuralError(f"{length} qualities for a system of size {size}")


def qaoa_spec(n: int, qualities, depth: int = 1, seed: int = 0, label: str = "qaoa") -> AnsatzSpec:
    """Phase shift by the qualities, then the hypercube mixer; ``|theta| = 2D``."""
    size = 2 ** n
    _check_size(qualities, size)
    return AnsatzSpec(
        system_size=size,
        unitaries=[
            UnitarySpec("phase", _phase_source(qualities), name="phase"),
            UnitarySpec("sparse", _hypercube(n), name="hypercube"),
        ],
        observables=0,
        depth=depth,
        seed=seed,
        label=label,
    )


def exqaoa_spec(
    n: int,
    terms: Sequence[PauliTermList],
    depth: int = 1,
    seed: int = 0,
    label: str = "exqaoa",
) -> AnsatzSpec:
    """One phase parameter per diagonal term plus the hypercube mixer.

    The quality operator is the sum of ``terms``; ``|theta| = (|terms| + 1) D``.
    """
    terms = list(terms)
    if not terms:
        raise StructuralError("ex-QAOA needs at least one phase term")
    for i, term in enumerate(terms):
        if term.n != n:
            raise StructuralError(f"term {i} acts on {term.n} qubits, expected {n}")
        if not term.is_diagonal:
            raise StructuralError(f"term {i} is not diagonal (contains X or Y)")
    return AnsatzSpec(
        system_size=2 ** n,
        unitaries=[
            UnitarySpec(
                "phase",
                lambda scheme, _: [t.diagonal(scheme) for t in terms],
                n_params=len(terms),
                name="phase-terms",
            ),
            UnitarySpec("sparse", _hypercube(n), name="hypercube"),
        ],
        observables=0,
        depth=depth,
        seed=seed,
        label=label,
    )


def qaoaz_spec(
    n: int,
    qualities,
    mixers: Sequence,
    initial_state,
    depth: int = 1,
    seed: int = 0,
    label: str = "qaoaz",
) -> AnsatzSpec:
    """Phase shift, then the parity mixers in order with one shared time."""
    size = 2 ** n
    _check_size(qualities, size)
    state = np.asarray(initial_state, dtype=np.complex128)
    if state.shape != (size,):
        raise StructuralError(f"initial state of length {state.size}, expected {size}")
    if abs(math.fsum(np.abs(state) ** 2) - 1.0) > 1e-10:
        raise StructuralError("initial state is not normalised")
    mixers = list(mixers)
    if not mixers:
        raise StructuralError("QAOAz needs at least one mixer")
    for m in mixers:
        if isinstance(m, SparseOperator) and m.scheme.system_size != size:
            raise StructuralError("mixer size does not match the system")
    return AnsatzSpec(
        system_size=size,
        unitaries=[
            UnitarySpec("phase", _phase_source(qualities), name="phase"),
            UnitarySpec("sparse", mixers, name="parity"),
        ],
        observables=0,
        depth=depth,
        initial_state=state,
        seed=seed,
        label=label,
    )


def qwoa_spec(qualities, depth: int = 1, seed: int = 0, label: str = "qwoa") -> AnsatzSpec:
    """Walk over the ``M`` valid solutions with the complete-graph mixer.

    The simulation basis is the indexed valid subspace, so ``M`` need not
    be a power of two and the indexing unitaries are the identity.
    """
    qualities = np.asarray(qualities, dtype=np.float64)
    if qualities.ndim != 1 or qualities.size < 2:
        raise StructuralError("QWOA needs at least two valid solutions")
    return AnsatzSpec(
        system_size=qualities.size,
        unitaries=[
            UnitarySpec("phase", qualities, name="phase"),
            UnitarySpec("circulant", complete_mixer_spectrum(qualities.size), name="complete"),
        ],
        observables=0,
        depth=depth,
        seed=seed,
        label=label,
    )


# -- portfolio helpers -----------------------------------------------------------


def portfolio_mixers(assets: int, scheme=None) -> list[SparseOperator]:
    """Parity mixers over the long qubits, then over the short qubits (``3 + 3``)."""
    n = 2 * assets
    long_qubits = list(range(0, n, 2))
    short_qubits = list(range(1, n, 2))
    return parity_mixers(long_qubits, n, scheme) + parity_mixers(short_qubits, n, scheme)


def parity_initial_state(assets: int, net: int) -> np.ndarray:
    """``|net|`` fixed positions followed by ``M - |net|`` pairs ``(|00> + |11>)/sqrt 2``.

    The fixed pairs are ``|10>`` (long) for a positive net position and
    ``|01>`` (short) for a negative one, so every component has ``sum z = net``.
    """
    if abs(net) > assets:
        raise StructuralError(f"net position {net} impossible with {assets} assets")
    fixed = np.array([0, 0, 1, 0] if net >= 0 else [0, 1, 0, 0], dtype=np.complex128)
    free = np.array([1, 0, 0, 1], dtype=np.complex128) / math.sqrt(2)
    factors = [fixed] * abs(net) + [free] * (assets - abs(net))
    return reduce(np.kron, factors, np.ones(1, dtype=np.complex128))


def portfolio_qwoa(
    returns, covariance, omega: float = 0.5, net: int = 2, depth: int = 1, seed: int = 0,
    label: str = "qwoa",
) -> AnsatzSpec:
    qualities = portfolio_qualities(returns, covariance, omega, net)
    if qualities.size < 2:
        raise StructuralError(f"only {qualities.size} portfolios have net position {net}")
    return qwoa_spec(qualities, depth, seed, label)


def portfolio_qaoaz(
    returns, covariance, omega: float = 0.5, net: int = 2, depth: int = 1, seed: int = 0,
    label: str = "qaoaz",
) -> AnsatzSpec:
    assets = np.asarray(returns).size
    return qaoaz_spec(
        2 * assets,
        portfolio_qubit_qualities(returns, covariance, omega),
        portfolio_mixers(assets),
        parity_initial_state(assets, net),
        depth,
        seed,
        label,
    )
