"""Problem encodings: max-cut on graphs and discrete mean-variance portfolios."""

from __future__ import annotations

import csv
import itertools
from typing import Iterable, Sequence

import numpy as np

from ..partition import PartitionScheme, StructuralError, plan_partition
from ..propagators import DiagonalOperator
from .operators import PauliTermList, qubit_bit

Edge = tuple[int, int]

# 3-regular bipartite cube graph on 8 vertices: sides {0, 2, 5, 7} and
# {1, 3, 4, 6}, so the two perfect cuts are indices 90 and 165.
CUBE_GRAPH: tuple[Edge, ...] = (
    (0, 3), (0, 4), (0, 6),
    (2, 1), (2, 4), (2, 6),
    (5, 1), (5, 3), (5, 6),
    (7, 1), (7, 3), (7, 4),
)


# -- max-cut -------------------------------------------------------------------


def _check_edges(edges: Iterable[Edge], n: int) -> list[Edge]:
    edges = [(int(u), int(v)) for u, v in edges]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise StructuralError(f"edge ({u}, {v}) outside a {n}-vertex graph")
        if u == v:
            raise StructuralError(f"self-loop at vertex {u}")
    return edges


def maxcut_block(edges: Sequence[Edge], n: int, local_size: int, offset: int) -> np.ndarray:
    """Equal-endpoint edge counts for basis indices ``offset .. offset + local_size``."""
    idx = np.arange(offset, offset + local_size, dtype=np.int64)
    out = np.zeros(local_size)
    for u, v in edges:
        bu = (idx >> qubit_bit(n, u)) & 1
        bv = (idx >> qubit_bit(n, v)) & 1
        out += bu == bv
    return out


def maxcut_qualities(
    edges: Iterable[Edge], n: int, scheme: PartitionScheme | None = None, pool=None
) -> DiagonalOperator:
    """Cut cost per basis state: the number of edges left uncut.

    The minimum marks a maximum cut.
    """
    edges = _check_edges(edges, n)
    scheme = scheme or plan_partition(2 ** n, 1)
    return DiagonalOperator.from_function(
        lambda size, offset: maxcut_block(edges, n, size, offset), scheme, pool
    )


def maxcut_terms(edges: Iterable[Edge], n: int) -> list[PauliTermList]:
    """One ``(I + Z_u Z_v) / 2`` term per edge; the terms sum to the cut cost."""
    return [
        PauliTermList(n, [(0.5, {}), (0.5, {u: "Z", v: "Z"})])
        for u, v in _check_edges(edges, n)
    ]


def read_graph(path) -> list[Edge]:
    """Edge list with one ``u v`` pair per line; ``#`` starts a comment."""
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise StructuralError(f"{path}:{lineno}: expected 'u v'")
            edges.append((int(parts[0]), int(parts[1])))
    return edges


def graph_order(edges: Iterable[Edge]) -> int:
    return 1 + max((max(e) for e in edges), default=-1)


# -- portfolio -----------------------------------------------------------------


def portfolio_positions(assets: int, net: int | None = None) -> np.ndarray:
    """All ``z in {-1, 0, 1}^M`` in lexicographic order, optionally with ``sum z = net``."""
    if assets < 1:
        raise StructuralError("a portfolio needs at least one asset")
    z = np.array(list(itertools.product((-1, 0, 1), repeat=assets)), dtype=np.int64)
    if net is not None:
        z = z[z.sum(axis=1) == net]
    return z


def qubit_positions(assets: int, local_size: int | None = None, offset: int = 0) -> np.ndarray:
    """Positions encoded by basis states of ``2M`` qubits.

    Asset ``k`` uses qubits ``2k`` (long) and ``2k + 1`` (short): ``|10>`` is
    long (+1), ``|01>`` short (-1), ``|00>`` and ``|11>`` hold no position.
    """
    n = 2 * assets
    if local_size is None:
        local_size = 2 ** n - offset
    idx = np.arange(offset, offset + local_size, dtype=np.int64)
    z = np.empty((local_size, assets), dtype=np.int64)
    for k in range(assets):
        long_bit = (idx >> qubit_bit(n, 2 * k)) & 1
        short_bit = (idx >> qubit_bit(n, 2 * k + 1)) & 1
        z[:, k] = long_bit - short_bit
    return z


def portfolio_cost(positions, returns, covariance, omega: float) -> np.ndarray:
    """``omega z^T sigma z - (1 - omega) r^T z`` for each row ``z``."""
    z = np.atleast_2d(np.asarray(positions, dtype=np.float64))
    r = np.asarray(returns, dtype=np.float64)
    sigma = np.asarray(covariance, dtype=np.float64)
    m = r.size
    if r.ndim != 1 or sigma.shape != (m, m) or z.shape[1] != m:
        raise StructuralError("returns, covariance and positions disagree on the asset count")
    if not np.allclose(sigma, sigma.T):
        raise StructuralError("covariance must be symmetric")
    return omega * np.einsum("ki,ij,kj->k", z, sigma, z) - (1 - omega) * (z @ r)


def portfolio_qualities(returns, covariance, omega: float = 0.5, net: int | None = None) -> np.ndarray:
    """Costs of the enumerated positions (restricted to ``sum z = net`` if given)."""
    assets = np.asarray(returns).size
    return portfolio_cost(portfolio_positions(assets, net), returns, covariance, omega)


def portfolio_qubit_qualities(
    returns, covariance, omega: float = 0.5, scheme: PartitionScheme | None = None, pool=None
) -> DiagonalOperator:
    """Costs over the full two-qubits-per-asset basis, built per block."""
    assets = np.asarray(returns).size
    scheme = scheme or plan_partition(4 ** assets, 1)
    return DiagonalOperator.from_function(
        lambda size, offset: portfolio_cost(
            qubit_positions(assets, size, offset), returns, covariance, omega
        ) if size else np.empty(0),
        scheme,
        pool,
    )


def returns_and_covariance(prices) -> tuple[np.ndarray, np.ndarray]:
    """Mean per-step relative change and its sample covariance per column."""
    prices = np.asarray(prices, dtype=np.float64)
    if prices.ndim != 2 or prices.shape[0] < 3:
        raise StructuralError("need at least three price rows per asset")
    if np.any(prices <= 0) or not np.all(np.isfinite(prices)):
        raise StructuralError("prices must be positive and finite")
    changes = prices[1:] / prices[:-1] - 1.0
    return changes.mean(axis=0), np.atleast_2d(np.cov(changes, rowvar=False))


def read_prices(path) -> tuple[list[str], np.ndarray]:
    """CSV with a header of asset names and one row of closing prices per step."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise StructuralError(f"{path}: no price rows")
    names = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:]])
    except ValueError as exc:
        raise StructuralError(f"{path}: {exc}") from None
    if data.shape[1] != len(names):
        raise StructuralError(f"{path}: rows do not match the header width")
    return names, data


def synthetic_prices(
    assets: int,
    steps: int,
    seed: int = 0,
    drift: float = 0.05,
    volatility: tuple[float, float] = (0.1, 0.3),
) -> np.ndarray:
    """Correlated geometric random-walk prices, for examples and tests.

    The defaults give period-to-period moves of tens of percent, so the
    resulting portfolio costs are of order one.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    drift = rng.normal(drift, abs(drift), size=assets)
    vol = rng.uniform(*volatility, size=assets)
    mix = rng.normal(size=(assets, assets)) * 0.3 + np.eye(assets)
    shocks = rng.normal(size=(steps - 1, assets)) @ mix.T * vol
    log_path = np.vstack([np.zeros(assets), np.cumsum(drift + shocks, axis=0)])
    return 10.0 * np.exp(log_path)
