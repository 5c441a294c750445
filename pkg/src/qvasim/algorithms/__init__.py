"""Operator generators, problem encodings and prebuilt algorithm specs."""

from .catalog import (
    exqaoa_spec,
    parity_initial_state,
    portfolio_mixers,
    portfolio_qaoaz,
    portfolio_qwoa,
    qaoa_spec,
    qaoaz_spec,
    qwoa_spec,
)
from .operators import (
    PauliTermList,
    complete_mixer_spectrum,
    hopping_terms,
    hypercube_mixer,
    parity_mixers,
    parity_pairs,
)
from .problems import (
    CUBE_GRAPH,
    graph_order,
    maxcut_qualities,
    maxcut_terms,
    portfolio_cost,
    portfolio_positions,
    portfolio_qualities,
    portfolio_qubit_qualities,
    qubit_positions,
    read_graph,
    read_prices,
    returns_and_covariance,
    synthetic_prices,
)

__all__ = [
    "CUBE_GRAPH",
    "PauliTermList",
    "complete_mixer_spectrum",
    "exqaoa_spec",
    "graph_order",
    "hopping_terms",
    "hypercube_mixer",
    "maxcut_qualities",
    "maxcut_terms",
    "parity_initial_state",
    "parity_mixers",
    "parity_pairs",
    "portfolio_cost",
    "portfolio_mixers",
    "portfolio_positions",
    "portfolio_qaoaz",
    "portfolio_qualities",
    "portfolio_qubit_qualities",
    "portfolio_qwoa",
    "qaoa_spec",
    "qaoaz_spec",
    "qubit_positions",
    "qwoa_spec",
    "read_graph",
    "read_prices",
    "returns_and_covariance",
    "synthetic_prices",
]
