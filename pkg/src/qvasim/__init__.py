"""Simulation of quantum variational algorithms on partitioned state vectors."""

from .ansatz import (
    Ansatz,
    AnsatzSpec,
    RunLog,
    RunResult,
    UnitarySpec,
    benchmark,
    evolve_state,
    execute,
    generate_initial_params,
    objective,
    subspace_superposition,
)
from .optimizer import (
    OptimizerConfig,
    compare_optimizers,
    gradient_fd,
    minimize,
    plan_gradient_groups,
)
from .partition import (
    NumericError,
    PartitionedState,
    PartitionScheme,
    StructuralError,
    expectation,
    gather,
    inner_product,
    norm,
    plan_partition,
    read_state,
    scatter,
    write_state,
)

__version__ = "0.1.0"

__all__ = [
    "Ansatz",
    "AnsatzSpec",
    "NumericError",
    "OptimizerConfig",
    "PartitionScheme",
    "PartitionedState",
    "RunLog",
    "RunResult",
    "StructuralError",
    "UnitarySpec",
    "benchmark",
    "compare_optimizers",
    "evolve_state",
    "execute",
    "expectation",
    "gather",
    "generate_initial_params",
    "gradient_fd",
    "inner_product",
    "minimize",
    "norm",
    "objective",
    "plan_gradient_groups",
    "plan_partition",
    "read_state",
    "scatter",
    "subspace_superposition",
    "write_state",
]
