"""Classical minimisation of the ansatz objective.

BFGS and Nelder-Mead come from :func:`scipy.optimize.minimize`; gradients are
finite differences computed here, optionally split over worker groups. Group
0 evaluates ``f(theta)`` and groups ``1..m`` evaluate partial derivatives for
contiguous blocks of parameter indices.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.optimize

from .partition import NumericError, StructuralError, plan_partition

METHODS = ("bfgs", "nelder_mead")
GRADIENT_MODES = ("forward", "central")
PARALLEL_MODES = ("global", "jacobian", "jacobian_local")

DEFAULT_STEP = {"forward": 1.49e-8, "central": 6e-6}

_ALIASES = {
    "nelder-mead": "nelder_mead",
    "neldermead": "nelder_mead",
    "forward_diff": "forward",
    "central_diff": "central",
}


def _canonical(value: str, allowed: Sequence[str], what: str) -> str:
    value = _ALIASES.get(value.lower(), value.lower())
    if value not in allowed:
        raise StructuralError(f"unknown {what} {value!r}; expected one of {allowed}")
    return value


@dataclass
class OptimizerConfig:
    method: str = "bfgs"
    gradient_mode: str = "forward"
    step_h: float | None = None
    tol: float = 1e-5
    max_evaluations: int = 10_000
    parallel_mode: str = "global"
    nodes: int = 1

    def __post_init__(self):
        self.method = _canonical(self.method, METHODS, "method")
        self.gradient_mode = _canonical(self.gradient_mode, GRADIENT_MODES, "gradient mode")
        self.parallel_mode = _canonical(self.parallel_mode, PARALLEL_MODES, "parallel mode")
        if self.step_h is None:
            self.step_h = DEFAULT_STEP[self.gradient_mode]
        if not self.step_h > 0:
            raise StructuralError("finite-difference step must be positive")
        if not self.tol > 0:
            raise StructuralError("tolerance must be positive")
        if self.max_evaluations < 1 or self.nodes < 1:
            raise StructuralError("max_evaluations and nodes must be positive")


@dataclass(frozen=True)
class GradientPlan:
    """Assignment of partial derivatives to worker groups.

    ``assignment[k]`` is the group computing the partial for parameter ``k``;
    group 0 computes ``f`` and, when it is the only group, every partial.
    ``group_nodes[g]`` lists the nodes group ``g`` runs on (several groups
    may share one node).
    """

    group_count: int
    assignment: tuple[int, ...]
    group_nodes: tuple[tuple[int, ...], ...]

    def indices(self, group: int) -> tuple[int, ...]:
        return tuple(k for k, g in enumerate(self.assignment) if g == group)


def _contiguous(param_count: int, partial_groups: int) -> tuple[int, ...]:
    sizes = plan_partition(param_count, partial_groups).local_sizes
    return tuple(g + 1 for g, size in enumerate(sizes) for _ in range(size))


def plan_gradient_groups(
    param_count: int,
    node_count: int,
    parallel_mode: str = "global",
    workers_per_node: int | None = None,
) -> GradientPlan:
    """Split gradient work into ``m + 1`` groups.

    * ``global``: one group computes everything serially.
    * ``jacobian`` with ``param_count + 1 <= node_count``: one group per
      partial plus the ``f`` group; nodes are shared out so groups span
      several nodes.
    * ``jacobian`` otherwise: several groups per node, up to
      ``param_count + 1`` groups (optionally capped by ``workers_per_node``).
    * ``jacobian_local``: one group per node.
    """
    if param_count < 1 or node_count < 1:
        raise StructuralError("param_count and node_count must be positive")
    mode = _canonical(parallel_mode, PARALLEL_MODES, "parallel mode")
    nodes = tuple(range(node_count))

    if mode == "jacobian" and param_count + 1 <= node_count:
        groups = param_count + 1
        spans = plan_partition(node_count, groups)
        group_nodes = tuple(
            tuple(range(spans.offsets[g], spans.offsets[g] + spans.local_sizes[g]))
            for g in range(groups)
        )
    elif mode == "jacobian":
        per_node = math.ceil((param_count + 1) / node_count)
        if workers_per_node is not None:
            per_node = max(1, min(per_node, workers_per_node))
        groups = min(param_count + 1, per_node * node_count)
        group_nodes = tuple((g // per_node,) for g in range(groups))
    elif mode == "jacobian_local":
        groups = min(node_count, param_count + 1)
        group_nodes = tuple((g,) for g in range(groups))
    else:
        groups = 1
        group_nodes = (nodes,)

    if groups == 1:
        return GradientPlan(1, (0,) * param_count, (nodes,))
    return GradientPlan(groups, _contiguous(param_count, groups - 1), group_nodes)


def _probe(f, x, index):
    value = float(f(x))
    if not math.isfinite(value):
        raise NumericError(f"non-finite objective while probing parameter {index}")
    return value


def _partials(f, theta, indices, mode, h, f0):
    out = {}
    for k in indices:
        x = theta.copy()
        if mode == "forward":
            x[k] += h
            out[k] = (_probe(f, x, k) - f0) / h
        else:
            x[k] += h
            up = _probe(f, x, k)
            x[k] = theta[k] - h
            down = _probe(f, x, k)
            out[k] = (up - down) / (2 * h)
    return out


def gradient_fd(
    f: Callable | Sequence[Callable],
    theta,
    mode: str = "central",
    h: float | None = None,
    plan: GradientPlan | None = None,
    f0: float | None = None,
) -> np.ndarray:
    """Finite-difference gradient of ``f`` at ``theta``.

    Parameters
    ----------
    f : callable or sequence of callables
        Objective. A sequence supplies one independent replica per group.
    theta : array_like
        Point of evaluation.
    mode : {"forward", "central"}
    h : float, optional
        Step size; defaults to 1.49e-8 (forward) or 6e-6 (central).
    plan : GradientPlan, optional
        Group layout; groups run concurrently when there is more than one.
    f0 : float, optional
        Known ``f(theta)`` for forward differences.

    Returns
    -------
    ndarray
        Partial derivatives in parameter order.
    """
    mode = _canonical(mode, GRADIENT_MODES, "gradient mode")
    h = DEFAULT_STEP[mode] if h is None else float(h)
    if not h > 0:
        raise StructuralError("finite-difference step must be positive")
    theta = np.asarray(theta, dtype=np.float64).copy()
    n = theta.size
    if plan is None:
        plan = GradientPlan(1, (0,) * n, ((0,),))
    if len(plan.assignment) != n:
        raise StructuralError("gradient plan does not match the parameter count")
    fs = list(f) if isinstance(f, Sequence) else [f] * plan.group_count
    if len(fs) < plan.group_count:
        raise StructuralError("one objective replica per group required")

    if mode == "forward" and f0 is None:
        f0 = _probe(fs[0], theta, "base point")

    grad = np.empty(n)
    if plan.group_count == 1:
        for k, v in _partials(fs[0], theta, range(n), mode, h, f0).items():
            grad[k] = v
        return grad

    with ThreadPoolExecutor(max_workers=plan.group_count) as pool:
        futures = [
            pool.submit(_partials, fs[g], theta, plan.indices(g), mode, h, f0)
            for g in range(plan.group_count)
        ]
        for fut in futures:
            for k, v in fut.result().items():
                grad[k] = v
    return grad


class _BudgetExhausted(Exception):
    pass


@dataclass
class MinimizeResult:
    theta: np.ndarray
    fun: float
    evaluations: int
    success: bool
    message: str
    f_initial: float
    theta_initial: np.ndarray = field(repr=False, default=None)
    budget_exhausted: bool = False


class _Counted:
    """Thread-safe evaluation counter that remembers the best point seen."""

    def __init__(self, budget: int):
        self.budget = budget
        self.count = 0
        self.best_x = None
        self.best_f = math.inf
        self._lock = threading.Lock()

    def wrap(self, fn):
        def counted(x):
            with self._lock:
                if self.count >= self.budget:
                    raise _BudgetExhausted
                self.count += 1
            x = np.array(x, dtype=np.float64)
            value = float(fn(x))
            if not math.isfinite(value):
                raise NumericError("objective returned a non-finite value")
            with self._lock:
                if value < self.best_f:
                    self.best_f, self.best_x = value, x.copy()
            return value

        return counted


def minimize(
    f: Callable,
    theta0,
    config: OptimizerConfig | None = None,
    group_objectives: Sequence[Callable] | None = None,
    plan: GradientPlan | None = None,
) -> MinimizeResult:
    """Minimise ``f`` from ``theta0``.

    The returned point is never worse than ``theta0``: the best evaluated
    point is kept if the optimiser stops somewhere higher. Running out of
    evaluations or hitting a non-finite value returns the best point with
    ``success=False``.
    """
    config = config or OptimizerConfig()
    theta0 = np.asarray(theta0, dtype=np.float64).copy()
    if plan is None:
        plan = plan_gradient_groups(theta0.size, config.nodes, config.parallel_mode)
    replicas = list(group_objectives) if group_objectives else [f] * plan.group_count
    counter = _Counted(config.max_evaluations)
    fun = counter.wrap(f)
    grads = [counter.wrap(g) for g in replicas]

    f_initial = fun(theta0)
    last = {"x": theta0.copy(), "f": f_initial}

    def objective(x):
        value = fun(x)
        last["x"], last["f"] = np.array(x), value
        return value

    def jac(x):
        f0 = last["f"] if np.array_equal(last["x"], x) else None
        return gradient_fd(
            grads, x, config.gradient_mode, config.step_h, plan=plan, f0=f0
        )

    success, message, exhausted = False, "", False
    result_x, result_f = theta0, f_initial
    try:
        if config.method == "bfgs":
            res = scipy.optimize.minimize(
                objective, theta0, method="BFGS", jac=jac, tol=config.tol
            )
        else:
            res = scipy.optimize.minimize(
                objective,
                theta0,
                method="Nelder-Mead",
                tol=config.tol,
                options={"maxfev": config.max_evaluations, "maxiter": 10 ** 9},
            )
        success, message = bool(res.success), str(res.message)
        result_x, result_f = np.asarray(res.x, dtype=np.float64), float(res.fun)
    except _BudgetExhausted:
        exhausted = True
        message = f"evaluation budget of {config.max_evaluations} exhausted"
    except NumericError as exc:
        message = f"optimiser diverged: {exc}"

    if counter.best_f < result_f:
        result_x, result_f = counter.best_x, counter.best_f
    if config.method == "nelder_mead" and counter.count >= config.max_evaluations:
        success, exhausted = False, True
        message = message or f"evaluation budget of {config.max_evaluations} exhausted"
    return MinimizeResult(
        theta=result_x,
        fun=result_f,
        evaluations=counter.count,
        success=success,
        message=message,
        f_initial=f_initial,
        theta_initial=theta0,
        budget_exhausted=exhausted,
    )


@dataclass
class ComparisonReport:
    """Outcome of the modified-objective optimiser comparison."""

    threshold: float
    reference_minima: list[float]
    successes: dict[str, int]
    evaluations: dict[str, int]
    trials: dict[str, list[float]]

    def summary(self) -> str:
        lines = [f"threshold b={self.threshold}"]
        for name in self.successes:
            lines.append(
                f"{name}: {self.successes[name]}/{len(self.trials[name])} succeeded, "
                f"{self.evaluations[name]} evaluations"
            )
        return "\n".join(lines)


def compare_optimizers(
    f: Callable,
    starts: Sequence,
    configs: Mapping[str, OptimizerConfig],
    threshold: float = 0.8,
) -> ComparisonReport:
    """Rank optimisers on ``f'(theta) = |min_i - f(theta)|``.

    For every start ``theta_i`` each optimiser first minimises ``f``; the
    lowest result over all optimisers is ``min_i``. Each optimiser then
    minimises ``f'`` from ``theta_i`` and succeeds if it reaches
    ``f' < threshold``.
    """
    minima = []
    for theta in starts:
        minima.append(min(minimize(f, theta, cfg).fun for cfg in configs.values()))

    successes = {name: 0 for name in configs}
    evaluations = {name: 0 for name in configs}
    trials = {name: [] for name in configs}
    for theta, fmin in zip(starts, minima):

        def shifted(x, fmin=fmin):
            return abs(fmin - f(x))

        for name, cfg in configs.items():
            res = minimize(shifted, theta, cfg)
            trials[name].append(res.fun)
            evaluations[name] += res.evaluations
            successes[name] += int(res.fun < threshold)
    return ComparisonReport(threshold, minima, successes, evaluations, trials)
