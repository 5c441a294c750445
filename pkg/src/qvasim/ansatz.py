"""Composition of unitaries into a depth-``D`` ansatz and its objective.

Parameters are laid out repetition-major: all parameters of the first
repetition come first, ordered by unitary declaration and then by the
unitary's own parameter index.
"""

from __future__ import annotations

import csv
import math
import os
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .optimizer import OptimizerConfig, minimize, plan_gradient_groups
from .partition import (
    NumericError,
    PartitionedState,
    PartitionScheme,
    StructuralError,
    expectation,
    gather,
    make_pool,
    map_blocks,
    norm,
    plan_partition,
    scatter,
)
from .propagators import (
    CirculantSpectrum,
    DiagonalOperator,
    SparseOperator,
    circulant_mix,
    phase_shift,
    sparse_mix,
)

KINDS = ("phase", "circulant", "sparse")
LOG_HEADER = (
    "label",
    "system_size",
    "depth",
    "f_final",
    "norm",
    "wall_time",
    "workers",
    "evaluations",
    "success",
)


def rng_from_seed(seed) -> np.random.Generator:
    """Counter-based (Philox) generator; identical streams on every platform."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def uniform_angles(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` values uniformly from ``(0, 2 pi]``."""
    return 2 * np.pi * (1.0 - rng.random(n))


def uniform_superposition(local_size: int, offset: int, system_size: int) -> np.ndarray:
    return np.full(local_size, 1 / math.sqrt(system_size), dtype=np.complex128)


def subspace_superposition(indices: Iterable[int]) -> Callable:
    """Initial-state rule: equal superposition over the given basis states."""
    indices = np.unique(np.fromiter(indices, dtype=np.int64))
    if indices.size == 0:
        raise StructuralError("subspace superposition needs at least one index")
    amp = 1 / math.sqrt(indices.size)

    def block(local_size, offset, system_size):
        out = np.zeros(local_size, dtype=np.complex128)
        lo, hi = np.searchsorted(indices, [offset, offset + local_size])
        out[indices[lo:hi] - offset] = amp
        return out

    return block


@dataclass
class UnitarySpec:
    """One factor of the ansatz unitary.

    Parameters
    ----------
    kind : {"phase", "circulant", "sparse"}
    operator : object or callable
        The exponent. ``phase`` takes a real array, a
        :class:`DiagonalOperator`, or a list of them (one per parameter);
        ``circulant`` takes a :class:`CirculantSpectrum`; ``sparse`` takes a
        scipy matrix, a :class:`SparseOperator`, or a list applied in order
        with one shared time. A callable ``operator(scheme, params)`` is
        regenerated whenever its governing parameters change.
    n_params : int
        Parameters consumed per repetition.
    param_init : callable, optional
        ``param_init(rng, n) -> array``; defaults to uniform over (0, 2 pi].
    operator_n_params : int
        Leading entries of the unitary's parameter slice that are passed to a
        callable operator instead of acting as evolution times.
    """

    kind: str
    operator: Any
    n_params: int = 1
    param_init: Callable | None = None
    operator_n_params: int = 0
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StructuralError(f"unknown unitary kind {self.kind!r}")
        if self.n_params < 1:
            raise StructuralError("a unitary consumes at least one parameter")
        if not 0 <= self.operator_n_params < self.n_params:
            raise StructuralError("operator parameters must leave an evolution parameter")
        if self.operator_n_params and not callable(self.operator):
            raise StructuralError("parameterised operators must be callables")

    @property
    def parameterised(self) -> bool:
        return self.operator_n_params > 0

    def initial_params(self, rng: np.random.Generator) -> np.ndarray:
        init = self.param_init or uniform_angles
        values = np.asarray(init(rng, self.n_params), dtype=np.float64)
        if values.shape != (self.n_params,):
            raise StructuralError("param_init returned the wrong number of values")
        return values


@dataclass
class AnsatzSpec:
    """Everything needed to prepare ``|theta>`` and evaluate the objective.

    ``initial_state`` is ``"uniform"``, an explicit vector, or a callable
    ``(local_size, offset, system_size) -> block``. ``observables`` is an
    array, a :class:`DiagonalOperator`, a callable
    ``(local_size, offset) -> block``, or an integer selecting the phase
    unitary whose exponent doubles as the quality operator.
    """

    system_size: int
    unitaries: list[UnitarySpec]
    observables: Any
    depth: int = 1
    initial_state: Any = "uniform"
    observable_map: Callable | None = None
    objective_map: Callable | None = None
    seed: int = 0
    label: str = ""

    def __post_init__(self):
        if self.system_size < 1:
            raise StructuralError("system size must be positive")
        if not self.unitaries:
            raise StructuralError("an ansatz needs at least one unitary")
        if self.depth < 0:
            raise StructuralError("depth must be non-negative")

    @property
    def params_per_repetition(self) -> int:
        return sum(u.n_params for u in self.unitaries)

    @property
    def param_count(self) -> int:
        return self.depth * self.params_per_repetition

    def with_depth(self, depth: int) -> "AnsatzSpec":
        return replace(self, depth=depth)

    def split_params(self, theta) -> list[list[np.ndarray]]:
        """``theta`` -> ``[repetition][unitary]`` slices."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.param_count,):
            raise StructuralError(
                f"expected {self.param_count} parameters, got {theta.size}"
            )
        out, pos = [], 0
        for _ in range(self.depth):
            rep = []
            for u in self.unitaries:
                rep.append(theta[pos : pos + u.n_params])
                pos += u.n_params
            out.append(rep)
        return out

    @staticmethod
    def join_params(slices: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
        flat = [np.asarray(s, dtype=np.float64) for rep in slices for s in rep]
        return np.concatenate(flat) if flat else np.empty(0)


@dataclass
class RunResult:
    label: str
    system_size: int
    depth: int
    theta_initial: np.ndarray
    theta_final: np.ndarray
    f_initial: float
    f_final: float
    evaluations: int
    norm_final: float
    wall_time: float
    workers: int
    optimizer_success: bool
    message: str = ""
    budget_exhausted: bool = False
    seed: Any = None
    final_state: np.ndarray | None = field(default=None, repr=False)

    def log_row(self) -> list[str]:
        return [
            self.label,
            str(self.system_size),
            str(self.depth),
            repr(float(self.f_final)),
            repr(float(self.norm_final)),
            f"{self.wall_time:.6f}",
            str(self.workers),
            str(self.evaluations),
            str(bool(self.optimizer_success)),
        ]


class RunLog:
    """CSV log with one row per run; ``mode`` is ``"a"`` or ``"w"``."""

    def __init__(self, path, mode: str = "a"):
        if mode not in ("a", "w"):
            raise StructuralError("log mode must be 'a' (append) or 'w' (overwrite)")
        self.path = os.fspath(path)
        self._mode = mode

    def write(self, result: RunResult) -> None:
        mode, self._mode = self._mode, "a"
        fresh = mode == "w" or not os.path.exists(self.path) or os.path.getsize(self.path) == 0
        with open(self.path, mode, newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if fresh:
                writer.writerow(LOG_HEADER)
            writer.writerow(result.log_row())


class Ansatz:
    """Runtime for an :class:`AnsatzSpec` on a fixed number of workers.

    Operators, the initial state and the observables are generated once per
    partition scheme; parameterised operators are rebuilt only when their
    governing parameters change. Use as a context manager (or call
    :meth:`close`) to release the worker threads. ``threads`` caps the
    threads serving the ``workers`` blocks (default: usable cores).
    """

    def __init__(self, spec: AnsatzSpec, workers: int = 1, threads: int | None = None):
        if workers < 1:
            raise StructuralError("worker count must be positive")
        self.spec = spec
        self.workers = workers
        self.scheme: PartitionScheme = plan_partition(spec.system_size, workers)
        self.pool = make_pool(len(self.scheme.active), threads)
        self._fixed: dict[int, Any] = {}
        self._dynamic: dict[int, tuple[bytes, Any]] = {}
        self._initial: list[np.ndarray] | None = None
        self._observables: DiagonalOperator | None = None
        self._lock = threading.RLock()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(wait=True)
            self.pool = None

    # -- operators -----------------------------------------------------------

    def _resolve(self, unitary: UnitarySpec, raw) -> Any:
        scheme = self.scheme
        if unitary.kind == "phase":
            items = raw if isinstance(raw, (list, tuple)) else [raw]
            ops = []
            for item in items:
                if isinstance(item, DiagonalOperator):
                    ops.append(item.repartition(scheme))
                else:
                    ops.append(DiagonalOperator.from_array(item, scheme))
            return ops
        if unitary.kind == "circulant":
            if not isinstance(raw, CirculantSpectrum):
                raise StructuralError("circulant unitaries need a CirculantSpectrum")
            if raw.size != scheme.system_size:
                raise StructuralError("circulant spectrum size does not match the system")
            return raw
        items = raw if isinstance(raw, (list, tuple)) else [raw]
        ops = []
        for item in items:
            if isinstance(item, SparseOperator):
                ops.append(item.repartition(scheme))
            elif sp.issparse(item) or isinstance(item, np.ndarray):
                ops.append(SparseOperator.from_matrix(item, scheme))
            else:
                raise StructuralError(f"cannot use {type(item).__name__} as a sparse mixer")
        return ops

    def operator(self, index: int, params: np.ndarray | None = None) -> Any:
        """Resolved exponent of unitary ``index`` (given its parameter slice)."""
        unitary = self.spec.unitaries[index]
        with self._lock:
            if not unitary.parameterised:
                if index not in self._fixed:
                    raw = unitary.operator
                    if callable(raw) and not isinstance(raw, CirculantSpectrum):
                        raw = raw(self.scheme, np.empty(0))
                    self._fixed[index] = self._resolve(unitary, raw)
                return self._fixed[index]
            governing = np.asarray(params[: unitary.operator_n_params], dtype=np.float64)
            key = governing.tobytes()
            cached = self._dynamic.get(index)
            if cached is None or cached[0] != key:
                raw = unitary.operator(self.scheme, governing.copy())
                cached = (key, self._resolve(unitary, raw))
                self._dynamic[index] = cached
            return cached[1]

    def _check_counts(self):
        for i, u in enumerate(self.spec.unitaries):
            if u.parameterised:
                continue
            op = self.operator(i)
            evo = u.n_params - u.operator_n_params
            if u.kind == "phase" and len(op) != evo:
                raise StructuralError(
                    f"unitary {i}: {len(op)} phase terms for {evo} parameters"
                )
            if u.kind != "phase" and evo != 1:
                raise StructuralError(f"unitary {i}: mixers take one time parameter")

    def apply(self, state: PartitionedState, index: int, params: np.ndarray) -> PartitionedState:
        unitary = self.spec.unitaries[index]
        op = self.operator(index, params)
        evo = params[unitary.operator_n_params :]
        if unitary.kind == "phase":
            if len(op) != evo.size:
                raise StructuralError(
                    f"unitary {index}: {len(op)} phase terms for {evo.size} parameters"
                )
            for term, gamma in zip(op, evo):
                state = phase_shift(state, term, gamma)
            return state
        if evo.size != 1:
            raise StructuralError(f"unitary {index}: mixers take one time parameter")
        if unitary.kind == "circulant":
            return circulant_mix(state, op, evo[0])
        for w in op:
            state = sparse_mix(state, w, evo[0])
        return state

    # -- states and observables ----------------------------------------------

    def initial_state(self) -> PartitionedState:
        with self._lock:
            if self._initial is None:
                self._initial = self._build_initial()
            blocks = [b.copy() for b in self._initial]
        return PartitionedState(self.scheme, blocks, self.pool)

    def _build_initial(self) -> list[np.ndarray]:
        rule = self.spec.initial_state
        n = self.spec.system_size
        scheme = self.scheme
        if isinstance(rule, str):
            if rule != "uniform":
                raise StructuralError(f"unknown initial state rule {rule!r}")
            rule = uniform_superposition
        if callable(rule):
            blocks = map_blocks(
                self.pool,
                lambda size, offset: np.asarray(rule(size, offset, n), dtype=np.complex128),
                scheme.local_sizes,
                scheme.offsets,
            )
            state = PartitionedState(scheme, blocks, self.pool)
        else:
            state = scatter(np.asarray(rule, dtype=np.complex128), scheme, self.pool)
        if abs(norm(state) - 1.0) > 1e-10:
            raise StructuralError("initial state is not normalised")
        return state.blocks

    def observables(self) -> DiagonalOperator:
        with self._lock:
            if self._observables is None:
                self._observables = self._build_observables()
            return self._observables

    def _build_observables(self) -> DiagonalOperator:
        source = self.spec.observables
        if isinstance(source, (int, np.integer)) and not isinstance(source, bool):
            unitary = self.spec.unitaries[source]
            if unitary.kind != "phase" or unitary.parameterised:
                raise StructuralError("observables can only reuse a fixed phase exponent")
            terms = self.operator(int(source))
            if len(terms) == 1:
                return terms[0]
            total = [sum(t.blocks[r] for t in terms) for r in range(self.scheme.worker_count)]
            return DiagonalOperator(self.scheme, tuple(total))
        if isinstance(source, DiagonalOperator):
            return source.repartition(self.scheme)
        if callable(source):
            return DiagonalOperator.from_function(source, self.scheme, self.pool)
        return DiagonalOperator.from_array(source, self.scheme)

    # -- evaluation ----------------------------------------------------------

    def evolve_state(self, theta) -> PartitionedState:
        """Prepare ``|theta>``: apply the unitary sequence ``depth`` times."""
        slices = self.spec.split_params(theta)
        state = self.initial_state()
        for rep in slices:
            for index, params in enumerate(rep):
                state = self.apply(state, index, params)
        return state

    def expectation(self, state: PartitionedState) -> float:
        value = expectation(state, self.observables(), self.spec.observable_map)
        if self.spec.objective_map is not None:
            value = float(self.spec.objective_map(value))
        return value

    def objective(self, theta) -> float:
        return self.expectation(self.evolve_state(theta))

    __call__ = objective

    def generate_initial_params(self, seed=None, depth: int | None = None) -> np.ndarray:
        depth = self.spec.depth if depth is None else depth
        rng = rng_from_seed(self.spec.seed if seed is None else seed)
        draws = [u.initial_params(rng) for _ in range(depth) for u in self.spec.unitaries]
        return np.concatenate(draws) if draws else np.empty(0)

    # -- optimisation --------------------------------------------------------

    def execute(
        self,
        theta0=None,
        optimizer: OptimizerConfig | None = None,
        seed=None,
        keep_state: bool = False,
    ) -> RunResult:
        """Minimise the objective from ``theta0`` (drawn from the seed if absent)."""
        if self.spec.depth < 1:
            raise StructuralError("execute needs depth >= 1")
        optimizer = optimizer or OptimizerConfig()
        self._check_counts()
        start = time.perf_counter()
        if theta0 is None:
            theta0 = self.generate_initial_params(seed)
        theta0 = np.asarray(theta0, dtype=np.float64)
        if theta0.shape != (self.spec.param_count,):
            raise StructuralError(
                f"expected {self.spec.param_count} parameters, got {theta0.size}"
            )

        plan = plan_gradient_groups(
            theta0.size, optimizer.nodes, optimizer.parallel_mode, self.workers
        )
        replicas: list[Ansatz] = []
        group_objectives = None
        if plan.group_count > 1:
            sizes = plan_partition(max(self.workers, plan.group_count), plan.group_count)
            replicas = [Ansatz(self.spec, max(1, s)) for s in sizes.local_sizes[1:]]
            group_objectives = [self.objective] + [r.objective for r in replicas]
        try:
            outcome = minimize(self.objective, theta0, optimizer, group_objectives, plan)
        except NumericError as exc:
            raise NumericError(f"{self.spec.label or 'ansatz'}: {exc}") from exc
        finally:
            for r in replicas:
                r.close()

        final = self.evolve_state(outcome.theta)
        result = RunResult(
            label=self.spec.label,
            system_size=self.spec.system_size,
            depth=self.spec.depth,
            theta_initial=theta0,
            theta_final=outcome.theta,
            f_initial=outcome.f_initial,
            f_final=outcome.fun,
            evaluations=outcome.evaluations,
            norm_final=norm(final),
            wall_time=time.perf_counter() - start,
            workers=self.workers,
            optimizer_success=outcome.success,
            message=outcome.message,
            budget_exhausted=outcome.budget_exhausted,
            seed=seed,
        )
        if keep_state:
            result.final_state = gather(final)
        return result


def repeat_seeds(seed: int, repeats: int) -> list[int]:
    """Reproducible per-repeat seeds derived from a top-level seed."""
    rng = rng_from_seed(seed)
    return [int(s) for s in rng.integers(0, 2 ** 63, size=repeats, dtype=np.int64)]


def benchmark(
    spec: AnsatzSpec,
    depths: Iterable[int],
    repeats: int = 1,
    param_persist: bool = False,
    optimizer: OptimizerConfig | None = None,
    workers: int = 1,
    log: RunLog | None = None,
    keep_state: bool = False,
) -> list[RunResult]:
    """Run ``repeats`` optimisations at each depth.

    Repeat ``r`` at depth ``D`` draws its random parameters from the seed
    pair ``(repeat_seeds(spec.seed)[r], D)``, so every algorithm with the same
    per-repetition parameter count starts from the same values. With
    ``param_persist`` the best parameters of the previous depth fill the
    leading repetitions and only the new tail is drawn.
    """
    depths = list(depths)
    if not depths or any(d < 1 for d in depths) or depths != sorted(set(depths)):
        raise StructuralError("depths must be a non-empty ascending list of positive integers")
    if repeats < 1:
        raise StructuralError("repeats must be positive")
    seeds = repeat_seeds(spec.seed, repeats)
    per_rep = spec.params_per_repetition
    results: list[RunResult] = []
    best_prev: RunResult | None = None

    for depth in depths:
        with Ansatz(spec.with_depth(depth), workers) as ansatz:
            depth_results = []
            for r in range(repeats):
                pair = (seeds[r], depth)
                theta0 = ansatz.generate_initial_params(seed=pair)
                if param_persist and best_prev is not None:
                    prefix = best_prev.theta_final[: min(best_prev.depth, depth) * per_rep]
                    theta0[: prefix.size] = prefix
                result = ansatz.execute(theta0, optimizer, seed=pair, keep_state=keep_state)
                if log is not None:
                    log.write(result)
                depth_results.append(result)
            results.extend(depth_results)
            best_prev = min(depth_results, key=lambda res: res.f_final)
    return results


# -- functional surface ------------------------------------------------------


def evolve_state(spec: AnsatzSpec, theta, workers: int = 1) -> PartitionedState:
    with Ansatz(spec, workers) as ansatz:
        state = ansatz.evolve_state(theta)
    state.pool = None
    return state


def objective(spec: AnsatzSpec, theta, workers: int = 1) -> float:
    with Ansatz(spec, workers) as ansatz:
        return ansatz.objective(theta)


def execute(
    spec: AnsatzSpec,
    theta0=None,
    optimizer: OptimizerConfig | None = None,
    workers: int = 1,
) -> RunResult:
    with Ansatz(spec, workers) as ansatz:
        return ansatz.execute(theta0, optimizer)


def generate_initial_params(spec: AnsatzSpec) -> np.ndarray:
    with Ansatz(spec, 1) as ansatz:
        return ansatz.generate_initial_params()
