import csv
import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qvasim import (
    Ansatz,
    AnsatzSpec,
    OptimizerConfig,
    RunLog,
    StructuralError,
    UnitarySpec,
    benchmark,
    evolve_state,
    execute,
    gather,
    generate_initial_params,
    objective,
    plan_partition,
    subspace_superposition,
)
from qvasim.algorithms import CUBE_GRAPH, hypercube_mixer, maxcut_qualities, qaoa_spec, qwoa_spec
from qvasim.ansatz import LOG_HEADER, repeat_seeds
from qvasim.propagators import DiagonalOperator


def _small_qaoa(depth=1, seed=0):
    q = oracles.maxcut_costs([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
    return qaoa_spec(4, q, depth=depth, seed=seed)


def test_zero_theta_returns_initial_state():
    spec = _small_qaoa(depth=3)
    out = gather(evolve_state(spec, np.zeros(6)))
    np.testing.assert_array_equal(out, np.full(16, 0.25))


def test_layout_is_repetition_major():
    spec = AnsatzSpec(
        system_size=4,
        unitaries=[
            UnitarySpec("phase", [np.arange(4.0), np.ones(4)], n_params=2),
            UnitarySpec("sparse", hypercube_mixer(2)),
        ],
        observables=np.arange(4.0),
        depth=2,
    )
    theta = np.arange(6.0)
    slices = spec.split_params(theta)
    assert [s.tolist() for s in slices[0]] == [[0, 1], [2]]
    assert [s.tolist() for s in slices[1]] == [[3, 4], [5]]
    np.testing.assert_array_equal(AnsatzSpec.join_params(slices), theta)


@settings(max_examples=25)
@given(st.integers(0, 6), st.integers(1, 3))
def test_layout_round_trip(depth, per):
    spec = AnsatzSpec(
        4,
        [UnitarySpec("phase", [np.zeros(4)] * per, n_params=per), UnitarySpec("sparse", hypercube_mixer(2))],
        np.zeros(4),
        depth=depth,
    )
    theta = np.random.default_rng(depth).normal(size=spec.param_count)
    np.testing.assert_array_equal(AnsatzSpec.join_params(spec.split_params(theta)), theta)


def test_parameter_count_mismatch():
    with pytest.raises(StructuralError):
        evolve_state(_small_qaoa(depth=2), np.zeros(3))


def test_phase_term_count_mismatch():
    spec = AnsatzSpec(4, [UnitarySpec("phase", [np.zeros(4)] * 2, n_params=3)], np.zeros(4))
    with pytest.raises(StructuralError):
        evolve_state(spec, np.zeros(3))


def test_norm_preserved_over_random_theta():
    spec = _small_qaoa(depth=3)
    rng = np.random.default_rng(0)
    with Ansatz(spec, 3) as a:
        for _ in range(100):
            psi = gather(a.evolve_state(rng.uniform(0, 2 * np.pi, 6)))
            assert abs(np.linalg.norm(psi) - 1) < 1e-12


def test_basis_initial_state_gives_its_quality():
    q = np.array([4.0, -1.0, 2.5, 7.0])
    spec = AnsatzSpec(
        4,
        [UnitarySpec("phase", q), UnitarySpec("sparse", hypercube_mixer(2))],
        observables=0,
        initial_state=np.eye(4)[2],
    )
    assert objective(spec, [0.0, 0.0]) == 2.5


def test_subspace_initial_state():
    spec = qwoa_spec(np.arange(8.0))
    spec.initial_state = subspace_superposition([1, 5, 6])
    with Ansatz(spec, 3) as a:
        psi = gather(a.initial_state())
    expected = np.zeros(8)
    expected[[1, 5, 6]] = 1 / np.sqrt(3)
    np.testing.assert_allclose(psi, expected, atol=1e-15)


def test_unnormalised_initial_state_rejected():
    spec = _small_qaoa()
    spec.initial_state = np.ones(16)
    with pytest.raises(StructuralError):
        evolve_state(spec, np.zeros(2))


def test_observable_and_objective_maps():
    spec = _small_qaoa()
    theta = np.array([0.3, 1.1])
    base = objective(spec, theta)
    psi = gather(evolve_state(spec, theta))
    q = oracles.maxcut_costs([(0, 1), (1, 2), (2, 3), (3, 0)], 4)
    assert base == pytest.approx(np.sum(np.abs(psi) ** 2 * q), abs=1e-12)
    spec.observable_map = lambda x: x ** 2
    spec.objective_map = lambda x: -x
    assert objective(spec, theta) == pytest.approx(-np.sum(np.abs(psi) ** 2 * q ** 2), abs=1e-12)


def test_observables_from_generator_and_operator():
    q = np.arange(16.0)
    a = _small_qaoa()
    a.observables = lambda size, offset: np.arange(offset, offset + size, dtype=float)
    b = _small_qaoa()
    b.observables = DiagonalOperator.from_array(q, plan_partition(16, 1))
    theta = [0.4, 0.9]
    assert objective(a, theta, workers=3) == pytest.approx(objective(b, theta, workers=2), abs=1e-12)


def test_parameterised_operator_regenerates_on_change():
    calls = []

    def scaled(scheme, params):
        calls.append(params[0])
        return DiagonalOperator.from_array(params[0] * np.arange(4.0), scheme)

    spec = AnsatzSpec(
        4,
        [
            UnitarySpec("phase", scaled, n_params=2, operator_n_params=1),
            UnitarySpec("sparse", hypercube_mixer(2)),
        ],
        observables=np.arange(4.0),
    )
    with Ansatz(spec) as a:
        a.objective([1.0, 0.5, 0.2])
        a.objective([1.0, 0.7, 0.3])
        a.objective([2.0, 0.7, 0.3])
    assert calls == [1.0, 2.0]
    # same operator, phase folded into a fixed exponent
    fixed = AnsatzSpec(
        4,
        [UnitarySpec("phase", 2.0 * np.arange(4.0)), UnitarySpec("sparse", hypercube_mixer(2))],
        observables=np.arange(4.0),
    )
    with Ansatz(spec) as a:
        assert a.objective([2.0, 0.7, 0.3]) == pytest.approx(objective(fixed, [0.7, 0.3]), abs=1e-14)


def test_generate_initial_params():
    spec = _small_qaoa(depth=5, seed=11)
    a, b = generate_initial_params(spec), generate_initial_params(spec)
    np.testing.assert_array_equal(a, b)
    assert a.size == 10
    assert np.all((a > 0) & (a <= 2 * np.pi))
    assert not np.array_equal(a, generate_initial_params(_small_qaoa(depth=5, seed=12)))


def test_execute_improves_objective():
    res = execute(_small_qaoa(depth=1, seed=3))
    assert res.f_final <= res.f_initial
    assert res.evaluations >= 1
    assert abs(res.norm_final - 1) <= 1e-11
    assert res.theta_final.shape == (2,)


def test_execute_constant_qualities():
    res = execute(qaoa_spec(3, np.full(8, 1.75), depth=1))
    assert res.f_final == pytest.approx(1.75, abs=1e-12)
    assert res.optimizer_success


def test_execute_requires_depth():
    with pytest.raises(StructuralError):
        execute(_small_qaoa(depth=0))


def test_execute_is_worker_count_independent():
    spec = _small_qaoa(depth=2, seed=5)
    one = execute(spec, workers=1)
    three = execute(spec, workers=3)
    np.testing.assert_allclose(three.theta_final, one.theta_final, atol=1e-9)


def test_execute_with_gradient_groups():
    spec = _small_qaoa(depth=2, seed=5)
    serial = execute(spec, optimizer=OptimizerConfig(gradient_mode="central"))
    with Ansatz(spec, 2) as a:
        grouped = a.execute(
            optimizer=OptimizerConfig(gradient_mode="central", parallel_mode="jacobian", nodes=2)
        )
    np.testing.assert_allclose(grouped.theta_final, serial.theta_final, atol=1e-6)


def test_budget_exhaustion_is_reported():
    res = execute(_small_qaoa(depth=2, seed=1), optimizer=OptimizerConfig(max_evaluations=7))
    assert not res.optimizer_success
    assert res.budget_exhausted
    assert res.evaluations == 7
    assert res.f_final <= res.f_initial


def test_repeat_seeds_are_reproducible():
    assert repeat_seeds(4, 3) == repeat_seeds(4, 3)
    assert len(set(repeat_seeds(4, 5))) == 5


def test_benchmark_counts_and_distinct_starts(tmp_path):
    log = RunLog(tmp_path / "log.csv", "w")
    res = benchmark(_small_qaoa(seed=2), [1], repeats=3, log=log)
    assert len(res) == 3
    starts = {tuple(r.theta_initial) for r in res}
    assert len(starts) == 3
    with open(tmp_path / "log.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == LOG_HEADER
    assert len(rows) == 4


def _rows_without_time(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    t = rows[0].index("wall_time")
    return [r[:t] + r[t + 1 :] for r in rows]


def test_benchmark_rerun_reproduces_log(tmp_path):
    for name in ("a.csv", "b.csv"):
        benchmark(_small_qaoa(seed=9), [1, 2], repeats=2, log=RunLog(tmp_path / name, "w"))
    assert _rows_without_time(tmp_path / "a.csv") == _rows_without_time(tmp_path / "b.csv")


def test_benchmark_param_persist_reuses_prefix():
    spec = _small_qaoa(seed=4)
    res = benchmark(spec, [1, 2], repeats=2, param_persist=True)
    best1 = min((r for r in res if r.depth == 1), key=lambda r: r.f_final)
    for r in res:
        if r.depth == 2:
            np.testing.assert_array_equal(r.theta_initial[:2], best1.theta_final)


def test_benchmark_without_persist_is_independent():
    spec = _small_qaoa(seed=4)
    alone = benchmark(spec, [2], repeats=2)
    chained = benchmark(spec, [1, 2], repeats=2)
    for a, b in zip(alone, [r for r in chained if r.depth == 2]):
        np.testing.assert_array_equal(a.theta_initial, b.theta_initial)
        assert a.f_final == b.f_final


def test_benchmark_rejects_bad_depths():
    with pytest.raises(StructuralError):
        benchmark(_small_qaoa(), [2, 1])
    with pytest.raises(StructuralError):
        benchmark(_small_qaoa(), [])


def test_log_append_keeps_prefix(tmp_path):
    path = tmp_path / "log.csv"
    benchmark(_small_qaoa(seed=1), [1], repeats=1, log=RunLog(path, "w"))
    prefix = path.read_bytes()
    digest = hashlib.sha256(prefix).hexdigest()
    benchmark(_small_qaoa(seed=2), [1], repeats=2, log=RunLog(path, "a"))
    data = path.read_bytes()
    assert hashlib.sha256(data[: len(prefix)]).hexdigest() == digest
    assert data.count(b"\n") == 4


def test_log_overwrite_mode(tmp_path):
    path = tmp_path / "log.csv"
    benchmark(_small_qaoa(seed=1), [1], repeats=2, log=RunLog(path, "w"))
    benchmark(_small_qaoa(seed=1), [1], repeats=1, log=RunLog(path, "w"))
    assert path.read_text().count("\n") == 2
    with pytest.raises(StructuralError):
        RunLog(path, "x")


def test_maxcut_objective_is_worker_independent():
    spec = qaoa_spec(8, maxcut_qualities(CUBE_GRAPH, 8), depth=2)
    theta = [0.3, 2.2, 1.7, 0.4]
    values = [objective(spec, theta, workers=k) for k in (1, 2, 4, 7)]
    assert max(values) - min(values) <= 1e-12
