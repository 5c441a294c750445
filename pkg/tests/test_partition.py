import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qvasim.partition import (
    NumericError,
    PartitionedState,
    StructuralError,
    allgather,
    expectation,
    gather,
    inner_product,
    make_pool,
    norm,
    plan_partition,
    read_state,
    scatter,
    write_state,
)
from qvasim.propagators import DiagonalOperator


def test_equal_division():
    s = plan_partition(16, 4)
    assert s.local_sizes == (4, 4, 4, 4)
    assert s.offsets == (0, 4, 8, 12)


def test_remainder_goes_to_leading_workers():
    s = plan_partition(10, 4)
    assert s.local_sizes == (3, 3, 2, 2)
    assert s.offsets == (0, 3, 6, 8)


def test_zero_blocks_are_excluded():
    s = plan_partition(2, 4)
    assert s.local_sizes == (1, 1, 0, 0)
    assert s.active == (0, 1)
    assert s.excluded == (2, 3)


def test_unit_constraint():
    s = plan_partition(16, 3, unit=4)
    assert all(size % 4 == 0 for size in s.local_sizes)
    assert sum(s.local_sizes) == 16


def test_owner_skips_empty_blocks():
    s = plan_partition(2, 4)
    assert [s.owner(i) for i in range(2)] == [0, 1]


@given(st.integers(1, 500), st.integers(1, 40))
def test_scheme_invariants(n, k):
    s = plan_partition(n, k)
    assert sum(s.local_sizes) == n
    assert max(s.local_sizes) - min(s.local_sizes) <= 1
    assert all(a <= b for a, b in zip(s.offsets, s.offsets[1:]))
    assert s.offsets[-1] + s.local_sizes[-1] == n


@settings(max_examples=50)
@given(st.integers(1, 64), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
def test_scatter_gather_round_trip(n, k, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    s = plan_partition(n, k)
    np.testing.assert_array_equal(gather(scatter(v, s)), v)
    np.testing.assert_array_equal(allgather(scatter(v, s)), v)


def test_scatter_rejects_wrong_length():
    with pytest.raises(StructuralError):
        scatter(np.zeros(5), plan_partition(4, 2))


def test_block_shape_is_checked():
    s = plan_partition(4, 2)
    with pytest.raises(StructuralError):
        PartitionedState(s, [np.zeros(3, complex), np.zeros(1, complex)])


def test_inner_product_examples():
    s = plan_partition(4, 3)
    uniform = scatter(np.full(4, 0.5), s)
    e0, e1, e2 = (scatter(np.eye(4)[i], s) for i in range(3))
    assert abs(inner_product(uniform, uniform) - 1.0) < 1e-12
    assert inner_product(e0, e1) == 0
    assert abs(inner_product(uniform, e2) - 0.5) < 1e-15


def test_inner_product_scheme_mismatch():
    a = scatter(np.ones(4), plan_partition(4, 2))
    b = scatter(np.ones(4), plan_partition(4, 3))
    with pytest.raises(StructuralError):
        inner_product(a, b)


def test_expectation_examples():
    s = plan_partition(4, 2)
    q = DiagonalOperator.from_array([0.0, 1.0, 2.0, 3.0], s)
    assert expectation(scatter(np.full(4, 0.5), s), q) == pytest.approx(1.5, abs=1e-15)
    for k in range(4):
        assert expectation(scatter(np.eye(4)[k], s), q) == k


def test_expectation_applies_observable_map():
    s = plan_partition(4, 2)
    q = DiagonalOperator.from_array([0.0, 1.0, 2.0, 3.0], s)
    psi = scatter(np.full(4, 0.5), s)
    assert expectation(psi, q, lambda x: x ** 2) == pytest.approx(3.5)


def test_expectation_rejects_non_finite_after_map():
    s = plan_partition(4, 2)
    q = DiagonalOperator.from_array([0.0, 1.0, 2.0, 3.0], s)
    with pytest.raises(NumericError), np.errstate(divide="ignore"):
        expectation(scatter(np.full(4, 0.5), s), q, lambda x: 1 / x)


def test_diagonal_operator_rejects_non_finite():
    with pytest.raises(NumericError):
        DiagonalOperator.from_array([0.0, np.nan], plan_partition(2, 1))


@pytest.mark.parametrize("k", [2, 3, 5, 8])
def test_reductions_do_not_depend_on_worker_count(k):
    rng = np.random.default_rng(k)
    v = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    q = rng.normal(size=1000) * 100
    ref_scheme = plan_partition(1000, 1)
    scheme = plan_partition(1000, k)
    pool = make_pool(k, threads=k)
    try:
        a = scatter(v, scheme, pool)
        ref = scatter(v, ref_scheme)
        assert norm(a) == norm(ref)
        assert inner_product(a, a) == inner_product(ref, ref)
        assert expectation(a, DiagonalOperator.from_array(q, scheme)) == expectation(
            ref, DiagonalOperator.from_array(q, ref_scheme)
        )
    finally:
        pool.shutdown()


def test_gathered_norm_matches_distributed():
    rng = np.random.default_rng(3)
    v = rng.normal(size=37) + 1j * rng.normal(size=37)
    state = scatter(v, plan_partition(37, 4))
    assert abs(np.linalg.norm(gather(state)) - norm(state)) < 1e-14


def test_state_dump_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    v = rng.normal(size=12) + 1j * rng.normal(size=12)
    path = tmp_path / "state.bin"
    write_state(path, scatter(v, plan_partition(12, 5)))
    raw = path.read_bytes()
    assert raw[:4] == b"QVAS"
    assert int.from_bytes(raw[4:12], "little") == 12
    assert raw[12:16] == b"c128"
    assert len(raw) == 20 + 16 * 12
    np.testing.assert_array_equal(read_state(path), v)


def test_state_dump_rejects_truncation(tmp_path):
    path = tmp_path / "state.bin"
    write_state(path, np.ones(4, complex))
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(StructuralError):
        read_state(path)
