import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crmarl.dag import Dag, predecessors, sample_dag, topological_order, validate_dag
from crmarl.errors import InvalidArgument, ValidationError


def test_zero_probability_gives_no_edges():
    for seed in range(20):
        assert sample_dag(4, 0.0, seed).edges == ()


def test_chain_order():
    assert topological_order(Dag.chain(3)) == (0, 1, 2)


def test_n_zero_is_invalid():
    with pytest.raises(InvalidArgument):
        sample_dag(0, 0.5, 0)


def test_bad_probability_is_invalid():
    with pytest.raises(InvalidArgument):
        sample_dag(3, 1.5, 0)


def test_edges_point_forward_in_the_returned_order():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        dag = sample_dag(n, float(rng.random()), rng)
        pos = {v: k for k, v in enumerate(dag.order)}
        assert sorted(dag.order) == list(range(n))
        assert all(pos[u] < pos[v] for u, v in dag.edges)


def test_predecessors_of_chain_and_empty():
    assert predecessors(Dag.chain(3), 2) == {1}
    assert predecessors(Dag.empty(4), 3) == frozenset()
    with pytest.raises(InvalidArgument):
        predecessors(Dag.chain(3), 3)


@settings(max_examples=300)
@given(st.integers(1, 8), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_predecessors_match_edge_filter(n, p, seed):
    dag = sample_dag(n, p, seed)
    for v in range(n):
        assert predecessors(dag, v) == {u for u, w in dag.edges if w == v}


@settings(max_examples=300)
@given(st.integers(1, 8), st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_sampled_dags_validate_and_are_deterministic(n, p, seed):
    dag = sample_dag(n, p, seed)
    validate_dag(dag)
    assert sample_dag(n, p, seed) == dag


def test_validator_accepts_chain_and_rejects_bad_graphs():
    validate_dag(Dag(3, (0, 1, 2), ((0, 1), (1, 2))))
    cases = {
        "cycle-detected": Dag(2, (0, 1), ((0, 1), (1, 0))),
        "self-loop": Dag(2, (0, 1), ((1, 1),)),
        "bad-endpoint": Dag(2, (0, 1), ((0, 2),)),
        "duplicate-edge": Dag(2, (0, 1), ((0, 1), (0, 1))),
    }
    for code, dag in cases.items():
        with pytest.raises(ValidationError) as err:
            validate_dag(dag)
        assert err.value.code == code


def test_cycle_found_even_if_stored_order_looks_fine():
    with pytest.raises(ValidationError) as err:
        validate_dag(Dag(3, (0, 1, 2), ((0, 1), (1, 2), (2, 0))))
    assert err.value.code == "cycle-detected"


@pytest.mark.parametrize("n,p", [(4, 0.5), (6, 0.3), (8, 0.8)])
def test_mean_edge_count_within_three_standard_errors(n, p):
    rng = np.random.default_rng(n * 100 + int(p * 10))
    counts = np.array([len(sample_dag(n, p, rng).edges) for _ in range(10_000)])
    pairs = n * (n - 1) / 2
    se = np.sqrt(pairs * p * (1 - p) / len(counts))
    assert abs(counts.mean() - p * pairs) < 3 * se


@pytest.mark.parametrize("n", range(2, 9))
def test_complete_graph_has_single_source_and_sink(n):
    dag = sample_dag(n, 1.0, n)
    assert len(dag.edges) == n * (n - 1) // 2
    sources = [v for v in range(n) if not predecessors(dag, v)]
    sinks = [v for v in range(n) if not any(u == v for u, _ in dag.edges)]
    assert sources == [dag.order[0]] and sinks == [dag.order[-1]]


def test_json_round_trip():
    dag = sample_dag(5, 0.5, 3)
    assert Dag.from_json(dag.to_json()) == dag
