import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushpull_pd import network
from pushpull_pd.errors import MissingSelfLoop
from pushpull_pd.network import (
    DiGraph,
    GraphSchedule,
    WeightSchedule,
    check_connectivity,
    uniform_col_weights,
    uniform_row_weights,
    validate_weights,
)


def reachable_all(m, edges):
    """Independent reachability oracle via boolean matrix powers."""
    R = np.eye(m, dtype=int)
    adj = np.eye(m, dtype=int)
    for j, i in edges:
        adj[j, i] = 1  # row = source
    for _ in range(m):
        R = np.minimum(R + R @ adj, 1)
    return bool(R.all())


def complete_schedule(m, period=1):
    edges = frozenset((j, i) for j in range(m) for i in range(m))
    return GraphSchedule(tuple(DiGraph(m, edges) for _ in range(period)), 1)


digraphs = st.integers(2, 7).flatmap(
    lambda m: st.builds(
        lambda es: DiGraph(m, frozenset(es)),
        st.sets(st.tuples(st.integers(0, m - 1), st.integers(0, m - 1)), max_size=3 * m),
    )
)


class TestCanonicalSchedule:
    def test_shape(self, sched):
        assert sched.m == 6 and sched.period == 4 and sched.connectivity_window == 4
        for g in sched.graphs:
            assert all((i, i) in g.edges for i in range(6))
            assert 2 <= len(g.sorted_edges()) <= 3

    def test_four_window_connected(self, sched):
        assert check_connectivity(sched, 4)
        for k in range(4):
            union = set().union(*(sched.graph(k + t).edges for t in range(4)))
            assert reachable_all(6, union)

    def test_single_graphs_not_connected(self, sched):
        assert not check_connectivity(sched, 1)
        for g in sched.graphs:
            assert not reachable_all(6, g.edges)


class TestConnectivity:
    def test_complete(self):
        assert check_connectivity(complete_schedule(5), 1)

    def test_node_without_in_edges(self):
        m = 5
        graphs = []
        for k in range(3):
            edges = {(j, i) for j in range(m) for i in range(m) if i != 3}
            graphs.append(DiGraph(m, frozenset(edges)))
        sched = GraphSchedule(tuple(graphs), 3)
        for B in range(1, 8):
            assert not check_connectivity(sched, B)

    def test_invalid_window(self, sched):
        with pytest.raises(ValueError):
            check_connectivity(sched, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(digraphs, min_size=1, max_size=4), st.integers(1, 6))
    def test_monotone_and_matches_oracle(self, graphs, B):
        m = graphs[0].m
        graphs = [DiGraph(m, frozenset(e for e in g.edges if max(e) < m)) for g in graphs]
        sched = GraphSchedule(tuple(graphs), 1)
        got = check_connectivity(sched, B)
        expected = all(
            reachable_all(m, set().union(*(sched.graph(k + t).edges for t in range(B))))
            for k in range(sched.period)
        )
        assert got == expected
        if got:
            assert check_connectivity(sched, B + 1)


class TestUniformWeights:
    def test_row_two_in_neighbors(self):
        g = DiGraph(3, frozenset({(1, 0)}))
        A = uniform_row_weights(g)
        assert A[0, 0] == A[0, 1] == 0.5
        assert A[2, 2] == 1.0

    def test_col_two_out_neighbors(self):
        g = DiGraph(3, frozenset({(0, 2)}))
        B = uniform_col_weights(g)
        assert B[0, 0] == B[2, 0] == 0.5
        assert B[1, 1] == 1.0

    def test_missing_self_loop(self):
        g = DiGraph(2, frozenset())
        object.__setattr__(g, "edges", frozenset({(0, 1)}))
        with pytest.raises(MissingSelfLoop):
            uniform_row_weights(g)
        with pytest.raises(MissingSelfLoop):
            uniform_col_weights(g)

    @settings(max_examples=100, deadline=None)
    @given(digraphs)
    def test_stochastic_and_pattern(self, g):
        A, B = uniform_row_weights(g), uniform_col_weights(g)
        assert np.max(np.abs(A.sum(axis=1) - 1)) <= 1e-12
        assert np.max(np.abs(B.sum(axis=0) - 1)) <= 1e-12
        adj = g.adjacency()
        assert np.array_equal(A > 0, adj) and np.array_equal(B > 0, adj)


class TestValidateWeights:
    def test_canonical_ok(self, sched, weights):
        rep = validate_weights(weights, sched)
        assert rep.ok
        assert rep.eta >= 1 / 6
        for chk in rep.checks:
            assert chk.row_sum_dev <= 1e-12 and chk.col_sum_dev <= 1e-12

    def test_scaled_row(self, sched, weights):
        row = [a.copy() for a in weights.row]
        row[1][2] *= 0.9
        rep = validate_weights(WeightSchedule(tuple(row), weights.col), sched)
        assert not rep.ok
        assert rep.checks[1].row_sum_dev == pytest.approx(0.1)

    def test_off_pattern_entry(self, sched, weights):
        col = [b.copy() for b in weights.col]
        adj = sched.graph(0).adjacency()
        i, j = np.argwhere(~adj)[0]
        col[0][i, j] = 0.01
        col[0][j, j] -= 0.01
        rep = validate_weights(WeightSchedule(weights.row, tuple(col)), sched)
        assert not rep.ok
        assert ("B", int(i), int(j)) in rep.checks[0].pattern_mismatch

    def test_explicit_floor(self, sched, weights):
        assert not validate_weights(weights, sched, floor=0.75).ok


class TestMixing:
    def test_product_rows_agree(self, weights):
        P = np.eye(6)
        for k in range(201):
            P = weights.A(k) @ P
        assert np.max(np.ptp(P, axis=0)) < 1e-8


class TestSerialization:
    def test_schedule_round_trip(self, sched, tmp_path):
        path = tmp_path / "s.json"
        network.save_schedule(sched, path)
        back = network.load_schedule(path)
        assert back == sched

    def test_weights_round_trip(self, weights):
        back = network.weights_from_dict(network.weights_to_dict(weights))
        for a, b in zip(back.row + back.col, weights.row + weights.col):
            assert np.array_equal(a, b)
