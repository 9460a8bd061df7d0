import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hisres.data import Snapshot, build_snapshots
from hisres.errors import ConfigError
from hisres.graphs import (RelevanceIndex, build_global_graph, build_global_graph_naive, in_neighbors,
                           window_count, window_graphs)


def snaps_from(rows, end=None):
    return build_snapshots(np.asarray(rows).reshape(-1, 4), 0, end)


def random_history(rng, n_facts, n_ent=15, n_rel=4, n_time=12):
    rows = np.column_stack([rng.integers(n_ent, size=n_facts), rng.integers(n_rel, size=n_facts),
                            rng.integers(n_ent, size=n_facts), rng.integers(n_time, size=n_facts)])
    return snaps_from(rows, n_time - 1)


class TestWindows:
    def test_count_l9_w2(self):
        snaps = [Snapshot(t, np.zeros((0, 3), int)) for t in range(9)]
        assert len(window_graphs(snaps, 2)) == 8

    @pytest.mark.parametrize("l", range(1, 13))
    def test_count_all(self, l):
        snaps = [Snapshot(t, np.array([[t, 0, t + 1]])) for t in range(l)]
        for omega in range(1, l + 1):
            wins = window_graphs(snaps, omega)
            assert len(wins) == window_count(l, omega) == l - omega + 1
            # together with the l single snapshots: 2l - omega + 1 graphs
            assert len(wins) + l == 2 * l - omega + 1
            assert [w.start for w in wins] == list(range(l - omega + 1))
            assert all(w.span == omega for w in wins)

    def test_omega_one_is_snapshots(self, rng):
        snaps = random_history(rng, 40)
        for w, s in zip(window_graphs(snaps, 1), snaps):
            np.testing.assert_array_equal(w.triples, s.triples)

    def test_two_hop_path_exposed(self):
        e1, e2, e3, r1, r2 = 1, 2, 3, 0, 1
        snaps = [Snapshot(7, np.array([[e2, r2, e1]])), Snapshot(8, np.array([[e1, r1, e3]]))]
        (win,) = window_graphs(snaps, 2)
        edges = {tuple(x) for x in win.triples.tolist()}
        assert edges == {(e2, r2, e1), (e1, r1, e3)}

    def test_dedup_across_members(self):
        snaps = [Snapshot(0, np.array([[0, 0, 1]])), Snapshot(1, np.array([[0, 0, 1], [1, 0, 2]]))]
        (win,) = window_graphs(snaps, 2)
        assert len(win.triples) == 2

    def test_augmented_windows(self):
        snaps = [Snapshot(0, np.array([[0, 1, 2]]))]
        (win,) = window_graphs(snaps, 1, num_relations=3)
        assert {tuple(x) for x in win.triples.tolist()} == {(0, 1, 2), (2, 4, 0)}

    def test_omega_too_large(self):
        snaps = [Snapshot(0, np.zeros((0, 3), int))]
        with pytest.raises(ConfigError):
            window_graphs(snaps, 2)
        assert len(window_graphs(snaps, 2, strict=False)) == 1


class TestGlobalGraph:
    def test_figure_example(self):
        e1, e2, e3, e4, r1, r3, t = 1, 2, 3, 4, 0, 2, 6
        history = snaps_from([[e1, r1, e4, 0], [e1, r1, e2, 1], [e3, r3, e1, t - 2],
                              [e2, r1, e3, 3], [e1, 1, e3, 2]], t - 1)
        g = build_global_graph(history, [(e1, r1), (e3, r3)], t)
        assert {tuple(x) for x in g.triples.tolist()} == {(e1, r1, e4), (e1, r1, e2), (e3, r3, e1)}

    def test_no_match(self, rng):
        g = build_global_graph(random_history(rng, 50), [(99, 99)], 12)
        assert len(g) == 0

    def test_excludes_current_and_future(self):
        history = snaps_from([[0, 0, 1, 0], [0, 0, 2, 3], [0, 0, 3, 4]])
        g = build_global_graph(history, [(0, 0)], 3)
        assert g.triples.tolist() == [[0, 0, 1]]

    def test_brute_force_200(self, rng):
        history = random_history(rng, 200)
        pairs = [(int(rng.integers(15)), int(rng.integers(4))) for _ in range(5)]
        fast = build_global_graph(history, pairs, 9)
        wanted = set(pairs)
        brute = sorted({(s, r, o) for snap in history if snap.time < 9
                        for s, r, o in snap.triples.tolist() if (s, r) in wanted})
        assert fast.triples.tolist() == [list(x) for x in brute]

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 300), st.integers(1, 12))
    def test_index_equals_naive(self, seed, n_facts, t):
        rng = np.random.default_rng(seed)
        history = random_history(rng, n_facts)
        pairs = rng.integers(0, [15, 4], size=(int(rng.integers(1, 8)), 2))
        fast = RelevanceIndex().extend(history).build(pairs, t)
        naive = build_global_graph_naive(history, pairs, t)
        assert fast.triples.dtype == naive.triples.dtype
        assert fast.triples.tobytes() == naive.triples.tobytes()
        assert fast.triples.shape == naive.triples.shape

    def test_idempotent(self, rng):
        history = random_history(rng, 100)
        a = build_global_graph(history, [(1, 1), (2, 0)], 10)
        b = build_global_graph(history, [(1, 1), (2, 0)], 10)
        assert a.triples.tobytes() == b.triples.tobytes()

    def test_inverse_phase_uses_augmented_facts(self):
        history = snaps_from([[0, 1, 2, 0]])
        g = build_global_graph(history, [(2, 4)], 1, num_relations=3)
        assert g.triples.tolist() == [[2, 4, 0]]

    def test_index_rejects_out_of_order(self):
        idx = RelevanceIndex()
        idx.add_snapshot(Snapshot(3, np.zeros((0, 3), int)))
        with pytest.raises(ValueError):
            idx.add_snapshot(Snapshot(2, np.zeros((0, 3), int)))


class TestInNeighbors:
    def test_basic(self):
        a, b, c, r, q = 0, 1, 2, 5, 3
        assert in_neighbors(np.array([[a, r, b], [c, q, b]]), b) == [(a, r), (c, q)]

    def test_isolated(self):
        assert in_neighbors(np.array([[0, 0, 1]]), 7) == []

    def test_brute_force(self, rng):
        for _ in range(50):
            triples = rng.integers(0, 6, size=(30, 3))
            o = int(rng.integers(6))
            brute = sorted({(int(s), int(r)) for s, r, x in triples if x == o})
            assert in_neighbors(triples, o) == brute
