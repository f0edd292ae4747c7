import numpy as np
import pytest
from scipy import stats

from lasagne_graph import datasets
from lasagne_graph.walks import (PAD, WalkConfig, pairs_per_center, pairs_per_walk,
                                 save_walks, simulate_walks, walk_lengths, window_contexts)

from conftest import graph_from_edges


def exact_pairs_per_walk(length, w):
    """Expected pair count of one walk with per-side extensions clipped at the ends."""
    def side(room):
        # E[min(U{1..w}, room)]
        return sum(min(e, room) for e in range(1, w + 1)) / w
    return sum(side(i) + side(length - 1 - i) for i in range(length))


def test_single_edge_walks_alternate():
    g = graph_from_edges([(0, 1)])
    walks = simulate_walks(g, WalkConfig(walk_len=3, walks_per_node=2))
    assert walks.tolist() == [[0, 1, 0], [0, 1, 0], [1, 0, 1], [1, 0, 1]]


def test_walk_count_and_steps_are_edges(karate):
    walks = simulate_walks(karate, WalkConfig(walk_len=20, walks_per_node=3, rng_seed=1))
    assert walks.shape == (34 * 3, 20)
    adj = set(map(tuple, karate.edges().tolist()))
    for row in walks:
        for a, b in zip(row, row[1:]):
            assert (min(a, b), max(a, b)) in adj


def test_walks_reproducible_and_isolated_padding():
    g = graph_from_edges([(0, 1), (1, 2)], n=4)
    cfg = WalkConfig(walk_len=5, walks_per_node=2, rng_seed=7)
    a, b = simulate_walks(g, cfg), simulate_walks(g, cfg)
    assert a.tolist() == b.tolist()
    assert a[6].tolist() == [3, PAD, PAD, PAD, PAD]
    assert walk_lengths(a).tolist() == [5] * 6 + [1, 1]


def test_window_example():
    centers, contexts = next(window_contexts(np.array([[10, 11, 12]]), 1, rng=0))
    got = sorted(zip(centers.tolist(), contexts.tolist()))
    assert sorted(c for s, c in got if s == 11) == [10, 12]
    assert got == sorted([(10, 11), (11, 10), (11, 12), (12, 11)])


def test_contexts_within_window_positions():
    walk = np.arange(30)[None, :]
    for centers, contexts in window_contexts(walk, 4, rng=3):
        assert np.all(np.abs(centers - contexts) <= 4)
        assert np.all(centers != contexts)


def test_pair_counters_agree():
    walks = simulate_walks(datasets.karate_graph(), WalkConfig(walk_len=15, walks_per_node=2))
    per_walk = pairs_per_walk(walks, 5, rng=2).sum()
    per_center = pairs_per_center(walks, 5, 34, rng=2).sum()
    assert per_walk == per_center


def test_window_validation():
    with pytest.raises(ValueError):
        next(window_contexts(np.zeros((1, 3), dtype=int), 0))
    with pytest.raises(ValueError):
        WalkConfig(window=0)


def test_exact_oracle_small_case():
    # length 3, w=2: ends see 0 left + E[min(U{1,2},2)]=1.5 right, middle 1 + 1
    assert exact_pairs_per_walk(3, 2) == pytest.approx(1.5 + 2 + 1.5)


def test_monte_carlo_matches_exact_clipped_expectation():
    walks = np.zeros((20_000, 80), dtype=np.int64)
    mean = pairs_per_walk(walks, 10, rng=0).mean()
    exact = exact_pairs_per_walk(80, 10)
    assert exact == pytest.approx(836.0)
    assert mean == pytest.approx(exact, rel=0.005)


def test_pair_counts_correlate_with_degree():
    g = datasets.preferential_attachment(1000, 3, rng=1)
    walks = simulate_walks(g, WalkConfig(walk_len=40, walks_per_node=5))
    counts = pairs_per_center(walks, 10, g.num_nodes, rng=1)
    assert stats.spearmanr(counts, g.degrees).statistic > 0.5


def test_save_walks(tmp_path):
    p = tmp_path / "w.txt"
    save_walks(p, np.array([[0, 1, PAD], [1, 0, 1]]), ["a", "b"])
    assert p.read_text() == "a b\nb a b\n"
