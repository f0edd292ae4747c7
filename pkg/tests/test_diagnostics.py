import math

import numpy as np
import pytest

from lasagne_graph import datasets
from lasagne_graph.appr import ApprConfig
from lasagne_graph.diagnostics import (degree_buckets, hop_distance_profile,
                                       instances_per_degree, kcore_class_profile,
                                       per_class_f1_delta, write_table)
from lasagne_graph.evaluation import EvalReport
from lasagne_graph.graph import LabelSet
from lasagne_graph.walks import WalkConfig

from conftest import graph_from_edges


@pytest.fixture(scope="module")
def ba():
    return datasets.preferential_attachment(600, 2, rng=5)


def test_buckets_cover_degrees():
    assert degree_buckets([1, 3, 9]) == [(1, 2), (2, 4), (4, 8), (8, 16)]


def test_star_leaf_context_distances():
    star = graph_from_edges([(0, i) for i in range(1, 8)])
    for delta in (1e-4, 0.1):
        rows = hop_distance_profile(star, "appr", [(1, 2)], rng=0, raw=True,
                                    appr_cfg=ApprConfig(0.2, delta))
        # the hub dominates; the stopping rule always admits at least one
        # more pop after it, so a second leaf (2 hops) carries a little mass
        assert set(rows[0]["raw"]) <= {1, 2}
        assert rows[0]["p50"] == 1.0


def test_hop_profile_empty_bucket_and_determinism(karate):
    buckets = [(1, 2), (100, 200)]
    a = hop_distance_profile(karate, "appr", buckets, samples_per_bucket=5, rng=2)
    b = hop_distance_profile(karate, "appr", buckets, samples_per_bucket=5, rng=2)
    assert a == b
    assert a[1]["note"] == "empty"
    with pytest.raises(ValueError):
        hop_distance_profile(karate, "node2vec")


def test_appr_medians_non_increasing_with_degree(ba):
    rows = hop_distance_profile(ba, "appr", samples_per_bucket=30, rng=1)
    meds = [r["p50"] for r in rows if "p50" in r]
    assert all(b <= a for a, b in zip(meds, meds[1:]))


def test_walk_contexts_reach_beyond_three_hops(ba):
    rows = hop_distance_profile(ba, "walks", [(2, 4)], samples_per_bucket=20, rng=1,
                                walk_cfg=WalkConfig(walk_len=40, walks_per_node=2), raw=True)
    assert max(rows[0]["raw"]) > 3


def test_appr_instances_identical_per_node(ba):
    rows, counts = instances_per_degree(ba, "appr", pairs_per_node=8700, rng=0)
    assert set(counts.tolist()) == {8700}
    for r in rows[:-1]:
        if r.get("n_nodes"):
            assert r["std"] == 0
    assert rows[-1]["statistic"] == "spearman_count_degree"


def test_walk_instances_correlate_with_degree(ba):
    rows, _ = instances_per_degree(ba, "walks", rng=0,
                                   walk_cfg=WalkConfig(walk_len=40, walks_per_node=3))
    assert rows[-1]["value"] > 0.5


def test_kcore_uniform_labels_ratio_one():
    g = graph_from_edges([(0, 1), (1, 2), (0, 2), (2, 3)])
    lab = LabelSet(np.ones((4, 1), dtype=bool), ("all",))
    rows = kcore_class_profile(g, lab)
    assert {r["ratio"] for r in rows} == {1.0}
    assert {r["log_ratio"] for r in rows} == {0.0}


def test_kcore_pendant_class_and_max_core_class():
    g = graph_from_edges([(0, 1), (1, 2), (0, 2), (2, 3)])
    ind = np.zeros((4, 2), dtype=bool)
    ind[3, 0] = True          # pendant only
    ind[:3, 1] = True         # exactly the max core
    rows = kcore_class_profile(g, LabelSet(ind, ("pend", "core")))
    pend = {r["k"]: r for r in rows if r["class"] == "pend"}
    assert pend[1]["ratio"] == 1.0
    assert pend[2]["ratio"] == 0.0 and pend[2]["log_ratio"] is None
    core = {r["k"]: r for r in rows if r["class"] == "core"}
    assert core[2]["ratio"] == pytest.approx(1 / 0.75)


def test_f1_delta_examples():
    lab = LabelSet(np.eye(3, dtype=bool), ("a", "b", "c"))
    perfect = EvalReport("x", np.ones(3))
    wrong = EvalReport("x", np.zeros(3))
    assert [r["delta_f1"] for r in per_class_f1_delta(perfect, perfect, lab)] == [0, 0, 0]
    rows = per_class_f1_delta(perfect, wrong, lab)
    assert [r["delta_f1"] for r in rows] == [1, 1, 1]
    assert all(-1 <= r["delta_f1"] <= 1 for r in per_class_f1_delta(wrong, perfect, lab))
    with pytest.raises(ValueError):
        per_class_f1_delta(perfect, EvalReport("x", np.ones(2)), lab)


def test_f1_delta_skips_nan_classes():
    lab = LabelSet(np.eye(2, dtype=bool), ("a", "b"))
    rows = per_class_f1_delta(EvalReport("x", np.array([0.5, math.nan])),
                              EvalReport("x", np.array([0.25, 0.1])), lab)
    assert rows == [{"class": "a", "size": 1, "delta_f1": 0.25}]


def test_write_table(tmp_path):
    p = tmp_path / "t.csv"
    write_table(p, [{"a": 1, "b": None}, {"a": 2, "c": "x", "raw": [1]}], {"seed": 3})
    assert p.read_text().splitlines() == ["# seed=3", "a,b,c", "1,,", "2,,x"]
