import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from sklearn.linear_model import LogisticRegression

from lasagne_graph import datasets
from lasagne_graph.evaluation import (DegenerateTrainingSet, EvalReport, cosine_knn,
                                      edge_embed, jaccard_knn_score, jaccard_knn_scores,
                                      linkpred_eval, logreg_fit, metrics_auc, metrics_f1,
                                      multilabel_former, multilabel_realistic,
                                      sample_non_edges, split_edges, stratified_folds)
from lasagne_graph.graph import LabelSet

from conftest import graph_from_edges


def brute_auc(scores, labels):
    """Pairwise oracle: P(score_pos > score_neg) + 0.5 P(tie)."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    wins = sum((p > n) + 0.5 * (p == n) for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def one_hot_labels(n, classes, rng, multi=False):
    ind = np.zeros((n, classes), dtype=bool)
    ind[np.arange(n), rng.integers(0, classes, n)] = True
    if multi:
        extra = rng.random((n, classes)) < 0.2
        ind |= extra
    return LabelSet(ind, tuple(f"c{i}" for i in range(classes)))


# -- metrics --------------------------------------------------------------------

def test_f1_hand_example():
    per, macro, micro = metrics_f1([1, 2], [1, 0], [1, 0])
    assert per.tolist() == [0.5, 1.0]
    assert macro == 0.75 and micro == 0.75


def test_f1_zero_and_perfect():
    per, macro, micro = metrics_f1([0, 0], [0, 0], [0, 0])
    assert per.tolist() == [0, 0] and macro == 0 and micro == 0
    assert metrics_f1([5], [0], [0])[1:] == (1.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 20)),
                min_size=1, max_size=8), st.randoms())
def test_macro_invariant_under_class_relabeling(counts, rnd):
    tp, fp, fn = map(list, zip(*counts))
    perm = list(range(len(counts)))
    rnd.shuffle(perm)
    a = metrics_f1(tp, fp, fn)
    b = metrics_f1(*[[x[i] for i in perm] for x in (tp, fp, fn)])
    assert a[1] == pytest.approx(b[1]) and a[2] == pytest.approx(b[2])
    assert 0 <= a[1] <= 1 and 0 <= a[2] <= 1


def test_auc_examples():
    assert metrics_auc([0.9, 0.1], [1, 0]) == 1.0
    assert metrics_auc([0.1, 0.9], [1, 0]) == 0.0
    assert metrics_auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        metrics_auc([0.1, 0.2], [1, 1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=30)
       .filter(lambda xs: 0 < sum(l for _, l in xs) < len(xs)))
def test_auc_matches_pairwise_oracle_and_monotone_invariance(data):
    scores, labels = map(list, zip(*data))
    auc = metrics_auc(scores, labels)
    assert auc == pytest.approx(brute_auc(scores, labels))
    assert metrics_auc(np.exp(np.array(scores) * 3.0) - 7, labels) == pytest.approx(auc)


def test_random_scores_auc_near_half():
    rng = np.random.default_rng(0)
    labels = np.r_[np.ones(5000), np.zeros(5000)]
    assert abs(metrics_auc(rng.random(10_000), labels) - 0.5) <= 0.02


# -- logistic regression --------------------------------------------------------

def one_d_optimum(l2):
    # symmetric data => bias 0; stationarity: l2 * w = 2 * sigmoid(-w)
    w = brentq(lambda w: l2 * w - 2 / (1 + math.exp(w)), 0, 100)
    return 1 / (1 + math.exp(-w))


@pytest.mark.parametrize("l2", [1.0, 0.1, 0.01])
def test_logreg_separable_1d_matches_oracle(l2):
    m = logreg_fit([[-1.0], [1.0]], [0, 1], l2=l2)
    p = m.predict_proba(np.array([[1.0]]))[0]
    assert p == pytest.approx(one_d_optimum(l2), abs=1e-6)
    assert m.grad_norm < 1e-5


def test_logreg_separable_1d_confident_when_lightly_regularized():
    m = logreg_fit([[-1.0], [1.0]], [0, 1], l2=0.01)
    assert m.predict_proba(np.array([[1.0]]))[0] > 0.9


def test_logreg_identical_features_gives_prior():
    m = logreg_fit(np.ones((10, 3)), [1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
    assert m.predict_proba(np.ones((1, 3)))[0] == pytest.approx(0.3, abs=1e-4)


def test_logreg_degenerate():
    with pytest.raises(DegenerateTrainingSet, match="degenerate"):
        logreg_fit(np.ones((3, 2)), [1, 1, 1])


def test_logreg_agrees_with_sklearn():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, 5))
    y = (X @ rng.normal(size=5) + rng.normal(size=200) > 0).astype(float)
    ours = logreg_fit(X, y, l2=1.0)
    # same objective: summed log-loss, C = 1/l2, intercept unpenalized
    ref = LogisticRegression(C=1.0, tol=1e-10, max_iter=10_000).fit(X, y)
    np.testing.assert_allclose(ours.weights[:-1], ref.coef_[0], atol=1e-4)
    np.testing.assert_allclose(ours.weights[-1], ref.intercept_[0], atol=1e-4)


# -- protocols ------------------------------------------------------------------

def test_realistic_perfect_features():
    rng = np.random.default_rng(0)
    labels = one_hot_labels(200, 4, rng)
    rep = multilabel_realistic(labels.indicator.astype(float) * 4 - 2, labels, rng=1)
    assert rep.macro_f1 == 1.0 and rep.micro_f1 == 1.0
    assert len(rep.fold_macro_f1) == 10


def test_former_perfect_features():
    rng = np.random.default_rng(0)
    labels = one_hot_labels(200, 4, rng, multi=True)
    rep = multilabel_former(labels.indicator.astype(float) * 4 - 2, labels, rng=1)
    assert rep.macro_f1 == 1.0 and rep.micro_f1 == 1.0
    assert len(rep.fold_micro_f1) == 10


def test_realistic_random_embeddings_below_baseline():
    rng = np.random.default_rng(2)
    y = rng.random(300) < 0.5
    labels = LabelSet(np.column_stack([y, ~y]), ("a", "b"))
    rep = multilabel_realistic(rng.normal(size=(300, 8)), labels, rng=3)
    assert rep.macro_f1 < 0.6


def test_realistic_skips_small_classes():
    rng = np.random.default_rng(0)
    ind = np.zeros((100, 3), dtype=bool)
    ind[:50, 0] = True
    ind[50:, 1] = True
    ind[:5, 2] = True
    rep = multilabel_realistic(rng.normal(size=(100, 4)), LabelSet(ind, ("a", "b", "c")), rng=0)
    assert rep.skipped_classes == [2]
    assert math.isnan(rep.per_class_f1[2])
    with pytest.raises(ValueError):
        multilabel_realistic(rng.normal(size=(100, 4)),
                             LabelSet(ind[:, 2:], ("c",)), rng=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 200), st.integers(0, 1000), st.integers(2, 10))
def test_stratified_folds_partition_exactly(n, seed, folds):
    rng = np.random.default_rng(seed)
    truth = rng.random(n) < rng.random()
    assign = stratified_folds(truth, folds, rng)
    assert assign.shape == (n,) and set(assign.tolist()) <= set(range(folds))
    pos = np.bincount(assign[truth], minlength=folds)
    assert pos.max() - pos.min() <= 1
    sizes = np.bincount(assign, minlength=folds)
    assert sizes.max() - sizes.min() <= 1


def test_former_argument_checks():
    labels = one_hot_labels(20, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        multilabel_former(np.zeros((20, 2)), labels, train_fraction=1.0)


def test_report_outputs(tmp_path):
    rep = EvalReport("realistic", np.array([0.5, np.nan]), [0.4, 0.6], [0.5, 0.7],
                     skipped_classes=[1], config={"folds": 2})
    assert rep.macro_f1 == pytest.approx(0.5)
    p = tmp_path / "r.tsv"
    rep.write(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "# folds=2"
    assert lines[1].split("\t") == ["protocol", "key", "fold", "metric", "value"]
    assert "class1" not in p.read_text()
    assert "skipped classes: [1]" in rep.summary()


# -- edge operators and kNN ------------------------------------------------------

def test_edge_operators():
    assert edge_embed([1, 2], [3, 4], "hadamard").tolist() == [3, 8]
    assert edge_embed([1, 2], [3, 0], "l1").tolist() == [2, 2]
    assert edge_embed([1, 2], [3, 0], "l2").tolist() == [4, 4]
    x = np.array([0.5, -2.0])
    assert edge_embed(x, x, "average").tolist() == x.tolist()
    assert edge_embed(x, x, "l1").tolist() == [0, 0]
    with pytest.raises(ValueError):
        edge_embed([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        edge_embed([1], [2], "max")


def test_jaccard_identical_embeddings_score_one():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 5))
    X[7] = X[3]
    assert jaccard_knn_score(X, 3, 7, k=10) == 1.0


def test_jaccard_separated_clusters_score_zero():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal([10, 0], 0.1, size=(20, 2)),
                   rng.normal([0, 10], 0.1, size=(20, 2))])
    assert jaccard_knn_score(X, 0, 25, k=10) == 0.0
    with pytest.raises(ValueError):
        jaccard_knn_scores(X, [[0, 1]], k=39)


def test_cosine_knn_matches_brute_force():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 4))
    Xn = X / np.linalg.norm(X, axis=1, keepdims=True)
    sim = Xn @ Xn.T
    got = cosine_knn(X, 5)
    for i in range(30):
        order = [j for j in np.argsort(-sim[i], kind="stable") if j != i][:5]
        assert got[i].tolist() == order


# -- link prediction ------------------------------------------------------------

@pytest.mark.parametrize("holdout", [0.5, 0.3])
def test_split_invariants(holdout):
    g = datasets.preferential_attachment(300, 4, rng=0)
    s = split_edges(g, holdout, rng=1)
    assert s.residual.num_edges == math.ceil((1 - holdout) * g.num_edges)
    assert np.all(s.residual.degrees[g.degrees > 0] >= 1)
    original = set(map(tuple, g.edges().tolist()))
    for neg in (s.train_neg, s.test_neg):
        assert not (set(map(tuple, neg.tolist())) & original)
        assert len(set(map(tuple, neg.tolist()))) == len(neg)
    assert not set(map(tuple, s.train_neg.tolist())) & set(map(tuple, s.test_neg.tolist()))
    assert len(s.test_neg) == len(s.test_pos) and len(s.train_neg) == len(s.train_pos)
    assert set(map(tuple, s.test_pos.tolist())) <= original


def test_split_infeasible():
    star = datasets.disjoint_cliques([2, 2, 2])[0]
    with pytest.raises(ValueError, match="infeasible"):
        split_edges(star, 0.5, rng=0)


def test_non_edge_sampling_exhaustion():
    g = datasets.disjoint_cliques([4])[0]
    with pytest.raises(ValueError):
        sample_non_edges(g, 1, np.random.default_rng(0))


def test_linkpred_random_vs_structural():
    g = datasets.preferential_attachment(400, 4, rng=2)
    rand = linkpred_eval(g, lambda r: np.random.default_rng(0).normal(size=(r.num_nodes, 8)),
                         rng=3, jaccard_k=10)
    assert all(abs(v - 0.5) < 0.1 for v in rand.auc.values())
    # community indicators make hadamard features informative on a block graph
    sbm = nx.stochastic_block_model([50] * 4, [[0.3 if i == j else 0.01 for j in range(4)]
                                               for i in range(4)], seed=1)
    bg = graph_from_edges(list(sbm.edges()), 200)
    onehot = np.repeat(np.eye(4), 50, axis=0)
    good = linkpred_eval(bg, lambda r: onehot, ops=("hadamard",), rng=3, jaccard_k=None)
    assert good.auc["hadamard"] > 0.8
    assert good.config["removal_constraint"] == "no endpoint isolated"
