import networkx as nx
import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lasagne_graph import EdgeFeaturizer, LasagneEmbedding, OneVsRestLogReg, datasets
from lasagne_graph._validation import check_embedding, check_graph, check_nodes, check_pairs
from lasagne_graph.appr import compute_all_appr


def test_get_params_and_clone():
    est = LasagneEmbedding(alpha=0.3, dim=8)
    params = est.get_params()
    assert params["alpha"] == 0.3 and params["dim"] == 8
    c = clone(est)
    assert c.get_params() == params and c is not est
    c.set_params(dim=4)
    assert c.dim == 4 and est.dim == 8


def test_fit_transform_shapes(karate):
    est = LasagneEmbedding(dim=8, max_batches=20)
    X = est.fit_transform(karate)
    assert X.shape == (34, 8)
    assert est.transform([0, 33]).tolist() == X[[0, 33]].tolist()
    assert len(est.apprs_) == 34 and len(est.loss_history_) == 20


def test_accepts_graph_formats(karate):
    edges = karate.edges()
    nxg = nx.karate_club_graph()
    a = LasagneEmbedding(dim=4, max_batches=5).fit(edges).transform()
    b = LasagneEmbedding(dim=4, max_batches=5).fit(karate.to_scipy()).transform()
    c = LasagneEmbedding(dim=4, max_batches=5).fit(nxg).transform()
    d = LasagneEmbedding(dim=4, max_batches=5).fit(karate.to_scipy().toarray()).transform()
    assert a.tobytes() == b.tobytes() == c.tobytes() == d.tobytes()


def test_precomputed_apprs_reused(karate):
    apprs = compute_all_appr(karate)
    a = LasagneEmbedding(dim=4, max_batches=5).fit(karate, apprs=apprs).transform()
    b = LasagneEmbedding(dim=4, max_batches=5).fit(karate).transform()
    assert a.tobytes() == b.tobytes()


def test_transform_before_fit_and_bad_ids(karate):
    with pytest.raises(NotFittedError):
        LasagneEmbedding().transform()
    est = LasagneEmbedding(dim=4, max_batches=2).fit(karate)
    with pytest.raises(IndexError):
        est.transform([34])
    with pytest.raises(TypeError):
        est.transform([0.5])


def test_one_vs_rest(karate, karate_factions):
    X = LasagneEmbedding(dim=16).fit_transform(karate)
    Y = karate_factions.indicator
    clf = OneVsRestLogReg(l2=0.1).fit(X, Y)
    assert clf.predict_proba(X).shape == (34, 2)
    assert (clf.predict(X) == Y).mean() > 0.8
    top = clf.predict_top_k(X, np.ones(34, dtype=int))
    assert top.sum(axis=1).tolist() == [1] * 34
    with pytest.raises(NotFittedError):
        OneVsRestLogReg().predict(X)
    with pytest.raises(ValueError):
        OneVsRestLogReg().fit(X, Y[:3])


def test_edge_featurizer():
    E = np.arange(6, dtype=float).reshape(3, 2)
    f = EdgeFeaturizer(E, "hadamard").fit()
    assert f.transform([[0, 1], [1, 2]]).tolist() == [[0, 3], [8, 15]]
    with pytest.raises(ValueError):
        EdgeFeaturizer(E, "max").fit()
    with pytest.raises(ValueError):
        f.transform([0, 1, 2])


def test_validation_helpers():
    with pytest.raises(TypeError):
        check_graph(np.zeros((3, 4)))
    g = check_graph(sp.csr_matrix(np.array([[0, 1], [1, 0]])))
    assert g.num_edges == 1
    assert check_nodes([1, 2], 3).tolist() == [1, 2]
    with pytest.raises(IndexError):
        check_nodes([-1], 3)
    assert check_pairs([[0, 1]], 2).shape == (1, 2)
    with pytest.raises(ValueError):
        check_embedding(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        check_embedding(np.zeros(3))


def test_datasets_helpers():
    g, member = datasets.disjoint_cliques([3, 4])
    assert g.num_edges == 3 + 6 and member.tolist() == [0] * 3 + [1] * 4
    er = datasets.erdos_renyi(50, 0.1, rng=0)
    assert er.num_nodes == 50
    ba = datasets.preferential_attachment(100, 2, rng=0)
    assert ba.num_nodes == 100 and ba.degrees.min() >= 2


def test_docstring_example():
    import doctest
    from lasagne_graph import estimator
    assert doctest.testmod(estimator).failed == 0
