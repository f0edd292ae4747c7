"""scikit-learn compatible wrappers around the pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from ._validation import check_embedding, check_graph, check_nodes, check_pairs
from .appr import ApprConfig, compute_all_appr
from .evaluation import _fit_or_constant, edge_embed
from .sgns import TrainConfig, train


class LasagneEmbedding(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    """Node embeddings learned from APPR neighborhoods.

    ``fit`` takes a graph (CsrGraph, adjacency matrix, edge array or a
    networkx graph); ``transform`` maps node IDs to embedding rows.

    Examples
    --------
    >>> from lasagne_graph import LasagneEmbedding, datasets
    >>> g = datasets.karate_graph()
    >>> emb = LasagneEmbedding(dim=16, max_batches=50).fit_transform(g)
    >>> emb.shape
    (34, 16)
    """

    def __init__(self, alpha=0.2, delta=1e-4, dim=128, negatives=5, batch_size=None,
                 max_batches=None, lr_initial=0.025, lr_final=1e-4, noise_exponent=0.75,
                 noise="degree", walk_len=80, walks_per_node=10, window=10,
                 n_jobs=1, random_state=0):
        self.alpha = alpha
        self.delta = delta
        self.dim = dim
        self.negatives = negatives
        self.batch_size = batch_size
        self.max_batches = max_batches
        self.lr_initial = lr_initial
        self.lr_final = lr_final
        self.noise_exponent = noise_exponent
        self.noise = noise
        self.walk_len = walk_len
        self.walks_per_node = walks_per_node
        self.window = window
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _configs(self):
        appr = ApprConfig(self.alpha, self.delta)
        tc = TrainConfig(d=self.dim, alpha=self.alpha, delta=self.delta,
                         negatives_k=self.negatives, batch_size=self.batch_size,
                         max_batches=self.max_batches, lr_initial=self.lr_initial,
                         lr_final=self.lr_final, noise_exponent=self.noise_exponent,
                         noise=self.noise, rng_seed=int(self.random_state or 0),
                         walk_len=self.walk_len, walks_per_node=self.walks_per_node,
                         window=self.window, n_workers=self.n_jobs)
        return appr, tc

    def fit(self, X, y=None, apprs=None):
        """Compute APPR vectors (unless ``apprs`` is given) and train."""
        g = check_graph(X)
        appr_cfg, train_cfg = self._configs()
        if apprs is None:
            apprs = compute_all_appr(g, appr_cfg, n_jobs=self.n_jobs)
        emb = train(g, apprs, train_cfg)
        self.graph_ = g
        self.apprs_ = apprs
        self.embedding_ = emb.input_vecs
        self.context_embedding_ = emb.context_vecs
        self.loss_history_ = emb.loss_history
        self.n_nodes_ = g.num_nodes
        return self

    def transform(self, X=None):
        """Embedding rows of the node IDs in ``X`` (all nodes if None)."""
        check_is_fitted(self, "embedding_")
        if X is None:
            return self.embedding_.copy()
        return self.embedding_[check_nodes(X, self.n_nodes_)]

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).embedding_.copy()


class OneVsRestLogReg(ClassifierMixin, BaseEstimator):
    """One L2-regularized logistic regression per label column."""

    def __init__(self, l2=1.0, threshold=0.5):
        self.l2 = l2
        self.threshold = threshold

    def fit(self, X, Y):
        X = check_embedding(X)
        Y = np.asarray(Y).astype(bool)
        if Y.ndim == 1:
            Y = Y[:, None]
        if len(X) != len(Y):
            raise ValueError("X and Y differ in length")
        self.models_ = [_fit_or_constant(X, Y[:, c].astype(np.float64), self.l2)
                        for c in range(Y.shape[1])]
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        if not hasattr(self, "models_"):
            raise NotFittedError("call fit first")
        X = check_embedding(X)
        return np.column_stack([m.predict_proba(X) for m in self.models_])

    def predict(self, X):
        return self.predict_proba(X) >= self.threshold

    def predict_top_k(self, X, k):
        """Mark the ``k[i]`` highest-probability labels of row i as positive."""
        proba = self.predict_proba(X)
        order = np.argsort(-proba, axis=1, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(proba.shape[1])[None, :]
                          .repeat(len(proba), 0), axis=1)
        return ranks < np.asarray(k)[:, None]


class EdgeFeaturizer(TransformerMixin, BaseEstimator):
    """Turns ``(u, v)`` node pairs into edge features via a binary operator."""

    def __init__(self, embedding=None, operator="hadamard"):
        self.embedding = embedding
        self.operator = operator

    def fit(self, X=None, y=None):
        self.embedding_ = check_embedding(self.embedding)
        edge_embed(self.embedding_[:1], self.embedding_[:1], self.operator)
        return self

    def transform(self, X):
        check_is_fitted(self, "embedding_")
        pairs = check_pairs(X, len(self.embedding_))
        E = self.embedding_
        return edge_embed(E[pairs[:, 0]], E[pairs[:, 1]], self.operator)
