"""Downstream evaluation: multi-label node classification and link prediction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .graph import CsrGraph, LabelSet

logger = logging.getLogger(__name__)

EDGE_OPERATORS = ("average", "hadamard", "l1", "l2")


class DegenerateTrainingSet(ValueError):
    pass


# -- classifier -------------------------------------------------------------

@dataclass
class LogRegModel:
    """Binary logistic regression; ``weights[-1]`` is the (unpenalized) bias."""

    weights: np.ndarray
    l2_penalty: float = 1.0
    n_iter: int = 0
    grad_norm: float = 0.0

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.weights[:-1] + self.weights[-1]

    def predict_proba(self, X):
        return _expit(self.decision_function(X))


def _expit(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logreg_objective(w, Xb, y, l2):
    z = Xb @ w
    loss = np.logaddexp(0.0, z).sum() - y @ z + 0.5 * l2 * (w[:-1] @ w[:-1])
    p = _expit(z)
    grad = Xb.T @ (p - y)
    grad[:-1] += l2 * w[:-1]
    return loss, grad, p


def logreg_fit(features, labels, l2: float = 1.0, tol: float = 1e-6,
               max_iter: int = 1000) -> LogRegModel:
    """Minimize ``sum logloss + l2/2 * ||w||^2`` (bias excluded).

    Damped Newton steps with backtracking; stops at gradient norm ``tol`` or
    after ``max_iter`` iterations.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be (n, d) with one label per row")
    if not (y.max(initial=0) == 1 and y.min(initial=1) == 0):
        raise DegenerateTrainingSet("degenerate training set: need both classes")
    Xb = np.hstack([X, np.ones((len(X), 1))])
    d = Xb.shape[1]
    w = np.zeros(d)
    ridge = np.full(d, l2)
    ridge[-1] = 1e-10
    loss, grad, p = _logreg_objective(w, Xb, y, l2)
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = np.linalg.norm(grad)
        if gnorm < tol:
            it -= 1
            break
        s = p * (1.0 - p)
        H = (Xb * s[:, None]).T @ Xb + np.diag(ridge)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad / (np.abs(np.diag(H)).max() + 1.0)
        t = 1.0
        while True:
            w_new = w - t * step
            new_loss, new_grad, new_p = _logreg_objective(w_new, Xb, y, l2)
            if new_loss <= loss - 1e-4 * t * (grad @ step) or t < 1e-10:
                break
            t *= 0.5
        w, loss, grad, p = w_new, new_loss, new_grad, new_p
    return LogRegModel(w, l2, it, float(np.linalg.norm(grad)))


def _fit_or_constant(X, y, l2):
    """Fit, or fall back to a constant-probability model for one-class input."""
    if y.min() == y.max():
        w = np.zeros(X.shape[1] + 1)
        w[-1] = 50.0 if y[0] == 1 else -50.0
        return LogRegModel(w, l2)
    return logreg_fit(X, y, l2)


# -- metrics ----------------------------------------------------------------

def metrics_f1(tp, fp, fn):
    """Per-class F1 with 0/0 := 0, its unweighted mean, and pooled micro-F1."""
    tp, fp, fn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn))
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(denom), where=denom > 0)
    macro = float(per_class.mean()) if per_class.size else 0.0
    total = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / total) if total > 0 else 0.0
    return per_class, macro, micro


def metrics_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _counts(pred, truth):
    tp = np.count_nonzero(pred & truth, axis=0)
    fp = np.count_nonzero(pred & ~truth, axis=0)
    fn = np.count_nonzero(~pred & truth, axis=0)
    return tp, fp, fn


# -- reports ----------------------------------------------------------------

@dataclass
class EvalReport:
    protocol: str
    per_class_f1: np.ndarray = field(default_factory=lambda: np.empty(0))
    fold_macro_f1: list[float] = field(default_factory=list)
    fold_micro_f1: list[float] = field(default_factory=list)
    auc: dict[str, float] = field(default_factory=dict)
    skipped_classes: list[int] = field(default_factory=list)
    class_sizes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    config: dict = field(default_factory=dict)

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.fold_macro_f1)) if self.fold_macro_f1 else float("nan")

    @property
    def micro_f1(self) -> float:
        return float(np.mean(self.fold_micro_f1)) if self.fold_micro_f1 else float("nan")

    def records(self):
        """``(protocol, key, fold, metric, value)`` tuples, one per number."""
        out = []
        for i, v in enumerate(self.fold_macro_f1):
            out.append((self.protocol, "all", i, "macro_f1", v))
        for i, v in enumerate(self.fold_micro_f1):
            out.append((self.protocol, "all", i, "micro_f1", v))
        if self.fold_macro_f1:
            out.append((self.protocol, "all", "mean", "macro_f1", self.macro_f1))
            out.append((self.protocol, "all", "mean", "micro_f1", self.micro_f1))
        for c, v in enumerate(self.per_class_f1):
            if not math.isnan(v):
                out.append((self.protocol, f"class{c}", "pooled", "f1", float(v)))
        for op, v in self.auc.items():
            out.append((self.protocol, op, "test", "auc", v))
        return out

    def write(self, path) -> None:
        """Tab-separated key-value file, preceded by ``#``-comment config lines."""
        with open(path, "w", encoding="utf-8") as fh:
            for k, v in sorted(self.config.items()):
                fh.write(f"# {k}={v}\n")
            fh.write("protocol\tkey\tfold\tmetric\tvalue\n")
            for rec in self.records():
                fh.write("\t".join(str(x) for x in rec[:4]) + f"\t{rec[4]!r}\n")

    def summary(self) -> str:
        lines = [f"protocol: {self.protocol}"]
        for k, v in sorted(self.config.items()):
            lines.append(f"  {k}: {v}")
        if self.fold_macro_f1:
            lines.append(f"  macro-F1: {self.macro_f1:.4f}  "
                         f"(min {min(self.fold_macro_f1):.4f}, max {max(self.fold_macro_f1):.4f})")
            lines.append(f"  micro-F1: {self.micro_f1:.4f}")
        if self.skipped_classes:
            lines.append(f"  skipped classes: {self.skipped_classes}")
        for op, v in self.auc.items():
            lines.append(f"  AUC[{op}]: {v:.4f}")
        return "\n".join(lines)


def _prepare(emb, normalize):
    X = np.asarray(getattr(emb, "input_vecs", emb), dtype=np.float64)
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms > 0, norms, 1.0)
    return X


# -- multi-label protocols --------------------------------------------------

def stratified_folds(truth: np.ndarray, folds: int, rng) -> np.ndarray:
    """Fold index per row: shuffled positives dealt round-robin, then negatives."""
    out = np.empty(len(truth), dtype=np.int64)
    start = 0
    for part in (np.flatnonzero(truth), np.flatnonzero(~truth)):
        part = rng.permutation(part)
        out[part] = (start + np.arange(len(part))) % folds
        start = (start + len(part)) % folds
    return out


def multilabel_realistic(emb, labels: LabelSet, folds: int = 10, rng=None,
                         l2: float = 1.0, threshold: float = 0.5,
                         normalize: bool = False) -> EvalReport:
    """Per-class stratified k-fold CV; a label is predicted iff its probability >= 0.5."""
    rng = np.random.default_rng(rng)
    X = _prepare(emb, normalize)
    nodes = labels.labeled_nodes
    X, Y = X[nodes], labels.indicator[nodes]
    C = labels.num_classes
    sizes = Y.sum(axis=0)
    usable = [c for c in range(C) if sizes[c] >= folds]
    skipped = [c for c in range(C) if sizes[c] < folds]
    if not usable:
        raise ValueError("no class has enough positives for the requested folds")
    fold_counts = np.zeros((folds, 3, C), dtype=np.int64)
    for c in usable:
        truth = Y[:, c]
        assign = stratified_folds(truth, folds, rng)
        for f in range(folds):
            test = assign == f
            model = _fit_or_constant(X[~test], truth[~test].astype(np.float64), l2)
            pred = model.predict_proba(X[test]) >= threshold
            fold_counts[f, :, c] = [np.count_nonzero(pred & truth[test]),
                                    np.count_nonzero(pred & ~truth[test]),
                                    np.count_nonzero(~pred & truth[test])]
    per_class = np.full(C, np.nan)
    pooled = fold_counts.sum(axis=0)
    f1, _, _ = metrics_f1(*pooled[:, usable])
    per_class[usable] = f1
    fold_macro, fold_micro = [], []
    for f in range(folds):
        _, ma, mi = metrics_f1(*fold_counts[f][:, usable])
        fold_macro.append(ma)
        fold_micro.append(mi)
    return EvalReport("realistic", per_class, fold_macro, fold_micro,
                      skipped_classes=skipped, class_sizes=sizes,
                      config={"folds": folds, "l2": l2, "threshold": threshold,
                              "normalize": normalize})


def multilabel_former(emb, labels: LabelSet, train_fraction: float = 0.9,
                      repetitions: int = 10, rng=None, l2: float = 1.0,
                      normalize: bool = False) -> EvalReport:
    """Random (non-stratified) split; each test node gets its top-k_i labels.

    k_i is the node's true label count. A class missing from the training
    split yields an all-negative classifier and is noted in ``config``.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    X = _prepare(emb, normalize)
    nodes = labels.labeled_nodes
    X, Y = X[nodes], labels.indicator[nodes]
    n, C = Y.shape
    n_train = int(round(train_fraction * n))
    if not 0 < n_train < n:
        raise ValueError("split leaves an empty train or test set")
    fold_macro, fold_micro = [], []
    pooled = np.zeros((3, C), dtype=np.int64)
    absent = 0
    for _ in range(repetitions):
        perm = rng.permutation(n)
        tr, te = perm[:n_train], perm[n_train:]
        scores = np.zeros((len(te), C))
        for c in range(C):
            y = Y[tr, c]
            if not y.any():
                absent += 1
                scores[:, c] = -np.inf
                continue
            scores[:, c] = _fit_or_constant(X[tr], y.astype(np.float64), l2) \
                .decision_function(X[te])
        k = Y[te].sum(axis=1)
        # stable ordering: ties go to the lower class index
        order = np.argsort(-scores, axis=1, kind="stable")
        ranks = np.empty_like(order)
        np.put_along_axis(ranks, order, np.arange(C)[None, :].repeat(len(te), 0), axis=1)
        pred = ranks < k[:, None]
        counts = np.array(_counts(pred, Y[te]))
        pooled += counts
        _, ma, mi = metrics_f1(*counts)
        fold_macro.append(ma)
        fold_micro.append(mi)
    per_class, _, _ = metrics_f1(*pooled)
    return EvalReport("former", per_class, fold_macro, fold_micro,
                      class_sizes=Y.sum(axis=0),
                      config={"train_fraction": train_fraction,
                              "repetitions": repetitions, "l2": l2,
                              "normalize": normalize,
                              "absent_class_fits": absent})


# -- link prediction --------------------------------------------------------

def edge_embed(u_vec, v_vec, op: str = "hadamard") -> np.ndarray:
    """Combine endpoint vectors (rows are matched pairwise for 2-D input)."""
    u = np.asarray(u_vec, dtype=np.float64)
    v = np.asarray(v_vec, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if op == "average":
        return (u + v) / 2.0
    if op == "hadamard":
        return u * v
    if op == "l1":
        return np.abs(u - v)
    if op == "l2":
        return (u - v) ** 2
    raise ValueError(f"unknown edge operator {op!r}; choose from {EDGE_OPERATORS}")


def cosine_knn(X, k: int, nodes=None) -> np.ndarray:
    """The ``k`` most cosine-similar rows to each node, itself excluded.

    Ties are broken by the smaller row index.
    """
    X = np.asarray(X, dtype=np.float64)
    nodes = np.arange(len(X)) if nodes is None else np.asarray(nodes, dtype=np.int64)
    norms = np.linalg.norm(X, axis=1)
    Xn = X / np.where(norms > 0, norms, 1.0)[:, None]
    out = np.empty((len(nodes), k), dtype=np.int64)
    for lo in range(0, len(nodes), 512):
        q = nodes[lo:lo + 512]
        sim = Xn[q] @ Xn.T
        sim[np.arange(len(q)), q] = -np.inf
        kth = -np.partition(-sim, k - 1, axis=1)[:, k - 1]
        for i in range(len(q)):
            cand = np.flatnonzero(sim[i] >= kth[i])
            out[lo + i] = cand[np.argsort(-sim[i, cand], kind="stable")[:k]]
    return out


def jaccard_knn_scores(emb, pairs, k: int = 50) -> np.ndarray:
    """Jaccard overlap of cosine k-NN sets for each (u, v) pair.

    Both u and v are left out of both neighbor sets.
    """
    X = _prepare(emb, False)
    pairs = np.atleast_2d(np.asarray(pairs, dtype=np.int64))
    if not 0 < k < len(X) - 1:
        raise ValueError("k must satisfy 0 < k < |V| - 1")
    nodes, inverse = np.unique(pairs, return_inverse=True)
    knn = cosine_knn(X, k + 1, nodes)
    inverse = inverse.reshape(pairs.shape)
    scores = np.empty(len(pairs))
    for i, (u, v) in enumerate(pairs.tolist()):
        a = [x for x in knn[inverse[i, 0]].tolist() if x != v][:k]
        b = [x for x in knn[inverse[i, 1]].tolist() if x != u][:k]
        a, b = set(a), set(b)
        scores[i] = len(a & b) / len(a | b)
    return scores


def jaccard_knn_score(emb, u: int, v: int, k: int = 50) -> float:
    return float(jaccard_knn_scores(emb, [[u, v]], k)[0])


@dataclass
class LinkSplit:
    residual: CsrGraph
    train_pos: np.ndarray
    train_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray


def sample_non_edges(g: CsrGraph, count: int, rng, forbid=()) -> np.ndarray:
    """Uniform node pairs that are not edges of ``g`` (and not in ``forbid``)."""
    n = g.num_nodes
    existing = set((g.edges() @ np.array([n, 1])).tolist())
    taken = set()
    for a, b in forbid:
        taken.add(min(a, b) * n + max(a, b))
    out = []
    max_pairs = n * (n - 1) // 2 - len(existing) - len(taken)
    if count > max_pairs:
        raise ValueError("not enough non-edges to sample from")
    while len(out) < count:
        m = 2 * (count - len(out)) + 16
        a = rng.integers(0, n, m)
        b = rng.integers(0, n, m)
        for x, y in zip(a.tolist(), b.tolist()):
            if x == y:
                continue
            key = min(x, y) * n + max(x, y)
            if key in existing or key in taken:
                continue
            taken.add(key)
            out.append((min(x, y), max(x, y)))
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_edges(g: CsrGraph, holdout: float = 0.5, rng=None) -> LinkSplit:
    """Remove a fraction of edges without isolating any endpoint.

    The residual graph keeps ``ceil((1 - holdout) * |E|)`` edges. Negatives
    are non-edges of the original graph, train and test sets disjoint.
    """
    if not 0.0 < holdout < 1.0:
        raise ValueError("holdout must lie in (0, 1)")
    rng = np.random.default_rng(rng)
    edges = g.edges()
    m = len(edges)
    to_remove = m - math.ceil((1.0 - holdout) * m)
    deg = g.degrees.copy()
    removed = np.zeros(m, dtype=bool)
    count = 0
    for i in rng.permutation(m):
        if count == to_remove:
            break
        a, b = edges[i]
        if deg[a] > 1 and deg[b] > 1:
            deg[a] -= 1
            deg[b] -= 1
            removed[i] = True
            count += 1
    if count < to_remove:
        raise ValueError(f"holdout infeasible: removed {count} of {to_remove} edges "
                         "before every candidate would isolate a node")
    kept = edges[~removed]
    residual = CsrGraph.from_edges(kept[:, 0], kept[:, 1], g.num_nodes, g.external_ids)
    test_pos = edges[removed]
    train_neg = sample_non_edges(g, len(kept), rng)
    test_neg = sample_non_edges(g, len(test_pos), rng, forbid=train_neg)
    return LinkSplit(residual, kept, train_neg, test_pos, test_neg)


def linkpred_eval(g: CsrGraph, embed_fn, ops=EDGE_OPERATORS, holdout: float = 0.5,
                  rng=None, l2: float = 1.0, jaccard_k: int | None = 50) -> EvalReport:
    """Link-prediction AUC per edge operator (plus Jaccard-kNN if ``jaccard_k``).

    ``embed_fn(residual_graph)`` must return an ``(N, d)`` array or an
    :class:`~lasagne_graph.sgns.EmbeddingMatrix`.
    """
    rng = np.random.default_rng(rng)
    split = split_edges(g, holdout, rng)
    X = _prepare(embed_fn(split.residual), False)
    train = np.vstack([split.train_pos, split.train_neg])
    y_train = np.r_[np.ones(len(split.train_pos)), np.zeros(len(split.train_neg))]
    test = np.vstack([split.test_pos, split.test_neg])
    y_test = np.r_[np.ones(len(split.test_pos)), np.zeros(len(split.test_neg))]
    auc = {}
    for op in ops:
        feats = edge_embed(X[train[:, 0]], X[train[:, 1]], op)
        model = logreg_fit(feats, y_train, l2)
        scores = model.decision_function(edge_embed(X[test[:, 0]], X[test[:, 1]], op))
        auc[op] = metrics_auc(scores, y_test)
    if jaccard_k:
        auc["jaccard"] = metrics_auc(jaccard_knn_scores(X, test, jaccard_k), y_test)
    return EvalReport("linkpred", auc=auc,
                      config={"holdout": holdout, "l2": l2, "jaccard_k": jaccard_k,
                              "residual_edges": split.residual.num_edges,
                              "removal_constraint": "no endpoint isolated"})
