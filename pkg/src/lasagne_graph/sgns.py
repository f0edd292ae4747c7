"""Skip-gram with negative sampling over (seed, APPR-neighbor) pairs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .alias import AliasTable, PackedAliasTables, build_alias

logger = logging.getLogger(__name__)


class NumericalError(FloatingPointError):
    """Training produced NaN or Inf values."""


@dataclass(frozen=True)
class TrainConfig:
    d: int = 128
    alpha: float = 0.2
    delta: float = 1e-4
    negatives_k: int = 5
    batch_size: int | None = None      # default 10 * |V|
    max_batches: int | None = None     # default: training_budget // batch_size
    lr_initial: float = 0.025
    lr_final: float = 1e-4
    noise_exponent: float = 0.75
    noise: str = "degree"              # or "uniform"
    rng_seed: int = 0
    walk_len: int = 80
    walks_per_node: int = 10
    window: int = 10
    n_workers: int = 1
    stop_on_plateau: bool = False

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.negatives_k < 1:
            raise ValueError("negatives_k must be >= 1")
        if not self.lr_initial >= self.lr_final > 0:
            raise ValueError("need lr_initial >= lr_final > 0")
        if self.noise not in ("degree", "uniform"):
            raise ValueError(f"unknown noise distribution {self.noise!r}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_batches is not None and self.max_batches < 0:
            raise ValueError("max_batches must be >= 0")


@dataclass(eq=False)
class EmbeddingMatrix:
    input_vecs: np.ndarray
    context_vecs: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.input_vecs.shape[1]

    @property
    def num_nodes(self) -> int:
        return self.input_vecs.shape[0]

    @classmethod
    def initialize(cls, num_nodes, d, rng):
        rng = np.random.default_rng(rng)
        inp = (rng.random((num_nodes, d)) - 0.5) / d
        return cls(inp, np.zeros((num_nodes, d)))

    def copy(self):
        return EmbeddingMatrix(self.input_vecs.copy(), self.context_vecs.copy(),
                               list(self.loss_history))


@dataclass(frozen=True, eq=False)
class TrainingBatch:
    seeds: np.ndarray
    neighbors: np.ndarray

    def __len__(self):
        return len(self.seeds)

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.seeds, self.neighbors])


def expected_uniform(lo: float, hi: float) -> float:
    return (lo + hi) / 2.0


def training_budget(num_nodes: int, walk_len: int = 80, walks_per_node: int = 10,
                    window: int = 10) -> float:
    """Training-pair count matching what uniform-walk methods would generate.

    ``|V| * (walk_len * walks_per_node * 2 * E[U(1, w)] - 2 * sum_i E[U(1, i)])``
    """
    for name, x in (("num_nodes", num_nodes), ("walk_len", walk_len),
                    ("walks_per_node", walks_per_node), ("window", window)):
        if x < 1:
            raise ValueError(f"{name} must be >= 1")
    per_node = (walk_len * walks_per_node * 2 * expected_uniform(1, window)
                - 2 * sum(expected_uniform(1, i) for i in range(1, window + 1)))
    return num_nodes * per_node


def generate_batch(samplers, batch_size: int, rng) -> TrainingBatch:
    """``batch_size // len(samplers)`` pairs per sampler, then shuffled."""
    packed = samplers if isinstance(samplers, PackedAliasTables) else None
    if packed is None:
        samplers = list(samplers)
        if not samplers:
            raise ValueError("no samplers given")
        packed = PackedAliasTables(samplers)
    if batch_size < len(packed):
        raise ValueError(f"batch_size {batch_size} smaller than {len(packed)} samplers")
    rng = np.random.default_rng(rng)
    seeds, nbrs = packed.draw(batch_size // len(packed), rng)
    order = rng.permutation(len(seeds))
    return TrainingBatch(seeds[order], nbrs[order])


@numba.njit(cache=True, nogil=True, inline="always")
def _log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@numba.njit(cache=True, nogil=True, inline="always")
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


@numba.njit(cache=True, nogil=True, inline="always")
def _pair_update(W, C, s, c, negs, lr, grad, coef):
    d = W.shape[1]
    k = len(negs)
    # all scores from the pre-update vectors, so the step is the exact gradient
    f = 0.0
    for t in range(d):
        f += W[s, t] * C[c, t]
    loss = -_log_sigmoid(f)
    g_pos = 1.0 - _sigmoid(f)
    for j in range(k):
        n = negs[j]
        f = 0.0
        for t in range(d):
            f += W[s, t] * C[n, t]
        loss -= _log_sigmoid(-f)
        coef[j] = -_sigmoid(f)
    for t in range(d):
        grad[t] = g_pos * C[c, t]
    for j in range(k):
        n = negs[j]
        for t in range(d):
            grad[t] += coef[j] * C[n, t]
    for t in range(d):
        C[c, t] += lr * g_pos * W[s, t]
    for j in range(k):
        n = negs[j]
        for t in range(d):
            C[n, t] += lr * coef[j] * W[s, t]
    for t in range(d):
        W[s, t] += lr * grad[t]
    return loss


@numba.njit(cache=True, nogil=True)
def _sgns_batch(W, C, seeds, ctx, negs, lr0, lr1, done, total):
    grad = np.empty(W.shape[1])
    coef = np.empty(negs.shape[1])
    loss = 0.0
    span = max(total, 1)
    for i in range(len(seeds)):
        lr = lr0 - (lr0 - lr1) * min((done + i) / span, 1.0)
        loss += _pair_update(W, C, seeds[i], ctx[i], negs[i], lr, grad, coef)
    return loss


@numba.njit(cache=True, parallel=True)
def _sgns_batch_hogwild(W, C, seeds, ctx, negs, lr0, lr1, done, total, n_chunks):
    # lock-free: workers race on shared rows and may lose updates
    n = len(seeds)
    span = max(total, 1)
    losses = np.zeros(n_chunks)
    for ch in numba.prange(n_chunks):
        grad = np.empty(W.shape[1])
        coef = np.empty(negs.shape[1])
        lo = ch * n // n_chunks
        hi = (ch + 1) * n // n_chunks
        for i in range(lo, hi):
            lr = lr0 - (lr0 - lr1) * min((done + i) / span, 1.0)
            losses[ch] += _pair_update(W, C, seeds[i], ctx[i], negs[i], lr, grad, coef)
    return losses.sum()


def pair_objective(inp, ctx_pos, ctx_negs) -> float:
    """Per-pair objective ``log s(u.c) + sum_j log s(-u.n_j)`` (to be maximized)."""
    inp = np.asarray(inp, dtype=np.float64)
    x = np.concatenate([[inp @ np.asarray(ctx_pos)],
                        -(np.asarray(ctx_negs, dtype=np.float64).reshape(-1, inp.size) @ inp)])
    return float(-np.logaddexp(0.0, -x).sum())


def sgns_step(emb: EmbeddingMatrix, pair, negatives, lr: float):
    """One ascent step on a single (seed, neighbor) pair, in place.

    Returns ``(emb, loss)`` with loss being the negated pair objective
    before the update.
    """
    if lr <= 0:
        raise ValueError("lr must be positive")
    s, c = int(pair[0]), int(pair[1])
    negs = np.asarray(negatives, dtype=np.int64).reshape(1, -1)
    n = emb.num_nodes
    if not (0 <= s < n and 0 <= c < n and np.all((negs >= 0) & (negs < n))):
        raise IndexError("node id out of range")
    loss = _sgns_batch(emb.input_vecs, emb.context_vecs, np.array([s]), np.array([c]),
                       negs, lr, lr, 0, 1)
    _check_finite(emb, loss)
    return emb, float(loss)


def _check_finite(emb, loss):
    if not np.isfinite(loss) or not (np.isfinite(emb.input_vecs).all()
                                     and np.isfinite(emb.context_vecs).all()):
        raise NumericalError("non-finite value in embeddings; lower the learning rate")


def noise_table(degrees, cfg: TrainConfig) -> AliasTable:
    degrees = np.asarray(degrees, dtype=np.float64)
    if cfg.noise == "uniform":
        weights = (degrees > 0).astype(np.float64)
    else:
        weights = degrees ** cfg.noise_exponent
    return build_alias({i: w for i, w in enumerate(weights)})


def draw_negatives(noise: AliasTable, positives, k: int, rng) -> np.ndarray:
    """``k`` noise nodes per positive; a clash with the positive is redrawn once."""
    m = len(positives)
    col = rng.integers(0, noise.size, size=(m, k))
    take = rng.random((m, k)) < noise.prob[col]
    negs = noise.support[np.where(take, col, noise.alias[col])]
    clash = negs == np.asarray(positives)[:, None]
    if clash.any():
        redo = int(clash.sum())
        col = rng.integers(0, noise.size, size=redo)
        take = rng.random(redo) < noise.prob[col]
        negs[clash] = noise.support[np.where(take, col, noise.alias[col])]
    return negs


def batch_loss(emb: EmbeddingMatrix, batch: TrainingBatch, negs) -> float:
    """Mean negated objective of ``batch`` without modifying ``emb``."""
    W, C = emb.input_vecs, emb.context_vecs
    pos = np.einsum("ij,ij->i", W[batch.seeds], C[batch.neighbors])
    neg = np.einsum("ij,ikj->ik", W[batch.seeds], C[negs])
    total = np.logaddexp(0.0, -pos).sum() + np.logaddexp(0.0, neg).sum()
    return float(total / len(batch))


def resolve_schedule(num_nodes: int, num_samplers: int, cfg: TrainConfig):
    """Effective ``(batch_size, max_batches)`` after applying the defaults."""
    batch_size = cfg.batch_size or 10 * num_nodes
    batch_size = max(batch_size, num_samplers)
    if cfg.max_batches is None:
        budget = training_budget(num_nodes, cfg.walk_len, cfg.walks_per_node, cfg.window)
        max_batches = int(budget // batch_size)
    else:
        max_batches = cfg.max_batches
    return batch_size, max_batches


class _Plateau:
    def __init__(self, window=50, tol=1e-4):
        self.window, self.tol = window, tol
        self.values = []

    def update(self, loss):
        self.values.append(loss)
        w = self.window
        if len(self.values) < 2 * w:
            return False
        prev = np.mean(self.values[-2 * w:-w])
        cur = np.mean(self.values[-w:])
        return abs(prev - cur) / max(abs(prev), 1e-12) < self.tol


def train(num_nodes_or_graph, apprs, cfg: TrainConfig | None = None,
          degrees=None, callback=None) -> EmbeddingMatrix:
    """Learn embeddings from APPR neighborhoods.

    The first argument is a :class:`~lasagne_graph.graph.CsrGraph` (its
    degrees feed the noise distribution) or a node count together with
    ``degrees``. ``callback(batch_number, mean_loss)`` is invoked after
    every batch.
    """
    cfg = cfg or TrainConfig()
    if hasattr(num_nodes_or_graph, "degrees"):
        num_nodes = num_nodes_or_graph.num_nodes
        degrees = num_nodes_or_graph.degrees
    else:
        num_nodes = int(num_nodes_or_graph)
        if degrees is None:
            raise ValueError("degrees required when passing a node count")
    vectors = list(apprs)
    if not vectors:
        raise ValueError("empty APPR list")
    tables = [build_alias(v) for v in vectors]
    packed = PackedAliasTables(tables)
    noise = noise_table(degrees, cfg)
    batch_size, max_batches = resolve_schedule(num_nodes, len(packed), cfg)
    per_batch = (batch_size // len(packed)) * len(packed)
    total = per_batch * max_batches

    rng = np.random.default_rng(cfg.rng_seed)
    emb = EmbeddingMatrix.initialize(num_nodes, cfg.d, rng)
    plateau = _Plateau() if cfg.stop_on_plateau else None
    logger.info("training %d batches of %d pairs (d=%d, k=%d)",
                max_batches, per_batch, cfg.d, cfg.negatives_k)
    done = 0
    for b in range(max_batches):
        batch = generate_batch(packed, batch_size, rng)
        negs = draw_negatives(noise, batch.neighbors, cfg.negatives_k, rng)
        if cfg.n_workers > 1:
            loss = _sgns_batch_hogwild(emb.input_vecs, emb.context_vecs, batch.seeds,
                                       batch.neighbors, negs, cfg.lr_initial,
                                       cfg.lr_final, done, total, cfg.n_workers)
        else:
            loss = _sgns_batch(emb.input_vecs, emb.context_vecs, batch.seeds,
                               batch.neighbors, negs, cfg.lr_initial, cfg.lr_final,
                               done, total)
        done += len(batch)
        _check_finite(emb, loss)
        mean = loss / len(batch)
        emb.loss_history.append(float(mean))
        if callback is not None:
            callback(b, mean)
        if plateau is not None and plateau.update(mean):
            logger.info("loss plateau after %d batches", b + 1)
            break
    return emb


def save_embeddings(path, vectors: np.ndarray, external_ids, binary: bool = False) -> None:
    """Word-vector text layout: ``N d`` header, then ``id v1 ... vd`` per node."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if binary:
        with open(path, "wb") as fh:
            np.savez(fh, vectors=vectors, ids=np.array(external_ids, dtype=str))
        return
    n, d = vectors.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for ident, row in zip(external_ids, vectors):
            fh.write(ident + " " + " ".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(path, "rb") as fh:
        head = fh.read(6)
    if head.startswith(b"PK"):
        with np.load(path) as data:
            return [str(x) for x in data["ids"]], data["vectors"]
    with open(path, encoding="utf-8") as fh:
        n, d = (int(x) for x in fh.readline().split())
        ids, rows = [], []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != d + 1:
                raise ValueError(f"{path}: expected {d} values for node {parts[0]}")
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(ids) != n:
        raise ValueError(f"{path}: header announces {n} nodes, found {len(ids)}")
    return ids, np.array(rows, dtype=np.float64).reshape(n, d)


__all__ = [
    "EmbeddingMatrix", "NumericalError", "TrainConfig", "TrainingBatch",
    "batch_loss", "draw_negatives", "generate_batch", "noise_table",
    "pair_objective", "resolve_schedule", "save_embeddings",
    "load_embeddings", "sgns_step", "train", "training_budget",
]
