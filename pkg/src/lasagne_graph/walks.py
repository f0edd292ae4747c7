"""Uniform random walks and sliding-window contexts (DeepWalk-style baseline)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CsrGraph

PAD = -1


@dataclass(frozen=True)
class WalkConfig:
    walk_len: int = 80
    walks_per_node: int = 10
    window: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("walk_len", "walks_per_node", "window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def simulate_walks(g: CsrGraph, cfg: WalkConfig | None = None, starts=None) -> np.ndarray:
    """Walks as a ``(num_walks, walk_len)`` array padded with ``PAD``.

    Row ``i * walks_per_node + j`` is the j-th walk from ``starts[i]``
    (all nodes by default). A walk from an isolated node is that node alone.
    """
    cfg = cfg or WalkConfig()
    if g.num_nodes == 0:
        raise ValueError("empty graph")
    starts = np.arange(g.num_nodes) if starts is None else np.asarray(starts, np.int64)
    rng = np.random.default_rng(cfg.rng_seed)
    cur = np.repeat(starts, cfg.walks_per_node)
    walks = np.full((cur.size, cfg.walk_len), PAD, dtype=np.int64)
    walks[:, 0] = cur
    deg = g.degrees
    alive = deg[cur] > 0
    for t in range(1, cfg.walk_len):
        u = rng.random(cur.size)
        d = deg[cur]
        pick = g.offsets[cur] + np.minimum((u * d).astype(np.int64), np.maximum(d - 1, 0))
        cur = np.where(alive, g.neighbors[np.minimum(pick, len(g.neighbors) - 1)], cur)
        walks[:, t] = np.where(alive, cur, PAD)
    return walks


def walk_lengths(walks: np.ndarray) -> np.ndarray:
    return (walks != PAD).sum(axis=1)


def window_contexts(walks, window: int, rng=None, chunk: int = 4096):
    """Yield ``(centers, contexts)`` arrays, one chunk of walks at a time.

    Each position draws its own extension from ``1..window`` for each side;
    windows are clipped at the walk ends.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    rng = np.random.default_rng(rng)
    walks = np.atleast_2d(np.asarray(walks, dtype=np.int64))
    for lo in range(0, len(walks), chunk):
        block = walks[lo:lo + chunk]
        valid = block != PAD
        left = rng.integers(1, window + 1, size=block.shape)
        right = rng.integers(1, window + 1, size=block.shape)
        centers, contexts = [], []
        width = block.shape[1]
        for off in range(1, min(window, width - 1) + 1):
            # context off positions to the right of the center
            c = block[:, :-off]
            x = block[:, off:]
            ok = valid[:, :-off] & valid[:, off:] & (right[:, :-off] >= off)
            centers.append(c[ok])
            contexts.append(x[ok])
            # and to the left
            c = block[:, off:]
            x = block[:, :-off]
            ok = valid[:, off:] & valid[:, :-off] & (left[:, off:] >= off)
            centers.append(c[ok])
            contexts.append(x[ok])
        if centers:
            yield np.concatenate(centers), np.concatenate(contexts)
        else:
            yield np.empty(0, np.int64), np.empty(0, np.int64)


def pairs_per_walk(walks, window: int, rng=None) -> np.ndarray:
    """Number of (center, context) pairs each walk contributes."""
    rng = np.random.default_rng(rng)
    walks = np.atleast_2d(np.asarray(walks, dtype=np.int64))
    n = walk_lengths(walks)
    pos = np.arange(walks.shape[1])
    left = rng.integers(1, window + 1, size=walks.shape)
    right = rng.integers(1, window + 1, size=walks.shape)
    room_left = np.broadcast_to(pos, walks.shape)
    room_right = n[:, None] - 1 - pos
    valid = walks != PAD
    per_pos = np.minimum(left, room_left) + np.minimum(right, np.maximum(room_right, 0))
    return np.where(valid, per_pos, 0).sum(axis=1)


def pairs_per_center(walks, window: int, num_nodes: int, rng=None) -> np.ndarray:
    """Training-pair count for every node as the center of a window."""
    counts = np.zeros(num_nodes, dtype=np.int64)
    for centers, _ in window_contexts(walks, window, rng):
        counts += np.bincount(centers, minlength=num_nodes)
    return counts


def save_walks(path, walks, external_ids=None) -> None:
    """One walk per line, space-separated (external IDs if given)."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in np.atleast_2d(walks):
            row = row[row != PAD]
            toks = (external_ids[i] for i in row) if external_ids else map(str, row)
            fh.write(" ".join(toks) + "\n")
