"""Walker/Vose alias tables for O(1) sampling from APPR neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


@numba.njit(cache=True)
def _vose(weights):
    k = len(weights)
    scaled = weights * (k / weights.sum())
    prob = np.zeros(k)
    alias = np.arange(k)
    small = np.empty(k, dtype=np.int64)
    large = np.empty(k, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(k):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        l = large[nl - 1]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            nl -= 1
            small[ns] = l
            ns += 1
    # leftovers are full columns up to rounding
    for i in range(nl):
        prob[large[i]] = 1.0
    for i in range(ns):
        prob[small[i]] = 1.0
    return prob, alias


@dataclass(frozen=True, eq=False)
class AliasTable:
    """Sampler over ``support`` with column acceptance ``prob`` and ``alias`` index."""

    seed: int
    support: np.ndarray
    prob: np.ndarray
    alias: np.ndarray

    @property
    def size(self) -> int:
        return len(self.support)

    def distribution(self) -> np.ndarray:
        """Exact probability of each support entry implied by the table."""
        k = self.size
        out = self.prob / k
        np.add.at(out, self.alias, (1.0 - self.prob) / k)
        return out


def build_alias(v) -> AliasTable:
    """Alias table over an :class:`~lasagne_graph.appr.ApprVector`.

    Masses are normalized here, so truncated vectors need not sum to one.
    Also accepts a ``{node: weight}`` mapping, seed -1.
    """
    if isinstance(v, dict):
        seed, nodes = -1, np.fromiter(v.keys(), dtype=np.int64, count=len(v))
        weights = np.fromiter(v.values(), dtype=np.float64, count=len(v))
    else:
        seed, nodes, weights = v.seed, v.nodes, v.mass
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0 or not np.all(weights >= 0) or weights.sum() <= 0:
        raise ValueError("alias table needs at least one positive weight")
    prob, alias = _vose(weights)
    return AliasTable(int(seed), np.asarray(nodes, dtype=np.int64), prob, alias)


def sample(t: AliasTable, n: int, rng) -> np.ndarray:
    """``n`` independent draws (with replacement) from ``t``."""
    rng = np.random.default_rng(rng)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    col = rng.integers(0, t.size, size=n)
    take = rng.random(n) < t.prob[col]
    return t.support[np.where(take, col, t.alias[col])]


def seed_stream(global_seed: int, node: int) -> np.random.Generator:
    """Independent generator for one seed node, stable under any scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(global_seed), int(node)]))


class PackedAliasTables:
    """Many alias tables in flat arrays so one call can sample from all of them."""

    def __init__(self, tables):
        tables = list(tables)
        if not tables:
            raise ValueError("no samplers given")
        self.seeds = np.array([t.seed for t in tables], dtype=np.int64)
        self.sizes = np.array([t.size for t in tables], dtype=np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)
        self.support = np.concatenate([t.support for t in tables])
        self.prob = np.concatenate([t.prob for t in tables])
        self.alias = np.concatenate([t.alias for t in tables])

    def __len__(self):
        return len(self.seeds)

    def draw(self, per_table: int, rng: np.random.Generator):
        """``per_table`` draws from every table: returns (seed array, neighbor array)."""
        which = np.repeat(np.arange(len(self.seeds)), per_table)
        col = (rng.random(which.size) * self.sizes[which]).astype(np.int64)
        # guard against rounding up to size
        np.minimum(col, self.sizes[which] - 1, out=col)
        flat = self.starts[which] + col
        take = rng.random(which.size) < self.prob[flat]
        picked = np.where(take, flat, self.starts[which] + self.alias[flat])
        return self.seeds[which], self.support[picked]
