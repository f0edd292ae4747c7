"""Undirected graphs in compressed adjacency form, plus structural primitives.

Everything downstream (APPR, walks, diagnostics) reads the graph through
:class:`CsrGraph`, which is immutable once built and safe to share between
threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

logger = logging.getLogger(__name__)

UNREACHABLE = -1


class GraphFormatError(ValueError):
    """Raised for unreadable or malformed graph / label files."""


@dataclass(frozen=True)
class LoadReport:
    num_lines: int = 0
    self_loops: int = 0
    duplicates: int = 0


@dataclass(frozen=True, eq=False)
class CsrGraph:
    """Immutable undirected simple graph.

    ``neighbors[offsets[u]:offsets[u + 1]]`` holds the sorted neighbor IDs of
    internal node ``u``; ``external_ids[u]`` is its label in the input file.
    """

    offsets: np.ndarray
    neighbors: np.ndarray
    external_ids: tuple[str, ...]
    load_report: LoadReport = field(default_factory=LoadReport, compare=False)

    def __post_init__(self):
        for arr in (self.offsets, self.neighbors):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return len(self.offsets) - 1

    @property
    def num_edges(self) -> int:
        return len(self.neighbors) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def degree(self, u: int) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def neighbors_of(self, u: int) -> np.ndarray:
        return self.neighbors[self.offsets[u]:self.offsets[u + 1]]

    def index_of(self, label: str) -> int:
        try:
            return self._id_map()[str(label)]
        except KeyError:
            raise KeyError(f"unknown node {label!r}") from None

    def _id_map(self) -> dict[str, int]:
        cache = self.__dict__.get("_ids")
        if cache is None:
            cache = {x: i for i, x in enumerate(self.external_ids)}
            object.__setattr__(self, "_ids", cache)
        return cache

    def edges(self) -> np.ndarray:
        """Each undirected edge once, as an ``(m, 2)`` array with ``u < v``."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees)
        mask = src < self.neighbors
        return np.column_stack([src[mask], self.neighbors[mask]])

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(len(self.neighbors), dtype=np.float64)
        n = self.num_nodes
        return sp.csr_matrix((data, self.neighbors, self.offsets), shape=(n, n))

    def check_node(self, u) -> int:
        if not (0 <= int(u) < self.num_nodes):
            raise IndexError(f"node id {u} out of range [0, {self.num_nodes})")
        return int(u)

    @classmethod
    def from_edges(cls, src, dst, num_nodes=None, external_ids=None,
                   directed_input=False):
        """Build from parallel endpoint arrays; drops loops and duplicates."""
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("endpoint arrays differ in length")
        if num_nodes is None:
            num_nodes = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1)
        if external_ids is None:
            external_ids = tuple(str(i) for i in range(num_nodes))
        if len(external_ids) != num_nodes:
            raise ValueError("external_ids length must equal num_nodes")
        if len(src) and (min(src.min(), dst.min()) < 0
                         or max(src.max(), dst.max()) >= num_nodes):
            raise ValueError("edge endpoint out of range")

        loops = src == dst
        n_loops = int(loops.sum())
        src, dst = src[~loops], dst[~loops]
        if directed_input:
            # only exact repeats of an arc are duplicates; reciprocal arcs
            # are the expected directed encoding of one undirected edge
            arc_keys = src * num_nodes + dst
            n_dup = len(arc_keys) - len(np.unique(arc_keys))
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        keys = np.unique(lo * num_nodes + hi)
        if not directed_input:
            n_dup = len(lo) - len(keys)
        lo, hi = keys // num_nodes, keys % num_nodes

        rows = np.concatenate([lo, hi])
        cols = np.concatenate([hi, lo])
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
        report = LoadReport(num_lines=len(loops), self_loops=n_loops,
                            duplicates=int(n_dup))
        return cls(offsets, cols.astype(np.int64), tuple(external_ids), report)

    @classmethod
    def from_scipy(cls, adj, external_ids=None):
        coo = sp.coo_matrix(adj)
        if coo.shape[0] != coo.shape[1]:
            raise ValueError("adjacency matrix must be square")
        keep = coo.data != 0
        return cls.from_edges(coo.row[keep], coo.col[keep], coo.shape[0],
                              external_ids)

    def subgraph(self, nodes) -> "CsrGraph":
        """Induced subgraph on ``nodes`` (sorted), keeping external IDs."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = np.full(self.num_nodes, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        e = self.edges()
        e = remap[e]
        e = e[(e >= 0).all(axis=1)]
        ids = tuple(self.external_ids[i] for i in nodes)
        return CsrGraph.from_edges(e[:, 0], e[:, 1], len(nodes), ids)


@dataclass(frozen=True, eq=False)
class LabelSet:
    """Multi-label assignment; ``indicator[u, c]`` is True if u has class c."""

    indicator: np.ndarray
    class_names: tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def labels_per_node(self) -> list[frozenset[int]]:
        return [frozenset(np.flatnonzero(row).tolist()) for row in self.indicator]

    @property
    def labeled_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.indicator.any(axis=1))

    @property
    def class_sizes(self) -> np.ndarray:
        return self.indicator.sum(axis=0)

    @classmethod
    def from_lists(cls, labels_per_node, num_classes=None, class_names=None):
        if num_classes is None:
            num_classes = 1 + max((max(s) for s in labels_per_node if s), default=-1)
        ind = np.zeros((len(labels_per_node), num_classes), dtype=bool)
        for u, cs in enumerate(labels_per_node):
            for c in cs:
                if not 0 <= c < num_classes:
                    raise ValueError(f"class id {c} out of range")
                ind[u, c] = True
        if class_names is None:
            class_names = tuple(str(c) for c in range(num_classes))
        return cls(ind, tuple(class_names))


def _sort_tokens(tokens):
    try:
        return sorted(tokens, key=int)
    except ValueError:
        return list(tokens)


def _read_pairs(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise GraphFormatError(f"cannot read {path}: {exc}") from exc
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(
                f"{path}:{lineno}: expected two tokens, got {len(parts)}")
        pairs.append(parts)
    return pairs


def load_edge_list(path, directed_input: bool = False,
                   largest_component: bool = False) -> CsrGraph:
    """Read a whitespace-separated edge list into a symmetric :class:`CsrGraph`.

    Node tokens are remapped to ``0..N-1`` (numerically sorted if every token
    is an integer, first-appearance order otherwise). Self-loops and repeated
    edges are dropped and counted in ``graph.load_report``.
    """
    pairs = _read_pairs(path)
    if not pairs:
        raise GraphFormatError(f"{path}: empty graph")
    seen = dict.fromkeys(tok for pair in pairs for tok in pair)
    ids = _sort_tokens(seen)
    index = {tok: i for i, tok in enumerate(ids)}
    arr = np.array([[index[a], index[b]] for a, b in pairs], dtype=np.int64)
    g = CsrGraph.from_edges(arr[:, 0], arr[:, 1], len(ids), tuple(ids),
                            directed_input=directed_input)
    rep = g.load_report
    if rep.self_loops or rep.duplicates:
        logger.warning("%s: dropped %d self-loops and %d duplicate edges",
                       path, rep.self_loops, rep.duplicates)
    if g.num_edges == 0:
        raise GraphFormatError(f"{path}: empty graph")
    if largest_component:
        g = largest_connected_component(g)
    return g


def load_labels(path, graph) -> LabelSet:
    """Read ``node label`` lines; a node with several labels repeats its line.

    ``graph`` is a :class:`CsrGraph` or the sequence of external node IDs the
    rows should follow (e.g. from an embedding file).
    """
    pairs = _read_pairs(path)
    class_names = _sort_tokens(dict.fromkeys(lab for _, lab in pairs))
    cindex = {c: i for i, c in enumerate(class_names)}
    if isinstance(graph, CsrGraph):
        ids = graph._id_map()
    else:
        ids = {str(x): i for i, x in enumerate(graph)}
    ind = np.zeros((len(ids), len(class_names)), dtype=bool)
    missing = 0
    for node, lab in pairs:
        u = ids.get(node)
        if u is None:
            missing += 1
            continue
        ind[u, cindex[lab]] = True
    if missing:
        logger.warning("%s: %d label lines refer to nodes absent from the graph",
                       path, missing)
    return LabelSet(ind, tuple(class_names))


def largest_connected_component(g: CsrGraph) -> CsrGraph:
    _, comp = csgraph.connected_components(g.to_scipy(), directed=False)
    biggest = np.argmax(np.bincount(comp))
    return g.subgraph(np.flatnonzero(comp == biggest))


def connected_components(g: CsrGraph) -> np.ndarray:
    return csgraph.connected_components(g.to_scipy(), directed=False)[1]


@numba.njit(cache=True)
def _core_numbers(offsets, neighbors):
    # Batagelj & Zaversnik bucket peeling, O(|E|)
    n = len(offsets) - 1
    deg = np.empty(n, dtype=np.int64)
    maxdeg = 0
    for u in range(n):
        deg[u] = offsets[u + 1] - offsets[u]
        if deg[u] > maxdeg:
            maxdeg = deg[u]
    bin_start = np.zeros(maxdeg + 2, dtype=np.int64)
    for u in range(n):
        bin_start[deg[u] + 1] += 1
    for d in range(1, maxdeg + 2):
        bin_start[d] += bin_start[d - 1]
    pos = np.empty(n, dtype=np.int64)
    order = np.empty(n, dtype=np.int64)
    fill = bin_start.copy()
    for u in range(n):
        pos[u] = fill[deg[u]]
        order[pos[u]] = u
        fill[deg[u]] += 1
    for i in range(n):
        u = order[i]
        for j in range(offsets[u], offsets[u + 1]):
            v = neighbors[j]
            if deg[v] > deg[u]:
                dv = deg[v]
                pw = bin_start[dv]
                w = order[pw]
                if w != v:
                    order[pos[v]] = w
                    pos[w] = pos[v]
                    order[pw] = v
                    pos[v] = pw
                bin_start[dv] += 1
                deg[v] -= 1
    return deg


def k_core_decomposition(g: CsrGraph) -> np.ndarray:
    """Core number of every node by minimum-degree peeling."""
    return _core_numbers(g.offsets, g.neighbors)


def conductance(g: CsrGraph, cluster) -> tuple[float, float]:
    """Return ``(standard, out_to_internal)`` conductance of ``cluster``.

    ``standard`` is cut / min(vol(S), vol(V \\ S)); the second score divides
    the cut by the number of edges inside S and is ``inf`` when there are none.
    """
    mask = np.zeros(g.num_nodes, dtype=bool)
    idx = np.asarray(list(cluster), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cluster is empty")
    mask[idx] = True
    if mask.all():
        raise ValueError("cluster covers the whole graph")
    src = np.repeat(np.arange(g.num_nodes), g.degrees)
    inside_src = mask[src]
    inside_dst = mask[g.neighbors]
    cut = int(np.count_nonzero(inside_src & ~inside_dst))
    internal = int(np.count_nonzero(inside_src & inside_dst)) // 2
    vol_s = int(g.degrees[mask].sum())
    vol_rest = int(g.degrees[~mask].sum())
    denom = min(vol_s, vol_rest)
    standard = cut / denom if denom > 0 else 0.0
    if internal > 0:
        ratio = cut / internal
    else:
        ratio = 0.0 if cut == 0 else float("inf")
    return standard, ratio


def hop_distances(g: CsrGraph, seed: int) -> np.ndarray:
    """Unweighted distances from ``seed`` to every node (``UNREACHABLE`` if none)."""
    seed = g.check_node(seed)
    dist = csgraph.shortest_path(g.to_scipy(), directed=False, unweighted=True,
                                 indices=seed)
    out = np.full(g.num_nodes, UNREACHABLE, dtype=np.int64)
    finite = np.isfinite(dist)
    out[finite] = dist[finite].astype(np.int64)
    return out


def bfs_hops(g: CsrGraph, seed: int, targets) -> dict[int, int]:
    """Hop distance from ``seed`` to each target; unreachable ones map to ``UNREACHABLE``."""
    dist = hop_distances(g, seed)
    return {int(t): int(dist[g.check_node(t)]) for t in targets}
