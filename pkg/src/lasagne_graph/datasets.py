"""Bundled toy data and synthetic generators."""

from importlib import resources

import numpy as np

from .graph import CsrGraph, LabelSet, load_edge_list, load_labels


def _data_path(name):
    return resources.files("lasagne_graph") / "data" / name


def karate_graph() -> CsrGraph:
    """Zachary's karate club (34 nodes, 78 edges)."""
    with resources.as_file(_data_path("karate.edgelist")) as p:
        return load_edge_list(p)


def karate_labels(g: CsrGraph | None = None) -> LabelSet:
    """Faction membership after the club split (two classes)."""
    g = g or karate_graph()
    with resources.as_file(_data_path("karate.labels")) as p:
        return load_labels(p, g)


def preferential_attachment(n: int, m: int = 3, rng=0) -> CsrGraph:
    """Barabasi-Albert graph: each new node links to ``m`` degree-weighted targets."""
    rng = np.random.default_rng(rng)
    if not 1 <= m < n:
        raise ValueError("need 1 <= m < n")
    src, dst = [], []
    # endpoint list doubles as the degree-proportional sampling pool
    pool = list(range(m))
    for new in range(m, n):
        targets = set()
        while len(targets) < m:
            targets.add(pool[rng.integers(len(pool))] if new > m else len(targets))
        for t in targets:
            src.append(new)
            dst.append(t)
            pool.extend((new, t))
    return CsrGraph.from_edges(src, dst, n)


def disjoint_cliques(sizes) -> tuple[CsrGraph, np.ndarray]:
    """Union of complete graphs; returns the graph and each node's clique index."""
    src, dst, member = [], [], []
    start = 0
    for c, s in enumerate(sizes):
        for i in range(start, start + s):
            member.append(c)
            for j in range(i + 1, start + s):
                src.append(i)
                dst.append(j)
        start += s
    return CsrGraph.from_edges(src, dst, start), np.array(member)


def erdos_renyi(n: int, p: float, rng=0) -> CsrGraph:
    rng = np.random.default_rng(rng)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return CsrGraph.from_edges(iu[keep], ju[keep], n)
