"""Truncated personalized PageRank vectors used as node neighborhoods.

The push loop follows the locality-aware variant: residual mass is pushed in
order of ``r(v) / d(v)`` and the loop stops once the share contributed by the
latest non-seed update drops below ``delta``. With teleportation ``alpha``
each push keeps ``beta = 2*alpha / (1 + alpha)`` of the residual, so the
result approximates ordinary PPR with restart probability ``beta``.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .graph import CsrGraph

logger = logging.getLogger(__name__)

EXACT_PPR_MAX_NODES = 5000
SIDECAR_MAGIC = "#lasagne-appr 1"


class ApprError(ValueError):
    """Seed cannot produce a usable neighborhood (isolated or degenerate)."""


@dataclass(frozen=True)
class ApprConfig:
    alpha: float = 0.2
    delta: float = 1e-4
    skip_seed_replacement: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def beta(self) -> float:
        """Equivalent restart probability of the standard PPR formulation."""
        return 2.0 * self.alpha / (1.0 + self.alpha)


@dataclass(frozen=True, eq=False)
class ApprVector:
    """Sparse APPR of one seed: ``mass[i]`` belongs to node ``nodes[i]``.

    ``residual_nodes`` / ``residual_mass`` hold the undistributed mass left
    when the push loop stopped.
    """

    seed: int
    nodes: np.ndarray
    mass: np.ndarray
    residual_l1: float
    num_pushes: int
    num_seed_pushes: int
    residual_nodes: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    residual_mass: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self):
        return len(self.nodes)

    @property
    def entries(self) -> dict[int, float]:
        return dict(zip(self.nodes.tolist(), self.mass.tolist()))

    @property
    def num_nonseed_pushes(self) -> int:
        return self.num_pushes - self.num_seed_pushes

    def to_dense(self, num_nodes: int) -> np.ndarray:
        out = np.zeros(num_nodes)
        out[self.nodes] = self.mass
        return out

    def residual_dense(self, num_nodes: int) -> np.ndarray:
        out = np.zeros(num_nodes)
        out[self.residual_nodes] = self.residual_mass
        return out


@numba.njit(cache=True, nogil=True)
def _push(offsets, neighbors, seed, alpha, delta, max_pushes, p, r, touched):
    """Run the push loop for one seed on zeroed work arrays ``p`` and ``r``.

    Returns (number of touched nodes, total pops, seed pops). Touched node IDs
    are written to ``touched``; the caller reads and re-zeroes p and r there.
    """
    keep = 2.0 * alpha / (1.0 + alpha)
    spread = (1.0 - alpha) / (1.0 + alpha)
    n_touched = 0
    touched[n_touched] = seed
    n_touched += 1
    r[seed] = 1.0
    # min-heap on (-priority, node): equal priorities pop the smaller node first.
    # Entries go stale when r(v) grows; a stale entry no longer matches
    # r(v)/d(v) and is skipped on pop.
    heap = [(-(1.0 / (offsets[seed + 1] - offsets[seed])), seed)]
    sum_updates = 0.0
    last_update = 1.0
    pops = 0
    seed_pops = 0
    while last_update > delta and len(heap) > 0:
        if max_pushes >= 0 and pops >= max_pushes:
            break
        neg_prio, u = heapq.heappop(heap)
        deg_u = offsets[u + 1] - offsets[u]
        if r[u] == 0.0 or -neg_prio != r[u] / deg_u:
            continue
        pops += 1
        ru = r[u]
        prob_update = keep * ru
        if u != seed:
            sum_updates += prob_update
            last_update = prob_update / sum_updates
        else:
            seed_pops += 1
        p[u] += prob_update
        share = spread * ru / deg_u
        r[u] = 0.0
        for j in range(offsets[u], offsets[u + 1]):
            v = neighbors[j]
            if p[v] == 0.0 and r[v] == 0.0:
                touched[n_touched] = v
                n_touched += 1
            r[v] += share
            heapq.heappush(heap, (-(r[v] / (offsets[v + 1] - offsets[v])), v))
    return n_touched, pops, seed_pops


def _collect(seed, n_touched, pops, seed_pops, p, r, touched, cfg, strict=True):
    idx = np.sort(touched[:n_touched])
    pm, rm = p[idx].copy(), r[idx].copy()
    p[idx] = 0.0
    r[idx] = 0.0
    keep = pm > 0.0
    nodes, mass = idx[keep], pm[keep]
    rkeep = rm > 0.0
    res_nodes, res_mass = idx[rkeep], rm[rkeep]
    others = nodes != seed
    if not others.any():
        if not strict:
            return ApprVector(int(seed), nodes, mass, float(res_mass.sum()), int(pops),
                              int(seed_pops), res_nodes, res_mass)
        raise ApprError(f"degenerate APPR for seed {seed}: no mass outside the seed "
                        f"(delta={cfg.delta} too large)")
    if not cfg.skip_seed_replacement:
        mass[nodes == seed] = mass[others].max()
    return ApprVector(int(seed), nodes, mass, float(res_mass.sum()), int(pops),
                      int(seed_pops), res_nodes, res_mass)


class _Workspace:
    def __init__(self, n):
        self.p = np.zeros(n)
        self.r = np.zeros(n)
        self.touched = np.empty(n, dtype=np.int64)


def compute_appr(g: CsrGraph, seed: int, cfg: ApprConfig | None = None,
                 max_pushes: int | None = None, _ws: _Workspace | None = None
                 ) -> ApprVector:
    """Locality-aware APPR of ``seed``.

    ``max_pushes`` truncates the loop after that many pops (testing hook for
    checking the push invariants at intermediate states); truncated vectors
    skip the degenerate-vector check.
    """
    cfg = cfg or ApprConfig()
    seed = g.check_node(seed)
    if g.degree(seed) == 0:
        raise ApprError(f"isolated node {seed}")
    ws = _ws or _Workspace(g.num_nodes)
    out = _push(g.offsets, g.neighbors, seed, cfg.alpha, cfg.delta,
                -1 if max_pushes is None else int(max_pushes),
                ws.p, ws.r, ws.touched)
    return _collect(seed, *out, ws.p, ws.r, ws.touched, cfg,
                    strict=max_pushes is None)


@dataclass
class ApprResult:
    """APPR vectors for all usable seeds, ordered by seed ID."""

    vectors: list[ApprVector]
    skipped: dict[int, str]
    config: ApprConfig

    def __iter__(self):
        return iter(self.vectors)

    def __len__(self):
        return len(self.vectors)


def compute_all_appr(g: CsrGraph, cfg: ApprConfig | None = None,
                     seeds=None, n_jobs: int = 1) -> ApprResult:
    """APPR for every non-isolated node (or the given ``seeds``).

    Seeds that fail (isolated, degenerate) are skipped with a warning and
    listed in ``skipped``. Output order is by seed ID for any ``n_jobs``.
    """
    cfg = cfg or ApprConfig()
    seeds = np.arange(g.num_nodes) if seeds is None else np.unique(seeds)

    def run(chunk):
        ws = _Workspace(g.num_nodes)
        done, bad = [], {}
        for s in chunk:
            try:
                done.append(compute_appr(g, int(s), cfg, _ws=ws))
            except ApprError as exc:
                bad[int(s)] = str(exc)
        return done, bad

    n_jobs = max(1, int(n_jobs))
    chunks = np.array_split(seeds, n_jobs) if n_jobs > 1 else [seeds]
    if n_jobs == 1:
        parts = [run(seeds)]
    else:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, chunks))
    vectors = sorted((v for d, _ in parts for v in d), key=lambda v: v.seed)
    skipped = {k: msg for _, b in parts for k, msg in b.items()}
    if skipped:
        logger.warning("skipped %d seeds without a usable APPR vector", len(skipped))
    return ApprResult(vectors, dict(sorted(skipped.items())), cfg)


def exact_ppr(g: CsrGraph, seed, beta: float) -> np.ndarray:
    """Dense PPR solving ``pr = beta * s + (1 - beta) * pr @ D^-1 A``.

    ``seed`` is a node ID or a full start distribution of length N.
    """
    n = g.num_nodes
    if n > EXACT_PPR_MAX_NODES:
        raise ValueError(f"exact_ppr limited to {EXACT_PPR_MAX_NODES} nodes, got {n}")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if np.ndim(seed) == 0:
        s = np.zeros(n)
        s[g.check_node(seed)] = 1.0
    else:
        s = np.asarray(seed, dtype=np.float64)
    deg = g.degrees.astype(np.float64)
    adj = g.to_scipy().toarray()
    with np.errstate(divide="ignore"):
        inv = np.where(deg > 0, 1.0 / deg, 0.0)
    walk = inv[:, None] * adj
    # row-vector system: pr (I - (1 - beta) W) = beta s
    system = np.eye(n) - (1.0 - beta) * walk
    return np.linalg.solve(system.T, beta * s)


def _fmt(x: float) -> str:
    return repr(float(x))


def save_appr(path, result: ApprResult, g: CsrGraph) -> None:
    """Write the text sidecar: a magic line, a JSON header, one line per seed.

    Seed lines read ``seed residual_l1 pushes seed_pushes k node:mass ...``
    with internal node IDs and round-trip exact float formatting.
    """
    header = {
        "alpha": result.config.alpha,
        "delta": result.config.delta,
        "beta": result.config.beta,
        "skip_seed_replacement": result.config.skip_seed_replacement,
        "num_nodes": g.num_nodes,
        "external_ids": list(g.external_ids),
        "offsets": g.offsets.tolist(),
        "neighbors": g.neighbors.tolist(),
        "skipped": {str(k): v for k, v in result.skipped.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SIDECAR_MAGIC + "\n")
        fh.write(json.dumps(header) + "\n")
        for v in result.vectors:
            body = " ".join(f"{n}:{_fmt(m)}" for n, m in zip(v.nodes, v.mass))
            fh.write(f"{v.seed} {_fmt(v.residual_l1)} {v.num_pushes} "
                     f"{v.num_seed_pushes} {len(v.nodes)} {body}\n")


def load_appr(path) -> tuple[ApprResult, CsrGraph]:
    """Inverse of :func:`save_appr`; also rebuilds the graph it was computed on."""
    with open(path, encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != SIDECAR_MAGIC:
            raise ValueError(f"{path}: not an APPR sidecar")
        header = json.loads(fh.readline())
        vectors = []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            seed, res, pushes, seed_pushes, k = parts[:5]
            pairs = [t.split(":") for t in parts[5:]]
            if len(pairs) != int(k):
                raise ValueError(f"{path}: seed {seed} lists {len(pairs)} of {k} entries")
            nodes = np.array([int(a) for a, _ in pairs], dtype=np.int64)
            mass = np.array([float(b) for _, b in pairs])
            vectors.append(ApprVector(int(seed), nodes, mass, float(res),
                                      int(pushes), int(seed_pushes)))
    g = CsrGraph(np.array(header["offsets"], dtype=np.int64),
                 np.array(header["neighbors"], dtype=np.int64),
                 tuple(header["external_ids"]))
    cfg = ApprConfig(header["alpha"], header["delta"], header["skip_seed_replacement"])
    skipped = {int(k): v for k, v in header["skipped"].items()}
    return ApprResult(vectors, skipped, cfg), g


def push_bound(delta: float) -> int:
    """Upper bound on non-seed pushes for a given significance threshold."""
    return math.ceil(1.0 / delta)
