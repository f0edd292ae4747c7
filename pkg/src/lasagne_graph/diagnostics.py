"""Structural analyses contrasting APPR contexts with uniform-walk contexts.

All functions return lists of row dicts, ready for :func:`write_table`.
"""

from __future__ import annotations

import csv
import math

import numpy as np
from scipy.stats import spearmanr

from .alias import PackedAliasTables, build_alias, sample, seed_stream
from .appr import ApprConfig, compute_all_appr
from .graph import UNREACHABLE, CsrGraph, LabelSet, hop_distances, k_core_decomposition
from .sgns import generate_batch
from .walks import WalkConfig, simulate_walks, window_contexts, pairs_per_center

PERCENTILES = (25, 50, 75, 95)


def degree_buckets(degrees) -> list[tuple[int, int]]:
    """Power-of-two buckets ``[1, 2), [2, 4), ...`` covering ``degrees``."""
    top = int(np.max(degrees)) if len(degrees) else 1
    out, lo = [], 1
    while lo <= top:
        out.append((lo, 2 * lo))
        lo *= 2
    return out


def _bucket_members(degrees, buckets):
    return [np.flatnonzero((degrees >= lo) & (degrees < hi)) for lo, hi in buckets]


def _summary(values):
    values = np.asarray(values, dtype=np.float64)
    row = {f"p{q}": float(np.percentile(values, q)) for q in PERCENTILES}
    row["mean"] = float(values.mean())
    return row


def _walk_contexts(g, seeds, walk_cfg, rng):
    """All window contexts of ``seeds`` (as centers) over a full walk corpus."""
    walks = simulate_walks(g, walk_cfg)
    mask = np.zeros(g.num_nodes, dtype=bool)
    mask[seeds] = True
    found = {int(s): [] for s in seeds}
    for centers, contexts in window_contexts(walks, walk_cfg.window, rng):
        keep = mask[centers]
        centers, contexts = centers[keep], contexts[keep]
        order = np.argsort(centers, kind="stable")
        centers, contexts = centers[order], contexts[order]
        bounds = np.flatnonzero(np.diff(centers)) + 1
        for c_chunk, x_chunk in zip(np.split(centers, bounds), np.split(contexts, bounds)):
            if len(c_chunk):
                found[int(c_chunk[0])].append(x_chunk)
    return {s: np.concatenate(v) if v else np.empty(0, np.int64) for s, v in found.items()}


def hop_distance_profile(g: CsrGraph, context_source: str = "appr", degree_buckets_=None,
                         samples_per_bucket: int = 100, contexts_per_seed: int = 100,
                         rng=0, appr_cfg: ApprConfig | None = None,
                         walk_cfg: WalkConfig | None = None, raw: bool = False):
    """Percentiles of seed-to-context hop distances per degree bucket.

    Up to ``samples_per_bucket`` seeds are drawn per bucket and
    ``contexts_per_seed`` contexts per seed. Contexts equal to the seed itself
    (distance 0) are dropped. Empty buckets produce a row with ``note="empty"``.
    """
    if context_source not in ("appr", "walks"):
        raise ValueError("context_source must be 'appr' or 'walks'")
    rng = np.random.default_rng(rng)
    deg = g.degrees
    buckets = degree_buckets_ or degree_buckets(deg)
    members = _bucket_members(deg, buckets)
    chosen = [rng.choice(m, size=min(len(m), samples_per_bucket), replace=False)
              if len(m) else m for m in members]
    seeds = np.unique(np.concatenate(chosen)) if chosen else np.empty(0, np.int64)

    contexts = {}
    if context_source == "appr":
        res = compute_all_appr(g, appr_cfg or ApprConfig(), seeds=seeds)
        base = int(rng.integers(2**31))
        for v in res:
            contexts[v.seed] = sample(build_alias(v), contexts_per_seed,
                                      seed_stream(base, v.seed))
    else:
        wc = walk_cfg or WalkConfig(rng_seed=int(rng.integers(2**31)))
        all_ctx = _walk_contexts(g, seeds, wc, rng)
        for s, ctx in all_ctx.items():
            if len(ctx) > contexts_per_seed:
                ctx = rng.choice(ctx, size=contexts_per_seed, replace=False)
            contexts[s] = ctx

    rows = []
    for (lo, hi), picked in zip(buckets, chosen):
        row = {"source": context_source, "bucket_lo": lo, "bucket_hi": hi,
               "n_seeds": int(len(picked))}
        dists = []
        for s in picked:
            ctx = contexts.get(int(s))
            if ctx is None or len(ctx) == 0:
                continue
            d = hop_distances(g, int(s))[ctx]
            dists.append(d[(d != UNREACHABLE) & (d > 0)])
        dists = np.concatenate(dists) if dists else np.empty(0)
        if len(dists) == 0:
            row["note"] = "empty"
        else:
            row.update(_summary(dists))
            row["n_contexts"] = int(len(dists))
            if raw:
                row["raw"] = dists.astype(np.int64).tolist()
        rows.append(row)
    return rows


def _appr_pair_counts(g, appr_cfg, pairs_per_node, rng):
    res = compute_all_appr(g, appr_cfg)
    packed = PackedAliasTables(build_alias(v) for v in res)
    counts = np.zeros(g.num_nodes, dtype=np.int64)
    remaining = pairs_per_node
    while remaining > 0:
        q = min(remaining, 100)
        batch = generate_batch(packed, q * len(packed), rng)
        counts += np.bincount(batch.seeds, minlength=g.num_nodes)
        remaining -= q
    return counts, np.isin(np.arange(g.num_nodes), [v.seed for v in res])


def instances_per_degree(g: CsrGraph, context_source: str = "appr", degree_buckets_=None,
                         rng=0, pairs_per_node: int = 8700,
                         appr_cfg: ApprConfig | None = None,
                         walk_cfg: WalkConfig | None = None):
    """Training-pair counts per seed node, summarized per degree bucket.

    Returns ``(rows, counts)``; the last row carries the Spearman correlation
    between per-node count and degree.
    """
    rng = np.random.default_rng(rng)
    deg = g.degrees
    if context_source == "appr":
        counts, present = _appr_pair_counts(g, appr_cfg or ApprConfig(), pairs_per_node, rng)
    elif context_source == "walks":
        wc = walk_cfg or WalkConfig(rng_seed=int(rng.integers(2**31)))
        counts = pairs_per_center(simulate_walks(g, wc), wc.window, g.num_nodes, rng)
        present = deg > 0
    else:
        raise ValueError("context_source must be 'appr' or 'walks'")
    buckets = degree_buckets_ or degree_buckets(deg)
    rows = []
    for (lo, hi), m in zip(buckets, _bucket_members(deg, buckets)):
        m = m[present[m]]
        row = {"source": context_source, "bucket_lo": lo, "bucket_hi": hi,
               "n_nodes": int(len(m))}
        if len(m):
            c = counts[m]
            row.update(mean=float(c.mean()), std=float(c.std()), min=int(c.min()),
                       max=int(c.max()))
        else:
            row["note"] = "empty"
        rows.append(row)
    rho = spearmanr(counts[present], deg[present]).statistic \
        if np.ptp(counts[present]) > 0 else 0.0
    rows.append({"source": context_source, "statistic": "spearman_count_degree",
                 "value": float(rho)})
    return rows, counts


def kcore_class_profile(g: CsrGraph, labels: LabelSet):
    """Log ratio of each class's share inside every k-core to its global share.

    Rows with a zero share inside the core carry ``log_ratio=None`` (a break
    in the plotted line).
    """
    core = k_core_decomposition(g)
    n = g.num_nodes
    global_frac = labels.indicator.sum(axis=0) / n
    rows = []
    for k in np.unique(core):
        inside = core >= k
        frac = labels.indicator[inside].sum(axis=0) / inside.sum()
        for c in range(labels.num_classes):
            if global_frac[c] == 0:
                continue
            ratio = frac[c] / global_frac[c]
            rows.append({"class": labels.class_names[c], "k": int(k),
                         "core_size": int(inside.sum()),
                         "fraction_core": float(frac[c]),
                         "fraction_graph": float(global_frac[c]),
                         "ratio": float(ratio),
                         "log_ratio": math.log(ratio) if ratio > 0 else None})
    return rows


def per_class_f1_delta(report_a, report_b, labels: LabelSet):
    """Per-class F1(a) - F1(b) next to the class size."""
    fa = np.asarray(report_a.per_class_f1, dtype=np.float64)
    fb = np.asarray(report_b.per_class_f1, dtype=np.float64)
    if fa.shape != fb.shape or len(fa) != labels.num_classes:
        raise ValueError("reports do not share the label set's classes")
    sizes = labels.class_sizes
    rows = []
    for c in range(labels.num_classes):
        if math.isnan(fa[c]) or math.isnan(fb[c]):
            continue
        rows.append({"class": labels.class_names[c], "size": int(sizes[c]),
                     "delta_f1": float(fa[c] - fb[c])})
    return rows


def write_table(path, rows, config: dict | None = None) -> None:
    """CSV with a ``#``-comment header naming the configuration."""
    fields = []
    for r in rows:
        for k in r:
            if k not in fields and k != "raw":
                fields.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in sorted((config or {}).items()):
            fh.write(f"# {k}={v}\n")
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
