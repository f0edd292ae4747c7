"""Command-line front end: ``lasagne <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .appr import ApprConfig, compute_all_appr, load_appr, save_appr
from .diagnostics import (hop_distance_profile, instances_per_degree, kcore_class_profile,
                          per_class_f1_delta, write_table)
from .evaluation import EDGE_OPERATORS, EvalReport, linkpred_eval, multilabel_former, \
    multilabel_realistic
from .graph import GraphFormatError, LabelSet, load_edge_list, load_labels
from .sgns import NumericalError, TrainConfig, load_embeddings, save_embeddings, train
from .walks import WalkConfig

logger = logging.getLogger("lasagne_graph")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "alpha": "0.2", "delta": 1e-4, "directed": False, "lcc": False,
    "dim": 128, "negatives": 5, "batch_size": None, "max_batches": None,
    "lr_initial": 0.025, "lr_final": 1e-4, "noise": "degree", "noise_exponent": 0.75,
    "walk_len": 80, "walks_per_node": 10, "window": 10,
    "seed": 0, "threads": 1, "binary": False,
    "protocol": "realistic", "train_frac": None, "folds": None, "repetitions": None,
    "normalize": False, "l2": 1.0,
    "ops": ",".join(EDGE_OPERATORS), "holdout": 0.5, "jaccard_k": 50,
    "kind": "hops", "source": "appr", "samples_per_bucket": 100,
    "pairs_per_node": 8700,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add(p, *names, **kw):
    kw.setdefault("default", None)
    p.add_argument(*names, **kw)


def _appr_flags(p):
    _add(p, "--alpha", help="teleportation parameter; comma list for a sweep")
    _add(p, "--delta", type=float, help="significance threshold (default 1e-4)")


def _graph_flags(p):
    _add(p, "--edges", help="edge list file")
    _add(p, "--directed", action="store_true", help="input lists directed arcs")
    _add(p, "--lcc", action="store_true", help="keep only the largest component")


def _train_flags(p):
    _add(p, "--dim", type=int)
    _add(p, "--negatives", type=int)
    _add(p, "--batch-size", type=int)
    _add(p, "--max-batches", type=int)
    _add(p, "--lr-initial", type=float)
    _add(p, "--lr-final", type=float)
    _add(p, "--noise", choices=["degree", "uniform"])
    _add(p, "--noise-exponent", type=float)
    _add(p, "--walk-len", type=int, help="budget: walk length of the matched baseline")
    _add(p, "--walks-per-node", type=int)
    _add(p, "--window", type=int)
    _add(p, "--binary", action="store_true", help="write .npz instead of text")


def build_parser():
    parser = _Parser(prog="lasagne", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    _add(common, "--config", help="JSON/YAML file of flag values (or a run manifest)")
    _add(common, "--seed", type=int)
    _add(common, "--threads", type=int)
    _add(common, "--out", help="output path")
    _add(common, "--manifest", help="manifest path (default: <out>.manifest.json)")
    _add(common, "-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("appr", parents=[common], help="compute APPR vectors")
    _graph_flags(p)
    _appr_flags(p)

    p = sub.add_parser("train", parents=[common], help="train from an APPR sidecar")
    _add(p, "--appr", help="APPR sidecar written by 'appr'")
    _train_flags(p)

    p = sub.add_parser("embed", parents=[common], help="appr + train in one run")
    _graph_flags(p)
    _appr_flags(p)
    _train_flags(p)

    p = sub.add_parser("eval-multilabel", parents=[common], help="node classification")
    _add(p, "--embeddings")
    _add(p, "--labels")
    _add(p, "--protocol", choices=["former", "realistic"])
    _add(p, "--train-frac", type=float, help="former protocol only")
    _add(p, "--repetitions", type=int, help="former protocol only")
    _add(p, "--folds", type=int, help="realistic protocol only")
    _add(p, "--normalize", action="store_true")
    _add(p, "--l2", type=float)

    p = sub.add_parser("eval-linkpred", parents=[common], help="link prediction AUC")
    _graph_flags(p)
    _appr_flags(p)
    _train_flags(p)
    _add(p, "--ops", help=f"comma list out of {','.join(EDGE_OPERATORS)}")
    _add(p, "--holdout", type=float)
    _add(p, "--jaccard-k", type=int, help="0 disables Jaccard-kNN scoring")
    _add(p, "--l2", type=float)

    p = sub.add_parser("diag", parents=[common], help="structural diagnostics")
    _graph_flags(p)
    _appr_flags(p)
    _add(p, "--kind", choices=["hops", "instances", "kcore", "f1delta"])
    _add(p, "--source", choices=["appr", "walks"])
    _add(p, "--labels")
    _add(p, "--samples-per-bucket", type=int)
    _add(p, "--pairs-per-node", type=int)
    _add(p, "--walk-len", type=int)
    _add(p, "--walks-per-node", type=int)
    _add(p, "--window", type=int)
    _add(p, "--reports", nargs=2, metavar=("A", "B"), help="two eval reports (f1delta)")
    return parser


def _load_config(path):
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if "params" in data and "command" in data:
        data = data["params"]
    return {k.replace("-", "_"): v for k, v in data.items()}


def merge_params(args) -> dict:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "manifest", "verbose")}
    params = dict(DEFAULTS)
    params.update(_load_config(args.config))
    params.update(flags)
    return params


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _require(params, *keys):
    for k in keys:
        if params.get(k) is None:
            raise UsageError(f"--{k.replace('_', '-')} is required")


def _alphas(params):
    try:
        return [float(a) for a in str(params["alpha"]).split(",")]
    except ValueError:
        raise UsageError(f"bad --alpha value {params['alpha']!r}") from None


def _suffixed(path, alpha, sweep):
    if not sweep:
        return Path(path)
    p = Path(path)
    return p.with_name(f"{p.stem}.alpha{alpha:g}{p.suffix}")


def _train_config(params, alpha):
    return TrainConfig(d=params["dim"], alpha=alpha, delta=params["delta"],
                       negatives_k=params["negatives"], batch_size=params["batch_size"],
                       max_batches=params["max_batches"], lr_initial=params["lr_initial"],
                       lr_final=params["lr_final"], noise_exponent=params["noise_exponent"],
                       noise=params["noise"], rng_seed=params["seed"],
                       walk_len=params["walk_len"], walks_per_node=params["walks_per_node"],
                       window=params["window"], n_workers=params["threads"])


def _load_graph(params):
    _require(params, "edges")
    return load_edge_list(params["edges"], directed_input=params["directed"],
                          largest_component=params["lcc"])


def _write_manifest(command, params, inputs, outputs, manifest_path, extra=None):
    data = {
        "command": command,
        "version": __version__,
        "params": params,
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "outputs": [str(o) for o in outputs],
    }
    if extra:
        data.update(extra)
    Path(manifest_path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _cmd_appr(params):
    _require(params, "out")
    g = _load_graph(params)
    alphas = _alphas(params)
    outs = []
    for a in alphas:
        cfg = ApprConfig(a, params["delta"])
        res = compute_all_appr(g, cfg, n_jobs=params["threads"])
        out = _suffixed(params["out"], a, len(alphas) > 1)
        save_appr(out, res, g)
        logger.info("alpha=%g (beta=%.6g): %d vectors, %d skipped -> %s",
                    a, cfg.beta, len(res), len(res.skipped), out)
        outs.append(out)
    return [params["edges"]], outs, {"beta": [ApprConfig(a).beta for a in alphas]}


def _train_and_save(g, res, params, out):
    cfg = _train_config(params, res.config.alpha)
    emb = train(g, res, cfg)
    save_embeddings(out, emb.input_vecs, g.external_ids, binary=params["binary"])
    logger.info("wrote %d x %d embeddings to %s", emb.num_nodes, emb.d, out)


def _cmd_train(params):
    _require(params, "appr", "out")
    res, g = load_appr(params["appr"])
    params["alpha"] = str(res.config.alpha)
    params["delta"] = res.config.delta
    _train_and_save(g, res, params, Path(params["out"]))
    return [params["appr"]], [params["out"]], None


def _cmd_embed(params):
    _require(params, "out")
    g = _load_graph(params)
    alphas = _alphas(params)
    outs = []
    for a in alphas:
        res = compute_all_appr(g, ApprConfig(a, params["delta"]), n_jobs=params["threads"])
        out = _suffixed(params["out"], a, len(alphas) > 1)
        _train_and_save(g, res, params, out)
        outs.append(out)
    return [params["edges"]], outs, None


def _cmd_eval_multilabel(params, explicit):
    _require(params, "embeddings", "labels", "out")
    proto = params["protocol"]
    if proto == "realistic" and ({"train_frac", "repetitions"} & explicit):
        raise UsageError("--train-frac/--repetitions only apply to --protocol former")
    if proto == "former" and "folds" in explicit:
        raise UsageError("--folds only applies to --protocol realistic")
    ids, X = load_embeddings(params["embeddings"])
    labels = load_labels(params["labels"], ids)
    if proto == "former":
        report = multilabel_former(X, labels, params["train_frac"] or 0.9,
                                   params["repetitions"] or 10, params["seed"],
                                   params["l2"], params["normalize"])
    else:
        report = multilabel_realistic(X, labels, params["folds"] or 10, params["seed"],
                                      params["l2"], normalize=params["normalize"])
    report.config["embeddings"] = params["embeddings"]
    _emit_report(report, params["out"])
    return [params["embeddings"], params["labels"]], [params["out"]], None


def _emit_report(report: EvalReport, out):
    report.write(out)
    text = Path(out).with_suffix(Path(out).suffix + ".txt")
    text.write_text(report.summary() + "\n")
    print(report.summary())


def _cmd_eval_linkpred(params):
    _require(params, "out")
    g = _load_graph(params)
    ops = [o.strip() for o in params["ops"].split(",") if o.strip()]
    bad = set(ops) - set(EDGE_OPERATORS)
    if bad:
        raise UsageError(f"unknown operators {sorted(bad)}")
    alphas = _alphas(params)
    outs = []
    for a in alphas:
        cfg = _train_config(params, a)

        def embed(residual, a=a, cfg=cfg):
            res = compute_all_appr(residual, ApprConfig(a, params["delta"]),
                                   n_jobs=params["threads"])
            return train(residual, res, cfg)

        report = linkpred_eval(g, embed, ops, params["holdout"], params["seed"],
                               params["l2"], params["jaccard_k"] or None)
        report.config.update(alpha=a, delta=params["delta"], dim=params["dim"])
        out = _suffixed(params["out"], a, len(alphas) > 1)
        _emit_report(report, out)
        outs.append(out)
    return [params["edges"]], outs, None


def _read_report(path, num_classes):
    per_class = np.full(num_classes, np.nan)
    protocol = "?"
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("protocol\t"):
                continue
            proto, key, _, metric, value = line.rstrip("\n").split("\t")
            protocol = proto
            if metric == "f1" and key.startswith("class"):
                per_class[int(key[5:])] = float(value)
    return EvalReport(protocol, per_class)


def _cmd_diag(params):
    _require(params, "out")
    g = _load_graph(params)
    kind = params["kind"]
    alpha = _alphas(params)[0]
    appr_cfg = ApprConfig(alpha, params["delta"])
    walk_cfg = WalkConfig(params["walk_len"], params["walks_per_node"], params["window"],
                          params["seed"])
    inputs = [params["edges"]]
    if kind == "hops":
        rows = hop_distance_profile(g, params["source"],
                                    samples_per_bucket=params["samples_per_bucket"],
                                    rng=params["seed"], appr_cfg=appr_cfg, walk_cfg=walk_cfg)
    elif kind == "instances":
        rows, _ = instances_per_degree(g, params["source"], rng=params["seed"],
                                       pairs_per_node=params["pairs_per_node"],
                                       appr_cfg=appr_cfg, walk_cfg=walk_cfg)
    elif kind == "kcore":
        _require(params, "labels")
        rows = kcore_class_profile(g, load_labels(params["labels"], g))
        inputs.append(params["labels"])
    else:
        _require(params, "labels", "reports")
        labels: LabelSet = load_labels(params["labels"], g)
        a, b = (_read_report(p, labels.num_classes) for p in params["reports"])
        rows = per_class_f1_delta(a, b, labels)
        inputs += [params["labels"], *params["reports"]]
    config = {"kind": kind, "source": params["source"], "alpha": alpha,
              "delta": params["delta"], "seed": params["seed"]}
    write_table(params["out"], rows, config)
    return inputs, [params["out"]], None


COMMANDS = {
    "appr": _cmd_appr,
    "train": _cmd_train,
    "embed": _cmd_embed,
    "eval-linkpred": _cmd_eval_linkpred,
    "diag": _cmd_diag,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        params = merge_params(args)
        explicit = {k for k, v in vars(args).items() if v is not None}
        if params["threads"] < 1:
            raise UsageError("--threads must be >= 1")
        if params["threads"] > 1:
            import numba
            numba.set_num_threads(min(params["threads"], numba.config.NUMBA_NUM_THREADS))
        if args.command == "eval-multilabel":
            inputs, outputs, extra = _cmd_eval_multilabel(params, explicit)
        else:
            inputs, outputs, extra = COMMANDS[args.command](params)
        manifest = args.manifest or f"{params['out']}.manifest.json"
        _write_manifest(args.command, params, inputs, outputs, manifest, extra)
    except UsageError as exc:
        print(f"lasagne {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"lasagne {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GraphFormatError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"lasagne {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())
