"""Locality-aware node embeddings from approximate personalized PageRank."""

from .alias import AliasTable, build_alias, sample
from .appr import ApprConfig, ApprError, ApprVector, compute_all_appr, compute_appr, exact_ppr
from .estimator import EdgeFeaturizer, LasagneEmbedding, OneVsRestLogReg
from .evaluation import (EvalReport, edge_embed, linkpred_eval, logreg_fit, metrics_auc,
                         metrics_f1, multilabel_former, multilabel_realistic)
from .graph import (CsrGraph, LabelSet, bfs_hops, conductance, k_core_decomposition,
                    load_edge_list, load_labels)
from .sgns import EmbeddingMatrix, TrainConfig, sgns_step, train, training_budget
from .walks import WalkConfig, simulate_walks, window_contexts

__version__ = "0.1.0"

__all__ = [
    "AliasTable", "ApprConfig", "ApprError", "ApprVector", "CsrGraph", "EdgeFeaturizer",
    "EmbeddingMatrix", "EvalReport", "LabelSet", "LasagneEmbedding", "OneVsRestLogReg",
    "TrainConfig", "WalkConfig", "bfs_hops", "build_alias", "compute_all_appr",
    "compute_appr", "conductance", "edge_embed", "exact_ppr", "k_core_decomposition",
    "linkpred_eval", "load_edge_list", "load_labels", "logreg_fit", "metrics_auc",
    "metrics_f1", "multilabel_former", "multilabel_realistic", "sample", "sgns_step",
    "simulate_walks", "train", "training_budget", "window_contexts",
]
