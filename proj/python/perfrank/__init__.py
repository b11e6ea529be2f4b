"""Label-free ranking of domains by estimated model accuracy."""

from ._core import (
    PerfrankError,
    LinearTextClassifier,
    accuracy,
    cosine,
    estimate_from_errors,
    js_divergence,
    macro_f1,
    pearson,
    rank_with_ties,
    run_experiment,
    run_sweep,
    semantic_drift_estimate,
    spearman,
    summary_stats,
    token_distribution,
    tokenize,
    zero_shot_estimate,
)

__all__ = [
    "PerfrankError",
    "LinearTextClassifier",
    "accuracy",
    "cosine",
    "estimate_from_errors",
    "js_divergence",
    "macro_f1",
    "pearson",
    "rank_with_ties",
    "run_experiment",
    "run_sweep",
    "semantic_drift_estimate",
    "spearman",
    "summary_stats",
    "token_distribution",
    "tokenize",
    "zero_shot_estimate",
]
