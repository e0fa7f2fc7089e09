"""The five span-level privacy-risk indicators and their combination."""

from .combine import combine
from .decisions import INDICATORS, RiskDecision, read_decisions, write_decisions
from .features import (
    PROB,
    FeatureVector,
    Layout,
    aggregate_logprobs,
    feature_vector,
    span_features,
    span_text_features,
    spancls_layout,
)
from .logreg import LogRegModel, prob_indicator, spancls_indicator, train_from_rows, train_logreg
from .perturbation import (
    InfluenceRecord,
    TuningScore,
    influence_table,
    perturb_indicator,
    perturb_influence,
    tune_threshold,
)
from .seqlab import PARTIAL, STRICT, seqlab_indicator
from .web import websearch_hits_indicator, websearch_url_indicator

__all__ = [
    "INDICATORS",
    "PARTIAL",
    "PROB",
    "STRICT",
    "FeatureVector",
    "InfluenceRecord",
    "Layout",
    "LogRegModel",
    "RiskDecision",
    "TuningScore",
    "aggregate_logprobs",
    "combine",
    "feature_vector",
    "influence_table",
    "perturb_indicator",
    "perturb_influence",
    "prob_indicator",
    "read_decisions",
    "seqlab_indicator",
    "span_features",
    "span_text_features",
    "spancls_indicator",
    "spancls_layout",
    "train_from_rows",
    "train_logreg",
    "tune_threshold",
    "websearch_hits_indicator",
    "websearch_url_indicator",
    "write_decisions",
]
