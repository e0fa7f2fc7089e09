"""Span-level privacy risk indicators for text sanitization.

Modules: ``corpus`` (documents, tokens, annotations), ``gazetteer`` (dump
parsing and longest-match lookup), ``silver`` (NER + gazetteer merge, BIO),
``scorer`` (n-gram and external log-probability scorers), ``indicators``
(the five risk indicators and their k-of-n combination), ``websearch``
(cached search client), ``evaluation`` (privacy and utility metrics),
``pipeline`` and ``cli`` (file-based stages).
"""

from .corpus import (
    AnnotationSet,
    CorpusError,
    Document,
    EntityCluster,
    IdentifierKind,
    Mention,
    SemanticType,
    Token,
    extract_clusters,
    load_corpus,
    save_corpus,
    tokenize,
)
from .evaluation import MaskSet, MetricsReport, report
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AnnotationSet",
    "CorpusError",
    "Document",
    "EntityCluster",
    "IdentifierKind",
    "MaskSet",
    "Mention",
    "MetricsReport",
    "SemanticType",
    "Token",
    "extract_clusters",
    "load_corpus",
    "report",
    "save_corpus",
    "tokenize",
]
