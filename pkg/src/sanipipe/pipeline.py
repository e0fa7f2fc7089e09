"""Stage functions behind the CLI subcommands.

Each stage reads and writes the documented file formats, so any stage can
be replaced by an external tool.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import MASKED_KINDS, SemanticType, tokenize
from .evaluation import MaskSet
from .gazetteer import GazetteerMatcher
from .indicators import combine
from .indicators.decisions import INDICATORS
from .indicators.features import PROB, span_features, spancls_layout
from .indicators.logreg import MASK, NO_MASK, prob_indicator, spancls_indicator, train_from_rows
from .indicators.perturbation import assign_clusters, influence_table, perturb_decisions, token_spans, tune_threshold
from .indicators.seqlab import seqlab_decisions
from .indicators.web import websearch_hits_indicator, websearch_url_indicator
from .scorer import NGramScorer
from .silver import PredictedSpan, from_gazetteer, merge_annotations, validate_spans
from .websearch import UncachedQueryError, make_query, person_urls

logger = logging.getLogger(__name__)


class StageError(RuntimeError):
    pass


def gold_spans(doc, annotator=None):
    """Mentions of one annotator (first by id) as predicted spans."""
    if not doc.annotations:
        return []
    ann = doc.annotations[annotator or sorted(doc.annotations)[0]]
    return [PredictedSpan(m.start, m.end, m.semantic_type, "MODEL") for m in ann.mentions]


def detect(docs, ner=None, gazetteers=None, predictions=None):
    """Spans per document, from NER + gazetteers or passed-through predictions."""
    merge_path = ner is not None or bool(gazetteers)
    if merge_path == (predictions is not None):
        raise ValueError("give either NER/gazetteer sources or a predictions file, not both or neither")
    known = {d.doc_id for d in docs}
    source = predictions if predictions is not None else (ner or {})
    unknown = sorted(set(source) - known)
    if unknown:
        raise StageError(f"spans for unknown documents: {', '.join(unknown)}")
    out = {}
    if predictions is not None:
        for doc in docs:
            spans = [PredictedSpan(s.start, s.end, s.label, "MODEL") for s in predictions.get(doc.doc_id, [])]
            validate_spans(doc, spans)
            out[doc.doc_id] = spans
        return out
    matcher = GazetteerMatcher(gazetteers or [])
    for doc in docs:
        ner_spans = merge_annotations((ner or {}).get(doc.doc_id, []), [])
        gaz_spans = from_gazetteer(matcher.match(doc.text))
        out[doc.doc_id] = merge_annotations(ner_spans, gaz_spans)
    return out


@dataclass
class ScoreConfig:
    indicators: tuple = INDICATORS
    prob_threshold: float = 0.5
    perturb_threshold: float | None = None
    seqlab_mode: str = "PARTIAL"
    web_mode: str = "hits"
    hits_lower: int = 100
    hits_upper: int | None = None
    quote_queries: bool = True
    text_dim: int = 1024
    train_fraction: float = 1.0
    seed: int = 0
    lr: float = 0.5
    iters: int = 1000
    l2: float = 1e-4
    workers: int = 1
    models: dict = field(default_factory=dict)


def training_rows(docs, scorer, text_dim=None):
    """(FeatureVector, label) for every gold mention of every annotator."""
    rows = []
    for doc in docs:
        tokens = tokenize(doc.text)
        surfaces = [t.surface for t in tokens]
        for ann in doc.annotations.values():
            spans = list(ann.mentions)
            for m, (i, j) in zip(spans, token_spans(tokens, spans)):
                if i >= j:
                    continue
                fv = span_features(scorer, surfaces, (i, j), m.semantic_type, doc.text[m.start:m.end], text_dim)
                rows.append((fv, MASK if m.identifier_kind in MASKED_KINDS else NO_MASK))
    return rows


def subsample(rows, fraction, seed):
    if not 0 < fraction <= 1:
        raise ValueError("train fraction must lie in (0, 1]")
    if fraction == 1:
        return list(rows)
    n = max(1, round(fraction * len(rows)))
    idx = sorted(random.Random(seed).sample(range(len(rows)), n))
    return [rows[i] for i in idx]


def fit_classifiers(train_docs, scorer, cfg):
    models = {}
    need = [name for name in ("PROB", "SPANCLS") if name in cfg.indicators]
    if not need:
        return models
    rows = subsample(training_rows(train_docs, scorer, cfg.text_dim), cfg.train_fraction, cfg.seed)
    logger.info("training classifiers on %d span rows", len(rows))
    if "PROB" in need:
        models["PROB"] = train_from_rows(rows, PROB, lr=cfg.lr, iters=cfg.iters, l2=cfg.l2)
    if "SPANCLS" in need:
        models["SPANCLS"] = train_from_rows(rows, spancls_layout(cfg.text_dim), lr=cfg.lr, iters=cfg.iters, l2=cfg.l2)
    return models


def tune_items(docs, spans_by_doc, scorer, workers=1):
    items = _parallel(_influence_job, [(doc, spans_by_doc[doc.doc_id], scorer) for doc in docs], workers, scorer)
    return items


def _influence_job(args):
    doc, spans, scorer = args
    clusters = assign_clusters(doc, spans)
    records = influence_table(tokenize(doc.text), spans, clusters, scorer)
    return spans, clusters, records


def _parallel(fn, jobs, workers, scorer=None):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    pool_cls = ProcessPoolExecutor if isinstance(scorer, NGramScorer) or scorer is None else ThreadPoolExecutor
    with pool_cls(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def check_web_queries(docs, spans_by_doc, client, cfg):
    missing = []
    for doc in docs:
        queries = [make_query(doc.text[s.start:s.end], cfg.quote_queries) for s in spans_by_doc[doc.doc_id]]
        if cfg.web_mode == "urls" and doc.target_name:
            queries.append(" ".join(doc.target_name.split()))
        for q in dict.fromkeys(queries):
            try:
                client.search(q)
            except UncachedQueryError:
                missing.append(q)
    return missing


def score(docs, spans_by_doc, scorer, cfg, train_docs=None, token_predictions=None, search_client=None):
    """RiskDecisions for every span and every configured indicator.

    Output order: documents as given, spans by offset, indicators in
    canonical order.
    """
    unknown = [name for name in cfg.indicators if name not in INDICATORS]
    if unknown:
        raise ValueError(f"unknown indicators {unknown}")
    models = dict(cfg.models)
    if any(name in cfg.indicators and name not in models for name in ("PROB", "SPANCLS")):
        if not train_docs:
            raise StageError("PROB/SPANCLS need a training corpus or pre-trained models")
        models.update({k: v for k, v in fit_classifiers(train_docs, scorer, cfg).items() if k not in models})
    threshold = cfg.perturb_threshold
    if "PERTURB" in cfg.indicators and threshold is None:
        if not train_docs:
            raise StageError("PERTURB needs a threshold or a training corpus to tune one")
        gold = {d.doc_id: gold_spans(d) for d in train_docs}
        best, _ = tune_threshold(train_docs, tune_items(train_docs, gold, scorer, cfg.workers))
        threshold = best.threshold
        logger.info("perturbation threshold tuned to %r (objective %.4f)", threshold, best.objective)
    if "SEQLAB" in cfg.indicators:
        if token_predictions is None:
            raise StageError("SEQLAB needs a token-prediction file")
        missing = sorted(d.doc_id for d in docs if d.doc_id not in token_predictions)
        if missing:
            raise StageError(f"no token predictions for: {', '.join(missing)}")
    if "WEBSEARCH" in cfg.indicators:
        if search_client is None:
            raise StageError("WEBSEARCH needs a fixture file or live search credentials")
        missing = check_web_queries(docs, spans_by_doc, search_client, cfg)
        if missing:
            raise UncachedQueryError("uncached queries:\n  " + "\n  ".join(missing))

    perturb = {}
    if "PERTURB" in cfg.indicators:
        for doc, item in zip(docs, tune_items(docs, spans_by_doc, scorer, cfg.workers)):
            perturb[doc.doc_id] = item

    decisions = []
    for doc in docs:
        spans = spans_by_doc[doc.doc_id]
        if not spans:
            continue
        tokens = tokenize(doc.text)
        surfaces = [t.surface for t in tokens]
        ranges = token_spans(tokens, spans)
        per_span = [[] for _ in spans]
        if "PROB" in cfg.indicators or "SPANCLS" in cfg.indicators:
            for k, (s, rng) in enumerate(zip(spans, ranges)):
                if rng[0] >= rng[1]:
                    continue
                fv = span_features(scorer, surfaces, rng, s.label, doc.text[s.start:s.end], cfg.text_dim)
                ref = (doc.doc_id, s.start, s.end)
                if "PROB" in cfg.indicators:
                    per_span[k].append(prob_indicator(models["PROB"], fv, cfg.prob_threshold, ref))
                if "SPANCLS" in cfg.indicators:
                    per_span[k].append(spancls_indicator(models["SPANCLS"], fv, cfg.prob_threshold, ref))
        if "PERTURB" in cfg.indicators:
            p_spans, clusters, records = perturb[doc.doc_id]
            for k, d in enumerate(perturb_decisions(doc.doc_id, p_spans, clusters, records, threshold)):
                per_span[k].append(d)
        if "SEQLAB" in cfg.indicators:
            for k, d in enumerate(seqlab_decisions(doc.doc_id, token_predictions[doc.doc_id], tokens, spans, cfg.seqlab_mode)):
                per_span[k].append(d)
        if "WEBSEARCH" in cfg.indicators:
            person = set()
            if cfg.web_mode == "urls" and doc.target_name:
                person = person_urls(search_client, doc.target_name)
            for k, s in enumerate(spans):
                res = search_client.search(make_query(doc.text[s.start:s.end], cfg.quote_queries))
                ref = (doc.doc_id, s.start, s.end)
                if cfg.web_mode == "urls":
                    per_span[k].append(websearch_url_indicator(res.urls, person, ref))
                else:
                    per_span[k].append(websearch_hits_indicator(res.total_hits, cfg.hits_lower, cfg.hits_upper, ref))
        for ds in per_span:
            decisions.extend(sorted(ds, key=lambda d: INDICATORS.index(d.indicator)))
    return decisions


def sanitize(docs, spans_by_doc, decisions, k, opaque=False):
    """Mask spans flagged by at least ``k`` indicators.

    Returns ``(sanitized, masksets)``: ``{doc_id: text}`` and ``MaskSet`` per
    document, both in corpus order.
    """
    index = {}
    for doc in docs:
        for s in spans_by_doc.get(doc.doc_id, []):
            index[(doc.doc_id, s.start, s.end)] = s
    unknown = sorted({d.span for d in decisions if d.span not in index})
    if unknown:
        raise StageError("decisions reference unknown spans: " + ", ".join(f"{a}[{b},{c})" for a, b, c in unknown[:10]))
    risky = combine(decisions, k) if decisions else set()
    sanitized = {}
    masksets = []
    for doc in docs:
        spans = sorted((index[r] for r in risky if r[0] == doc.doc_id), key=lambda s: s.start)
        pieces = []
        pos = 0
        for s in spans:
            pieces.append(doc.text[pos:s.start])
            pieces.append("***" if opaque else f"[{SemanticType(s.label).value}]")
            pos = s.end
        pieces.append(doc.text[pos:])
        sanitized[doc.doc_id] = "".join(pieces)
        masksets.append(MaskSet(doc.doc_id, tuple((s.start, s.end) for s in spans)))
    return sanitized, masksets


def write_sanitized(path, sanitized):
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, text in sanitized.items():
            fh.write(json.dumps({"doc_id": doc_id, "text": text}, ensure_ascii=False) + "\n")
