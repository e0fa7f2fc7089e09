"""Privacy-oriented evaluation of masking decisions against gold annotations.

All scores are micro-averaged: raw counts are pooled over every
(document, annotator) pair before dividing. Undefined ratios (0/0) are
reported as 1.0 for precision and recall and listed in ``undefined``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .corpus import MASKED_KINDS, IdentifierKind, SemanticType, extract_clusters, tokenize

REPORT_COLUMNS = ("config", "P", "Pw", "R_all", "F1", "R_ent", "R_direct", "R_quasi")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class MaskSet:
    doc_id: str
    spans: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        spans = sorted((int(s), int(e)) for s, e in self.spans)
        for s, e in spans:
            if not 0 <= s < e:
                raise EvaluationError(f"doc {self.doc_id!r}: bad mask span [{s},{e})")
        merged = []
        for s, e in spans:
            if merged and s < merged[-1][1]:
                merged[-1] = (merged[-1][0], max(e, merged[-1][1]))
            else:
                merged.append((s, e))
        object.__setattr__(self, "spans", tuple(merged))

    def to_json(self):
        return {"doc_id": self.doc_id, "masks": [list(s) for s in self.spans]}


def read_masksets(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ms = MaskSet(obj["doc_id"], tuple(tuple(m) for m in obj["masks"]))
            except (ValueError, KeyError, TypeError) as exc:
                raise EvaluationError(f"{path}:{lineno}: {exc}") from None
            out[ms.doc_id] = ms
    return out


def write_masksets(path, masksets):
    with open(path, "w", encoding="utf-8") as fh:
        for ms in masksets:
            fh.write(json.dumps(ms.to_json()) + "\n")


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.append(name)
        return 1.0
    return num / den


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


class DocView:
    """Per-document arrays reused across many system outputs."""

    def __init__(self, doc, weights=None):
        self.doc = doc
        self.tokens = tokenize(doc.text)
        self.tok_starts = np.array([t.start for t in self.tokens], dtype=np.int64)
        self.tok_ends = np.array([t.end for t in self.tokens], dtype=np.int64)
        self.weights = None if weights is None else np.asarray(weights, dtype=np.float64)
        self.gold = {}
        self.clusters = {}
        for ann_id, ann in doc.annotations.items():
            masked = [m for m in ann.mentions if m.identifier_kind in MASKED_KINDS]
            self.gold[ann_id] = self.token_mask([(m.start, m.end) for m in masked])
            clusters = []
            for c in extract_clusters(ann):
                ms = [ann.mentions[i] for i in c.mention_indices]
                clusters.append((c.kind, np.array([m.start for m in ms]), np.array([m.end for m in ms])))
            self.clusters[ann_id] = clusters

    def token_mask(self, spans):
        if not spans:
            return np.zeros(len(self.tokens), dtype=np.bool_)
        return kernels.token_overlap_mask(self.tok_starts, self.tok_ends, [s for s, _ in spans], [e for _, e in spans])


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    w_tp: float = 0.0
    w_sys: float = 0.0
    ent: Counter = field(default_factory=Counter)

    def add(self, other):
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.w_tp += other.w_tp
        self.w_sys += other.w_sys
        self.ent.update(other.ent)
        return self


def count_document(view, spans, with_weights=False):
    """Pooled counts for one document over all of its annotators."""
    counts = Counter()
    out = Counts(ent=counts)
    sys_mask = view.token_mask(spans)
    ms = np.array([s for s, _ in spans], dtype=np.int64)
    me = np.array([e for _, e in spans], dtype=np.int64)
    for ann_id, gold in view.gold.items():
        out.tp += int(np.count_nonzero(sys_mask & gold))
        out.fp += int(np.count_nonzero(sys_mask & ~gold))
        out.fn += int(np.count_nonzero(~sys_mask & gold))
        if with_weights:
            w = view.weights
            out.w_tp += float(w[sys_mask & gold].sum())
            out.w_sys += float(w[sys_mask].sum())
        for kind, cs, ce in view.clusters[ann_id]:
            if kind not in MASKED_KINDS:
                continue
            protected = bool(kernels.fully_covered(ms, me, cs, ce, len(view.doc.text)).all())
            for key in (kind.value, "ALL"):
                counts[key + "_total"] += 1
                counts[key + "_protected"] += int(protected)
    return out


@dataclass
class MetricsReport:
    config: str
    P: float
    Pw: float
    R_all: float
    F1: float
    R_ent: float
    R_direct: float
    R_quasi: float
    counts: dict = field(default_factory=dict)
    undefined: list = field(default_factory=list)
    weights: str = "uniform"

    def row(self):
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def metrics_from_counts(counts, config="", weights="uniform"):
    undefined = []
    p = _ratio(counts.tp, counts.tp + counts.fp, "P", undefined)
    pw = _ratio(counts.w_tp, counts.w_sys, "Pw", undefined)
    r = _ratio(counts.tp, counts.tp + counts.fn, "R_all", undefined)
    ent = counts.ent
    r_ent = _ratio(ent["ALL_protected"], ent["ALL_total"], "R_ent", undefined)
    r_dir = _ratio(ent["DIRECT_protected"], ent["DIRECT_total"], "R_direct", undefined)
    r_qua = _ratio(ent["QUASI_protected"], ent["QUASI_total"], "R_quasi", undefined)
    raw = {"tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "w_tp": counts.w_tp, "w_sys": counts.w_sys}
    raw.update({k: ent[k] for k in sorted(ent)})
    return MetricsReport(config, p, pw, r, _f1(p, r), r_ent, r_dir, r_qua, raw, undefined, weights)


def _views(docs, scorer=None):
    views = []
    for doc in docs:
        weights = None
        if scorer is not None:
            from .scorer import token_weights

            weights = token_weights(scorer, [t.surface for t in tokenize(doc.text)])
        views.append(DocView(doc, weights))
    return views


def _spans_for(views, masksets):
    known = {v.doc.doc_id for v in views}
    unknown = sorted(set(masksets) - known)
    if unknown:
        raise EvaluationError(f"system output for unknown documents: {', '.join(unknown)}")
    missing = sorted(known - set(masksets))
    if missing:
        raise EvaluationError(f"no system output for documents: {', '.join(missing)}")
    return [list(masksets[v.doc.doc_id].spans) for v in views]


def evaluate_views(views, masksets, config="", weights="uniform"):
    total = Counts()
    with_weights = all(v.weights is not None for v in views)
    for view, spans in zip(views, _spans_for(views, masksets)):
        total.add(count_document(view, spans, with_weights))
    if not with_weights:
        total.w_tp, total.w_sys = float(total.tp), float(total.tp + total.fp)
    return metrics_from_counts(total, config, weights)


def report(docs, masksets, scorer=None, config=""):
    """Table-style metrics for one system configuration.

    Without a scorer, token weights are uniform and ``Pw`` equals ``P``.
    """
    name = "uniform" if scorer is None else getattr(scorer, "name", type(scorer).__name__)
    return evaluate_views(_views(docs, scorer), masksets, config, name)


def token_prf(docs, masksets):
    rep = report(docs, masksets)
    return rep.P, rep.R_all, rep.F1


def weighted_precision(docs, masksets, scorer):
    return report(docs, masksets, scorer).Pw


def entity_recall(docs, masksets, kind="ALL"):
    rep = report(docs, masksets)
    kind = kind.value if isinstance(kind, IdentifierKind) else kind
    return {"ALL": rep.R_ent, "DIRECT": rep.R_direct, "QUASI": rep.R_quasi}[kind]


def write_report_csv(path, reports):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            writer.writerow([rep.config] + [f"{getattr(rep, k):.4f}" for k in REPORT_COLUMNS[1:]])


def write_report_json(path, reports):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in reports], fh, indent=2, sort_keys=True)
        fh.write("\n")


def _typed_tokens(view, spans):
    """Token -> semantic type (None where uncovered)."""
    out = [None] * len(view.tokens)
    if not spans:
        return out
    first, stop = kernels.token_ranges(view.tok_starts, view.tok_ends, [s[0] for s in spans], [s[1] for s in spans])
    for (s, e, label), f, t in zip(spans, first.tolist(), stop.tolist()):
        for k in range(f, t):
            out[k] = label
    return out


def er_token_scores(docs, predictions):
    """Token-level P/R/F1 of a PII recogniser against every annotator's spans.

    ``predictions`` maps doc_id to ``(start, end, SemanticType)`` triples.
    Returns ``{"per_type": {type: (p, r, f1)}, "micro_label": (p, r, f1),
    "micro_pii": (p, r, f1)}``; ``micro_pii`` ignores the type.
    """
    per = {t.value: Counter() for t in SemanticType}
    lab = Counter()
    pii = Counter()
    for doc in docs:
        view = DocView(doc)
        pred = _typed_tokens(view, [(s, e, SemanticType(l).value) for s, e, l in predictions.get(doc.doc_id, [])])
        for ann in doc.annotations.values():
            gold = _typed_tokens(view, [(m.start, m.end, m.semantic_type.value) for m in ann.mentions])
            for g, p in zip(gold, pred):
                if g is not None and p is not None:
                    pii["tp"] += 1
                    if g == p:
                        lab["tp"] += 1
                        per[g]["tp"] += 1
                    else:
                        lab["fp"] += 1
                        lab["fn"] += 1
                        per[p]["fp"] += 1
                        per[g]["fn"] += 1
                elif g is not None:
                    pii["fn"] += 1
                    lab["fn"] += 1
                    per[g]["fn"] += 1
                elif p is not None:
                    pii["fp"] += 1
                    lab["fp"] += 1
                    per[p]["fp"] += 1

    def prf(c):
        und = []
        p = _ratio(c["tp"], c["tp"] + c["fp"], "P", und)
        r = _ratio(c["tp"], c["tp"] + c["fn"], "R", und)
        return p, r, _f1(p, r)

    return {
        "per_type": {t: prf(c) for t, c in per.items()},
        "micro_label": prf(lab),
        "micro_pii": prf(pii),
    }


def label_confusion(docs, predictions):
    """Counts of (gold type, predicted type) over tokens carrying both, most frequent first."""
    pairs = Counter()
    for doc in docs:
        view = DocView(doc)
        pred = _typed_tokens(view, [(s, e, SemanticType(l).value) for s, e, l in predictions.get(doc.doc_id, [])])
        for ann in doc.annotations.values():
            gold = _typed_tokens(view, [(m.start, m.end, m.semantic_type.value) for m in ann.mentions])
            for g, p in zip(gold, pred):
                if g is not None and p is not None:
                    pairs[(g, p)] += 1
    return sorted(pairs.items(), key=lambda kv: (-kv[1], kv[0]))


def is_consistent(rep, tol=1e-12):
    """F1 agrees with P and R_all and all values lie in [0, 1]."""
    vals = [getattr(rep, k) for k in REPORT_COLUMNS[1:]]
    return all(0.0 <= v <= 1.0 for v in vals) and math.isclose(rep.F1, _f1(rep.P, rep.R_all), abs_tol=tol)


def mask_all_mentions(docs):
    """Majority-rule baseline: mask every annotated span of every annotator."""
    return {
        doc.doc_id: MaskSet(doc.doc_id, tuple((m.start, m.end) for ann in doc.annotations.values() for m in ann.mentions))
        for doc in docs
    }
