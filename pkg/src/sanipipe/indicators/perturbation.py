"""Perturbation influence: how much masking one entity hurts predicting another span."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..evaluation import Counts, DocView, count_document, metrics_from_counts
from ..scorer import MASK, ScoreRequest
from .decisions import RiskDecision

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InfluenceRecord:
    target: int
    cluster: str
    delta: float


@dataclass(frozen=True)
class TuningScore:
    threshold: float
    precision: float
    recall_direct: float
    recall_quasi: float

    @property
    def objective(self):
        return self.precision + self.recall_direct + self.recall_quasi


def token_spans(tokens, spans):
    if not spans:
        return []
    first, stop = kernels.token_ranges([t.start for t in tokens], [t.end for t in tokens],
                                       [s.start for s in spans], [s.end for s in spans])
    return list(zip(first.tolist(), stop.tolist()))


def assign_clusters(doc, spans, annotator=None):
    """Entity id for each span: the best-overlapping gold mention, else its surface form."""
    ann = None
    if doc.annotations:
        ann = doc.annotations[annotator or sorted(doc.annotations)[0]]
    out = []
    for s in spans:
        best, best_ov = None, 0
        for m in ann.mentions if ann else ():
            ov = min(s.end, m.end) - max(s.start, m.start)
            if ov > best_ov:
                best, best_ov = m.entity_id, ov
        out.append(best if best is not None else "surface:" + " ".join(doc.text[s.start:s.end].lower().split()))
    return out


def _mean(values):
    return sum(values) / len(values)


def perturb_influence(tokens, spans, clusters, scorer, target, ranges=None):
    """Influence of every other entity cluster on span ``target``.

    ``delta = mean logprob(target | target masked)
            - mean logprob(target | target and all mentions of C masked)``
    """
    ranges = ranges if ranges is not None else token_spans(tokens, spans)
    ti, tj = ranges[target]
    if ti >= tj:
        return []
    surfaces = [t.surface for t in tokens]
    others = []
    for cid in dict.fromkeys(clusters):
        if cid == clusters[target]:
            continue
        masked = list(surfaces)
        for k, c in enumerate(clusters):
            if c == cid:
                i, j = ranges[k]
                for p in range(i, j):
                    if not ti <= p < tj:
                        masked[p] = MASK
        others.append((cid, masked))
    if not others:
        return []
    reqs = [ScoreRequest(f"base{target}", tuple(surfaces), (ti, tj))]
    reqs += [ScoreRequest(f"t{target}c{n}", tuple(m), (ti, tj)) for n, (_, m) in enumerate(others)]
    results = scorer.score_many(reqs)
    base = _mean(results[0])
    return [InfluenceRecord(target, cid, base - _mean(lp)) for (cid, _), lp in zip(others, results[1:])]


def influence_table(tokens, spans, clusters, scorer):
    ranges = token_spans(tokens, spans)
    records = []
    for target in range(len(spans)):
        records.extend(perturb_influence(tokens, spans, clusters, scorer, target, ranges))
    return records


def cluster_max_delta(records, clusters):
    """Largest influence each cluster exerts on a span of another cluster."""
    best = {}
    for r in records:
        if clusters[r.target] == r.cluster:
            continue
        best[r.cluster] = max(best.get(r.cluster, -math.inf), r.delta)
    return best


def risky_from_records(records, clusters, t):
    best = cluster_max_delta(records, clusters)
    risky_clusters = {c for c, d in best.items() if d > t}
    return {k for k, c in enumerate(clusters) if c in risky_clusters}


def perturb_indicator(tokens, spans, clusters, scorer, t, records=None):
    """Indices of risky spans: every mention of a cluster whose influence on some other span exceeds ``t``."""
    if records is None:
        records = influence_table(tokens, spans, clusters, scorer)
    return risky_from_records(records, clusters, t)


def perturb_decisions(doc_id, spans, clusters, records, t):
    best = cluster_max_delta(records, clusters)
    out = []
    for s, c in zip(spans, clusters):
        score = best.get(c, 0.0)
        out.append(RiskDecision(doc_id, s.start, s.end, "PERTURB", c in best and best[c] > t, score))
    return out


def candidate_thresholds(items):
    """Thresholds at which the risky set changes, plus one below all and +inf.

    ``items``: per document ``(spans, clusters, records)``.
    """
    maxima = set()
    for _, clusters, records in items:
        maxima.update(cluster_max_delta(records, clusters).values())
    cands = sorted(maxima)
    if cands:
        cands.insert(0, float(np.nextafter(cands[0], -np.inf)))
    cands.append(math.inf)
    return cands


def tune_threshold(docs, items, views=None):
    """Threshold maximising precision + direct recall + quasi recall on ``docs``.

    ``items`` aligns with ``docs``: ``(spans, clusters, records)``. Ties go to
    the smallest threshold. Returns ``(best, sweep)``.
    """
    views = views if views is not None else [DocView(d) for d in docs]
    cands = candidate_thresholds(items)
    if len(cands) == 1:
        warnings.warn("no influence records: threshold fixed at +inf", stacklevel=2)
    sweep = []
    for t in cands:
        total = Counts()
        for view, (spans, clusters, records) in zip(views, items):
            risky = risky_from_records(records, clusters, t)
            total.add(count_document(view, [(spans[k].start, spans[k].end) for k in sorted(risky)]))
        rep = metrics_from_counts(total)
        sweep.append(TuningScore(t, rep.P, rep.R_direct, rep.R_quasi))
    best = max(sweep, key=lambda s: (s.objective, -s.threshold))
    return best, sweep


def write_sweep_csv(path, sweep):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "recall_direct", "recall_quasi", "objective"])
        for s in sweep:
            writer.writerow([repr(s.threshold), f"{s.precision:.6f}", f"{s.recall_direct:.6f}",
                             f"{s.recall_quasi:.6f}", f"{s.objective:.6f}"])
