"""Span verdicts from per-token MASK / NO_MASK predictions of a sequence labeller."""

from __future__ import annotations

import json

import numpy as np

from .. import kernels
from .decisions import RiskDecision
from .perturbation import token_spans

STRICT, PARTIAL = "STRICT", "PARTIAL"


def read_token_predictions(path):
    """``{"doc_id": ..., "labels": ["MASK" | "NO_MASK", ...]}`` per line."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                labels = obj["labels"]
                bad = set(labels) - {"MASK", "NO_MASK"}
                if bad:
                    raise ValueError(f"unknown labels {sorted(bad)}")
                out[obj["doc_id"]] = [lab == "MASK" for lab in labels]
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def seqlab_indicator(predictions, tokens, spans, mode=PARTIAL, doc_id=""):
    """Indices of risky spans.

    STRICT: every token the span overlaps is MASK. PARTIAL: at least one is.
    Spans overlapping no token are never risky.
    """
    if len(predictions) != len(tokens):
        raise ValueError(f"doc {doc_id!r}: {len(predictions)} token predictions for {len(tokens)} tokens")
    if mode not in (STRICT, PARTIAL):
        raise ValueError(f"unknown mode {mode!r}")
    if not spans:
        return set()
    ranges = token_spans(tokens, spans)
    first = np.array([r[0] for r in ranges], dtype=np.int64)
    stop = np.array([r[1] for r in ranges], dtype=np.int64)
    reduce = kernels.range_all if mode == STRICT else kernels.range_any
    flags = reduce(np.asarray(predictions, dtype=np.bool_), first, stop)
    return {k for k, f in enumerate(flags.tolist()) if f}


def seqlab_decisions(doc_id, predictions, tokens, spans, mode=PARTIAL):
    risky = seqlab_indicator(predictions, tokens, spans, mode, doc_id)
    ranges = token_spans(tokens, spans)
    out = []
    for k, (s, (i, j)) in enumerate(zip(spans, ranges)):
        frac = sum(predictions[i:j]) / (j - i) if j > i else 0.0
        out.append(RiskDecision(doc_id, s.start, s.end, "SEQLAB", k in risky, frac))
    return out
