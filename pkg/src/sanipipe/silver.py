"""Silver annotation: merge external NER spans with gazetteer matches, emit BIO."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import SemanticType, tokenize
from .gazetteer import GazetteerMatcher

logger = logging.getLogger(__name__)

SOURCES = ("NER", "GAZETTEER", "MODEL")


class SpanFileError(ValueError):
    pass


@dataclass(frozen=True)
class PredictedSpan:
    start: int
    end: int
    label: SemanticType
    source: str = "NER"

    def to_json(self):
        return {"start": self.start, "end": self.end, "label": self.label.value}


def from_gazetteer(matches):
    return [PredictedSpan(m.start, m.end, SemanticType(m.category), "GAZETTEER") for m in matches]


def merge_annotations(ner, gaz):
    """Union of NER spans and gazetteer matches without overlaps.

    Spans are taken longest first; on equal length NER beats the gazetteer,
    then the leftmost span wins. A span is dropped only when it overlaps an
    already accepted one.
    """
    gaz = [g if isinstance(g, PredictedSpan) else from_gazetteer([g])[0] for g in gaz]
    pool = list(ner) + gaz
    if not pool:
        return []
    starts = np.array([s.start for s in pool], dtype=np.int64)
    ends = np.array([s.end for s in pool], dtype=np.int64)
    is_gaz = np.array([s.source == "GAZETTEER" for s in pool], dtype=np.int64)
    order = np.lexsort((starts, is_gaz, -(ends - starts)))
    keep = kernels.greedy_spans(starts, ends, order)
    return sorted((s for s, k in zip(pool, keep) if k), key=lambda s: (s.start, s.end))


def snap_to_tokens(spans, tokens):
    """Token index ranges ``[first, stop)`` covering each span (snapped outward)."""
    if not spans:
        return []
    first, stop = kernels.token_ranges(
        [t.start for t in tokens], [t.end for t in tokens], [s.start for s in spans], [s.end for s in spans]
    )
    return list(zip(first.tolist(), stop.tolist()))


def bio_tags(tokens, spans):
    tags = ["O"] * len(tokens)
    for span, (first, stop) in zip(spans, snap_to_tokens(spans, tokens)):
        free = [t for t in range(first, stop) if tags[t] == "O"]
        for k, t in enumerate(free):
            tags[t] = ("B-" if k == 0 or free[k - 1] != t - 1 else "I-") + span.label.value
    return tags


def emit_bio(doc, spans, tokens=None):
    """``token<TAB>tag`` lines for one document (no trailing blank line)."""
    if tokens is None:
        tokens = tokenize(doc.text)
    return [f"{tok.surface}\t{tag}" for tok, tag in zip(tokens, bio_tags(tokens, spans))]


def decode_bio(tags):
    """Token ranges and labels encoded by a BIO sequence."""
    out = []
    cur = None
    for i, tag in enumerate(tags):
        if tag.startswith("B-") or (tag.startswith("I-") and (cur is None or cur[2] != tag[2:])):
            if cur is not None:
                out.append(tuple(cur))
            cur = [i, i + 1, tag[2:]]
        elif tag.startswith("I-"):
            cur[1] = i + 1
        else:
            if cur is not None:
                out.append(tuple(cur))
            cur = None
    if cur is not None:
        out.append(tuple(cur))
    return out


def read_span_file(path, source="NER"):
    """Read ``{"doc_id", "spans": [{"start", "end", "label"}]}`` JSONL."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id = obj["doc_id"]
                spans = [
                    PredictedSpan(int(s["start"]), int(s["end"]), SemanticType(s["label"]), source)
                    for s in obj["spans"]
                ]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise SpanFileError(f"{path}:{lineno}: {exc}") from None
            if doc_id in out:
                raise SpanFileError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
            out[doc_id] = sorted(spans, key=lambda s: (s.start, s.end))
    return out


def validate_spans(doc, spans):
    prev_end = 0
    for s in spans:
        if not 0 <= s.start < s.end <= len(doc.text):
            raise SpanFileError(f"doc {doc.doc_id!r}: span [{s.start},{s.end}) out of range")
        if s.start < prev_end:
            raise SpanFileError(f"doc {doc.doc_id!r}: overlapping span at [{s.start},{s.end})")
        prev_end = s.end


def write_span_file(path, items):
    """``items``: iterable of ``(doc_id, spans)`` written in the given order."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, spans in items:
            fh.write(json.dumps({"doc_id": doc_id, "spans": [s.to_json() for s in spans]}, ensure_ascii=False) + "\n")


def _resolve_internal(spans):
    # NER files may contain nested entities; keep a non-overlapping subset.
    return merge_annotations(spans, [])


def build_silver_corpus(docs, ner_file, gazetteers, out_path, spans_out=None):
    """Merge NER and gazetteer spans for every document and write BIO.

    Returns a report dict with per-label and per-source span counts.
    """
    ner = read_span_file(ner_file, "NER") if ner_file is not None else {}
    known = {d.doc_id for d in docs}
    missing = sorted(set(ner) - known)
    if missing:
        raise SpanFileError(f"NER file references unknown documents: {', '.join(missing)}")
    matcher = GazetteerMatcher(gazetteers)
    by_label = Counter()
    by_source = Counter()
    merged_all = []
    with open(out_path, "w", encoding="utf-8") as fh:
        for k, doc in enumerate(docs):
            tokens = tokenize(doc.text)
            gaz_spans = from_gazetteer(matcher.match(doc.text, tokens))
            merged = merge_annotations(_resolve_internal(ner.get(doc.doc_id, [])), gaz_spans)
            for s in merged:
                by_label[s.label.value] += 1
                by_source[s.source] += 1
            if k:
                fh.write("\n")
            lines = emit_bio(doc, merged, tokens)
            if lines:
                fh.write("\n".join(lines) + "\n")
            merged_all.append((doc.doc_id, merged))
    if spans_out is not None:
        write_span_file(spans_out, merged_all)
    report = {
        "documents": len(docs),
        "spans": sum(by_label.values()),
        "by_label": dict(sorted(by_label.items())),
        "by_source": dict(sorted(by_source.items())),
    }
    logger.info("silver corpus: %s", report)
    return report
