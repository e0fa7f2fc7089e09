"""Annotated documents, tokenization and corpus JSON I/O.

A corpus file is a JSON array of documents::

    [{"doc_id": "...", "text": "...", "target_name": "..." | null,
      "annotations": {"<annotator>": [{"start": 0, "end": 5,
                                        "semantic_type": "PERSON",
                                        "identifier_kind": "DIRECT",
                                        "confidential": false,
                                        "entity_id": "e1"}, ...]}}]

Offsets are character (code point) offsets into ``text``, end exclusive.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

logger = logging.getLogger(__name__)


class SemanticType(str, Enum):
    CODE = "CODE"
    ORG = "ORG"
    DATETIME = "DATETIME"
    LOC = "LOC"
    QUANTITY = "QUANTITY"
    PERSON = "PERSON"
    DEM = "DEM"
    MISC = "MISC"


class IdentifierKind(str, Enum):
    DIRECT = "DIRECT"
    QUASI = "QUASI"
    NO_MASK = "NO_MASK"


SEVERITY = {IdentifierKind.NO_MASK: 0, IdentifierKind.QUASI: 1, IdentifierKind.DIRECT: 2}
MASKED_KINDS = frozenset({IdentifierKind.DIRECT, IdentifierKind.QUASI})


class CorpusError(ValueError):
    """Schema or invariant violation while loading a corpus."""

    def __init__(self, message, doc_id=None, field=None):
        self.doc_id = doc_id
        self.field = field
        where = []
        if doc_id is not None:
            where.append(f"doc {doc_id!r}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    semantic_type: SemanticType
    identifier_kind: IdentifierKind
    confidential: bool = False
    entity_id: str = ""

    def to_json(self):
        return {
            "start": self.start,
            "end": self.end,
            "semantic_type": self.semantic_type.value,
            "identifier_kind": self.identifier_kind.value,
            "confidential": self.confidential,
            "entity_id": self.entity_id,
        }


@dataclass(frozen=True)
class AnnotationSet:
    annotator_id: str
    mentions: tuple[Mention, ...] = ()

    def __post_init__(self):
        mentions = tuple(sorted(self.mentions, key=lambda m: (m.start, m.end)))
        for prev, cur in zip(mentions, mentions[1:]):
            if cur.start < prev.end:
                raise CorpusError(
                    f"annotator {self.annotator_id!r} has overlapping mentions "
                    f"[{prev.start},{prev.end}) and [{cur.start},{cur.end})",
                    field="annotations",
                )
        object.__setattr__(self, "mentions", mentions)


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    target_name: str | None = None
    annotations: dict[str, AnnotationSet] = field(default_factory=dict)

    def to_json(self):
        return {
            "doc_id": self.doc_id,
            "text": self.text,
            "target_name": self.target_name,
            "annotations": {
                ann_id: [m.to_json() for m in ann.mentions]
                for ann_id, ann in self.annotations.items()
            },
        }


@dataclass(frozen=True)
class Token:
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class EntityCluster:
    entity_id: str
    mention_indices: tuple[int, ...]
    kind: IdentifierKind


# Letter/digit runs (combining marks kept inside the run), else one
# non-whitespace character.
_MARKS = "\u0300-\u036f\u1ab0-\u1aff\u1dc0-\u1dff\u20d0-\u20ff\ufe20-\ufe2f"
_TOKEN_RE = re.compile(rf"(?:[^\W_]|[{_MARKS}])+|\S")


def tokenize(text):
    return [Token(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]


def extract_clusters(annotation):
    """Group an annotator's mentions by entity id.

    Clusters come out in order of first mention. A cluster's kind is the
    most severe kind among its mentions (DIRECT > QUASI > NO_MASK).
    """
    members: dict[str, list[int]] = {}
    for i, m in enumerate(annotation.mentions):
        members.setdefault(m.entity_id, []).append(i)
    clusters = []
    for entity_id, idx in members.items():
        kind = max((annotation.mentions[i].identifier_kind for i in idx), key=SEVERITY.__getitem__)
        clusters.append(EntityCluster(entity_id, tuple(idx), kind))
    return clusters


_DOC_KEYS = {"doc_id", "text", "target_name", "annotations"}
_MENTION_KEYS = {"start", "end", "semantic_type", "identifier_kind", "confidential", "entity_id"}


def _parse_mention(raw, doc_id, text_len):
    if not isinstance(raw, dict):
        raise CorpusError("mention must be an object", doc_id, "annotations")
    unknown = set(raw) - _MENTION_KEYS
    if unknown:
        raise CorpusError(f"unknown mention keys {sorted(unknown)}", doc_id, sorted(unknown)[0])
    for key in _MENTION_KEYS:
        if key not in raw:
            raise CorpusError("missing", doc_id, key)
    start, end = raw["start"], raw["end"]
    for key, value in (("start", start), ("end", end)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise CorpusError(f"expected int, got {value!r}", doc_id, key)
    if not 0 <= start < end <= text_len:
        raise CorpusError(f"offsets [{start},{end}) out of range for text of length {text_len}", doc_id, "end")
    try:
        sem = SemanticType(raw["semantic_type"])
    except ValueError:
        raise CorpusError(f"unknown semantic type {raw['semantic_type']!r}", doc_id, "semantic_type") from None
    try:
        kind = IdentifierKind(raw["identifier_kind"])
    except ValueError:
        raise CorpusError(f"unknown identifier kind {raw['identifier_kind']!r}", doc_id, "identifier_kind") from None
    if not isinstance(raw["confidential"], bool):
        raise CorpusError("expected bool", doc_id, "confidential")
    entity_id = raw["entity_id"]
    if not isinstance(entity_id, str) or not entity_id:
        raise CorpusError("must be a non-empty string", doc_id, "entity_id")
    return Mention(start, end, sem, kind, raw["confidential"], entity_id)


def parse_document(raw):
    if not isinstance(raw, dict):
        raise CorpusError("document must be an object")
    doc_id = raw.get("doc_id")
    if not isinstance(doc_id, str):
        raise CorpusError("missing or non-string doc_id", field="doc_id")
    unknown = set(raw) - _DOC_KEYS
    if unknown:
        raise CorpusError(f"unknown keys {sorted(unknown)}", doc_id, sorted(unknown)[0])
    for key in _DOC_KEYS:
        if key not in raw:
            raise CorpusError("missing", doc_id, key)
    text = raw["text"]
    if not isinstance(text, str):
        raise CorpusError("expected string", doc_id, "text")
    target = raw["target_name"]
    if target is not None and not isinstance(target, str):
        raise CorpusError("expected string or null", doc_id, "target_name")
    if not isinstance(raw["annotations"], dict):
        raise CorpusError("expected object", doc_id, "annotations")
    annotations = {}
    for ann_id, mentions in raw["annotations"].items():
        if not isinstance(mentions, list):
            raise CorpusError(f"annotator {ann_id!r}: expected array", doc_id, "annotations")
        parsed = [_parse_mention(m, doc_id, len(text)) for m in mentions]
        try:
            annotations[ann_id] = AnnotationSet(ann_id, tuple(parsed))
        except CorpusError as exc:
            raise CorpusError(str(exc).split(": ", 1)[-1], doc_id, "annotations") from None
    return Document(doc_id, text, target, annotations)


def load_corpus(path):
    """Read a corpus file, validating every document."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, list):
        raise CorpusError(f"{path}: top level must be an array")
    docs = []
    seen = set()
    for item in raw:
        doc = parse_document(item)
        if doc.doc_id in seen:
            raise CorpusError("duplicate doc_id", doc.doc_id, "doc_id")
        seen.add(doc.doc_id)
        docs.append(doc)
    logger.info("loaded %d documents from %s", len(docs), path)
    return docs


def dumps_corpus(docs):
    return json.dumps([d.to_json() for d in docs], ensure_ascii=False, indent=1) + "\n"


def save_corpus(docs, path):
    Path(path).write_text(dumps_corpus(docs), encoding="utf-8")


@dataclass
class CorpusStats:
    documents: int
    mentions: int
    mentions_by_kind: dict[str, int]
    mentions_by_type: dict[str, int]
    mean_tokens: float


def corpus_stats(docs):
    by_kind = Counter({k.value: 0 for k in IdentifierKind})
    by_type = Counter({t.value: 0 for t in SemanticType})
    n_tokens = 0
    for doc in docs:
        n_tokens += len(tokenize(doc.text))
        for ann in doc.annotations.values():
            for m in ann.mentions:
                by_kind[m.identifier_kind.value] += 1
                by_type[m.semantic_type.value] += 1
    return CorpusStats(
        documents=len(docs),
        mentions=sum(by_kind.values()),
        mentions_by_kind=dict(by_kind),
        mentions_by_type=dict(by_type),
        mean_tokens=n_tokens / len(docs) if docs else 0.0,
    )


def _locate(text, span_text, start, end, byte_text):
    """Return character offsets for a TAB mention, or None.

    Tries character offsets first, then UTF-8 byte offsets.
    """
    if span_text is None:
        if 0 <= start < end <= len(text):
            return start, end
        return None
    if text[start:end] == span_text:
        return start, end
    if 0 <= start < end <= len(byte_text):
        piece = byte_text[start:end]
        if piece.decode("utf-8", errors="replace") == span_text:
            cstart = len(byte_text[:start].decode("utf-8", errors="replace"))
            return cstart, cstart + len(span_text)
    return None


def convert_tab(raw_docs):
    """Map the published TAB JSON layout onto this corpus schema.

    Field mapping: ``entity_type`` -> semantic_type, ``identifier_type`` ->
    identifier_kind, ``confidential_status != "NOT_CONFIDENTIAL"`` ->
    confidential, ``start_offset``/``end_offset`` -> start/end (character or
    UTF-8 byte offsets, detected per mention by comparing against
    ``span_text``). Mentions that cannot be located, or that overlap an
    earlier mention of the same annotator, are dropped and counted.

    Returns ``(documents, counters)``.
    """
    counters = Counter()
    docs = []
    for raw in raw_docs:
        doc_id = str(raw["doc_id"])
        text = raw["text"]
        byte_text = text.encode("utf-8")
        target = raw.get("target_name") or raw.get("target") or None
        annotations = {}
        for ann_id, payload in (raw.get("annotations") or {}).items():
            entries = payload.get("entity_mentions", []) if isinstance(payload, dict) else payload
            mentions = []
            for e in entries:
                loc = _locate(text, e.get("span_text"), int(e["start_offset"]), int(e["end_offset"]), byte_text)
                if loc is None:
                    counters["unlocated"] += 1
                    continue
                if loc != (int(e["start_offset"]), int(e["end_offset"])):
                    counters["byte_offsets"] += 1
                try:
                    sem = SemanticType(e["entity_type"])
                    kind = IdentifierKind(e.get("identifier_type", "NO_MASK").replace("NO-MASK", "NO_MASK"))
                except ValueError:
                    counters["unknown_label"] += 1
                    continue
                conf = e.get("confidential_status", "NOT_CONFIDENTIAL")
                entity_id = str(e.get("entity_id") or e.get("entity_mention_id") or f"{doc_id}:{loc[0]}")
                mentions.append(Mention(loc[0], loc[1], sem, kind, conf not in (None, "", "NOT_CONFIDENTIAL"), entity_id))
            mentions.sort(key=lambda m: (m.start, -m.end))
            kept = []
            for m in mentions:
                if kept and m.start < kept[-1].end:
                    counters["overlap_dropped"] += 1
                    continue
                kept.append(m)
            counters["mentions"] += len(kept)
            annotations[str(ann_id)] = AnnotationSet(str(ann_id), tuple(kept))
        docs.append(Document(doc_id, text, target, annotations))
    counters["documents"] = len(docs)
    return docs, counters
