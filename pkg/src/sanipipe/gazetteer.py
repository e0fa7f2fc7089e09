"""DEM/MISC gazetteers built from a Wikidata-style entity dump.

The dump is read line by line (``latest-all.json`` layout: one entity per
line inside a JSON array, trailing commas). Only humans (``P31`` = ``Q5``)
are inspected; values of the selected properties are resolved to labels
and normalised into two term sets.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .corpus import tokenize

logger = logging.getLogger(__name__)

CATEGORIES = ("DEM", "MISC")
HUMAN_QID = "Q5"
_PID_RE = re.compile(r"P[0-9]+\Z")


class GazetteerError(ValueError):
    pass


@dataclass(frozen=True)
class PropertySpec:
    property_id: str
    label: str
    category: str

    def __post_init__(self):
        if not _PID_RE.match(self.property_id):
            raise GazetteerError(f"bad property id {self.property_id!r}")
        if self.category not in CATEGORIES:
            raise GazetteerError(f"bad category {self.category!r} for {self.property_id}")


@dataclass
class Gazetteer:
    category: str | None
    terms: set[str] = field(default_factory=set)
    provenance: dict[str, set[str]] = field(default_factory=dict)

    def add(self, term, source):
        self.terms.add(term)
        self.provenance.setdefault(term, set()).add(source)

    def __len__(self):
        return len(self.terms)

    def __contains__(self, term):
        return term in self.terms


@dataclass(frozen=True)
class GazetteerMatch:
    start: int
    end: int
    category: str
    term: str


def data_path(name):
    """Filesystem path of a bundled data file (e.g. ``countries.txt``, ``toy/test.json``)."""
    return Path(str(resources.files("sanipipe").joinpath("data", *name.split("/"))))


def load_properties(path=None):
    """Read ``property_id<TAB>category<TAB>label`` lines; default is the bundled list."""
    if path is None:
        text = resources.files("sanipipe").joinpath("data/properties.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    specs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GazetteerError(f"{path or 'properties.tsv'}:{lineno}: expected 3 tab-separated fields")
        pid, category, label = parts
        try:
            specs.append(PropertySpec(pid.strip(), label.strip(), category.strip()))
        except GazetteerError as exc:
            raise GazetteerError(f"{path or 'properties.tsv'}:{lineno}: {exc}") from None
    return specs


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def normalize_term(term):
    """Case-fold, collapse whitespace, strip outer punctuation.

    Repeated until stable so that ``normalize_term`` is idempotent.
    """
    prev = None
    cur = term
    while cur != prev:
        prev = cur
        cur = " ".join(cur.casefold().split())
        i, j = 0, len(cur)
        while i < j and _is_punct(cur[i]):
            i += 1
        while j > i and _is_punct(cur[j - 1]):
            j -= 1
        cur = cur[i:j].strip()
    return cur


def is_excluded(term):
    """Single-token terms made only of digits, or of one character."""
    toks = tokenize(term)
    return len(toks) == 1 and (toks[0].surface.isdigit() or len(toks[0].surface) == 1)


def open_dump(path):
    """Text stream over a plain or gzip-compressed dump."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")


@dataclass
class ParseStats:
    lines: int = 0
    entities: int = 0
    humans: int = 0
    malformed: int = 0
    unresolved: int = 0
    unsupported: int = 0
    emitted: int = 0


def iter_entities(lines, stats=None):
    """Yield entity dicts from a line-delimited dump, skipping junk lines."""
    stats = stats if stats is not None else ParseStats()
    for line in lines:
        stats.lines += 1
        line = line.strip()
        if line.endswith(","):
            line = line[:-1]
        if not line or line in ("[", "]"):
            continue
        try:
            entity = json.loads(line)
        except json.JSONDecodeError:
            stats.malformed += 1
            continue
        if not isinstance(entity, dict):
            stats.malformed += 1
            continue
        stats.entities += 1
        yield entity


def _claim_values(claims, pid):
    for claim in claims.get(pid, ()) or ():
        try:
            snak = claim["mainsnak"]
        except (KeyError, TypeError):
            continue
        if snak.get("snaktype", "value") != "value":
            continue
        dv = snak.get("datavalue")
        if isinstance(dv, dict):
            yield dv


def is_human(entity):
    claims = entity.get("claims")
    if not isinstance(claims, dict):
        return False
    for dv in _claim_values(claims, "P31"):
        value = dv.get("value")
        if isinstance(value, dict) and value.get("id") == HUMAN_QID:
            return True
    return False


def entity_labels(entity, lang="en", aliases=False):
    """Main label in ``lang`` (plus aliases when asked)."""
    out = []
    label = (entity.get("labels") or {}).get(lang)
    if isinstance(label, dict) and label.get("value"):
        out.append(label["value"])
    if aliases:
        for alias in (entity.get("aliases") or {}).get(lang, ()) or ():
            if isinstance(alias, dict) and alias.get("value"):
                out.append(alias["value"])
    return out


def referenced_values(lines, specs, stats=None):
    """First pass: ids of items used as values of the selected properties on humans."""
    pids = {s.property_id for s in specs}
    needed = set()
    for entity in iter_entities(lines, stats):
        if not is_human(entity):
            continue
        claims = entity["claims"]
        for pid in [p for p in claims if p in pids]:
            for dv in _claim_values(claims, pid):
                value = dv.get("value")
                if dv.get("type") == "wikibase-entityid" and isinstance(value, dict) and "id" in value:
                    needed.add(value["id"])
                elif dv.get("type") == "quantity" and isinstance(value, dict):
                    unit = str(value.get("unit", "1"))
                    if unit != "1":
                        needed.add(unit.rsplit("/", 1)[-1])
    return needed


def build_label_index(lines, wanted, lang="en", aliases=False, stats=None):
    """Second pass: labels of the ``wanted`` item ids only."""
    index = {}
    for entity in iter_entities(lines, stats):
        qid = entity.get("id")
        if qid in wanted:
            names = entity_labels(entity, lang, aliases)
            if names:
                index[qid] = names
    return index


def _resolve(labels, qid):
    if callable(labels):
        names = labels(qid)
    else:
        names = labels.get(qid)
    if names is None:
        return []
    if isinstance(names, str):
        return [names]
    return list(names)


def parse_entity_stream(lines, specs, labels, lang="en", stats=None):
    """Yield ``(property_id, label)`` for every selected claim value on a human.

    ``labels`` maps an item id to a label or list of labels (or is a
    callable doing so). String and monolingual values are emitted as-is;
    quantities as ``amount unit``. Malformed lines and unresolvable ids are
    skipped and counted in ``stats``.
    """
    stats = stats if stats is not None else ParseStats()
    pids = {s.property_id for s in specs}
    for entity in iter_entities(lines, stats):
        if not is_human(entity):
            continue
        stats.humans += 1
        claims = entity["claims"]
        # claims are usually far fewer than selected properties
        for pid in [p for p in claims if p in pids]:
            for dv in _claim_values(claims, pid):
                kind = dv.get("type")
                value = dv.get("value")
                if kind == "wikibase-entityid" and isinstance(value, dict):
                    names = _resolve(labels, value.get("id"))
                    if not names:
                        stats.unresolved += 1
                    for name in names:
                        stats.emitted += 1
                        yield pid, name
                elif kind == "string" and isinstance(value, str):
                    stats.emitted += 1
                    yield pid, value
                elif kind == "monolingualtext" and isinstance(value, dict):
                    if value.get("language") == lang and value.get("text"):
                        stats.emitted += 1
                        yield pid, value["text"]
                elif kind == "quantity" and isinstance(value, dict):
                    amount = str(value.get("amount", "")).lstrip("+")
                    unit = str(value.get("unit", "1"))
                    if unit == "1":
                        text = amount
                    else:
                        names = _resolve(labels, unit.rsplit("/", 1)[-1])
                        if not names:
                            stats.unresolved += 1
                            continue
                        text = f"{amount} {names[0]}"
                    stats.emitted += 1
                    yield pid, text
                else:
                    stats.unsupported += 1


def build_gazetteer(values, specs):
    """Sort ``(property_id, label)`` pairs into DEM and MISC gazetteers.

    Returns ``(dem, misc, dropped)`` where ``dropped`` counts empty or
    excluded terms and values of unknown properties.
    """
    category_of = {s.property_id: s.category for s in specs}
    gaz = {c: Gazetteer(c) for c in CATEGORIES}
    dropped = Counter()
    for pid, label in values:
        category = category_of.get(pid)
        if category is None:
            dropped["unknown_property"] += 1
            continue
        term = normalize_term(label)
        if not term:
            dropped["empty"] += 1
            continue
        if is_excluded(term):
            dropped["excluded"] += 1
            continue
        gaz[category].add(term, pid)
    return gaz["DEM"], gaz["MISC"], dropped


def augment_dem(gaz, country_file):
    """Add one term per line of ``country_file`` with provenance ``manual:countries``."""
    path = Path(country_file)
    if not path.is_file():
        raise FileNotFoundError(f"country file not found: {path}")
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            continue
        term = normalize_term(line)
        if term and not is_excluded(term):
            gaz.add(term, "manual:countries")
    return gaz


def save_gazetteer(gaz, path):
    lines = [f"# sanipipe gazetteer: {gaz.category or ''} ({len(gaz)} terms)"]
    for term in sorted(gaz.terms):
        props = ",".join(sorted(gaz.provenance.get(term, ())))
        lines.append(f"{term}\t{gaz.category}\t{props}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gazetteer(path, category=None):
    """Read a gazetteer TSV. All lines must share one category."""
    gaz = Gazetteer(category)
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise GazetteerError(f"{path}:{lineno}: expected term<TAB>category<TAB>properties")
        term, cat, props = parts
        if cat not in CATEGORIES:
            raise GazetteerError(f"{path}:{lineno}: bad category {cat!r}")
        if gaz.category is None:
            gaz.category = cat
        elif cat != gaz.category:
            raise GazetteerError(f"{path}:{lineno}: category {cat} in a {gaz.category} gazetteer")
        if not term or normalize_term(term) != term:
            raise GazetteerError(f"{path}:{lineno}: term {term!r} is not normalised")
        gaz.terms.add(term)
        gaz.provenance[term] = {p for p in props.split(",") if p}
    return gaz


class GazetteerMatcher:
    """Token-trie over the terms of several gazetteers.

    A term matches a token range when the case-folded token surfaces agree
    and whitespace sits between the same tokens. Hence the matched text
    normalises back to the term.
    """

    def __init__(self, gazetteers):
        self._root: dict = {}
        self.max_len = 0
        for gaz in gazetteers:
            for term in gaz.terms:
                keys = _term_keys(term)
                if not keys:
                    continue
                node = self._root
                for key in keys:
                    node = node.setdefault(key, {})
                node.setdefault(None, set()).add((gaz.category, term))
                self.max_len = max(self.max_len, len(keys))

    def candidates(self, text, tokens):
        folded = [t.surface.casefold() for t in tokens]
        out = []
        for i in range(len(tokens)):
            node = self._root.get(folded[i])
            j = i
            while node is not None:
                for category, term in node.get(None, ()):
                    out.append(GazetteerMatch(tokens[i].start, tokens[j].end, category, term))
                j += 1
                if j >= len(tokens):
                    break
                gap = " " if tokens[j].start > tokens[j - 1].end else ""
                node = node.get(gap + folded[j])
        return out

    def match(self, text, tokens=None):
        if tokens is None:
            tokens = tokenize(text)
        return resolve_matches(self.candidates(text, tokens))


def _term_keys(term):
    toks = tokenize(term)
    keys = []
    for k, tok in enumerate(toks):
        gap = " " if k and tok.start > toks[k - 1].end else ""
        keys.append(gap + tok.surface)
    return keys


def resolve_matches(candidates):
    """Longest span wins, then leftmost, then DEM over MISC for the same span.

    A candidate survives only if no strictly longer candidate overlaps it.
    """
    if not candidates:
        return []
    starts = np.fromiter((c.start for c in candidates), dtype=np.int64, count=len(candidates))
    ends = np.fromiter((c.end for c in candidates), dtype=np.int64, count=len(candidates))
    rank = np.fromiter((CATEGORIES.index(c.category) for c in candidates), dtype=np.int64, count=len(candidates))
    keep = kernels.dominant_spans(starts, ends, rank)
    return sorted((c for c, k in zip(candidates, keep) if k), key=lambda c: (c.start, c.end))


def match_spans(text, tokens, gazetteers):
    return GazetteerMatcher(gazetteers).match(text, tokens)
