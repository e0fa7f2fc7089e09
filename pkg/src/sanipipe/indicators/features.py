"""Feature rows for the probability and span-classification indicators.

Column layouts (numeric columns first, standardised at training time):

    PROB     p_min p_max p_avg p_mdn p_sum | one-hot type (8)
    SPANCLS  p_min p_max p_avg p_mdn p_sum nb_w nb_sw | one-hot type (8) | text (D)
"""

from __future__ import annotations

import hashlib
import statistics
from dataclasses import dataclass

import numpy as np

from ..corpus import SemanticType, tokenize
from ..scorer import span_logprobs

TYPES = tuple(SemanticType)
TEXT_DIM = 1024


@dataclass(frozen=True)
class Layout:
    name: str
    n_numeric: int
    text_dim: int = 0

    @property
    def width(self):
        return self.n_numeric + len(TYPES) + self.text_dim


PROB = Layout("PROB", 5)


def spancls_layout(text_dim=TEXT_DIM):
    return Layout("SPANCLS", 7, text_dim)


@dataclass(frozen=True)
class FeatureVector:
    p_min: float
    p_max: float
    p_avg: float
    p_mdn: float
    p_sum: float
    nb_w: int
    nb_sw: int
    pii_type: SemanticType
    text_features: np.ndarray | None = None

    def __post_init__(self):
        if self.nb_w < 1 or self.nb_sw < 0:
            raise ValueError(f"bad word counts nb_w={self.nb_w} nb_sw={self.nb_sw}")
        if not (self.p_min <= self.p_mdn <= self.p_max and self.p_min <= self.p_avg <= self.p_max):
            raise ValueError("aggregates out of order")

    def row(self, layout):
        onehot = [1.0 if t is self.pii_type else 0.0 for t in TYPES]
        aggs = [self.p_min, self.p_max, self.p_avg, self.p_mdn, self.p_sum]
        if layout.name == "PROB":
            return np.array(aggs + onehot, dtype=np.float64)
        if self.text_features is None or len(self.text_features) != layout.text_dim:
            raise ValueError(f"{layout.name} layout needs a text block of width {layout.text_dim}")
        return np.concatenate([aggs + [self.nb_w, self.nb_sw] + onehot, self.text_features]).astype(np.float64)


def aggregate_logprobs(lp):
    """(min, max, mean, median, sum) of a non-empty list of log-probabilities."""
    lp = [float(v) for v in lp]
    if not lp:
        raise ValueError("cannot aggregate an empty list of log-probabilities")
    total = sum(lp)
    mean = total / len(lp)
    lo, hi = min(lp), max(lp)
    # floating error must not push the mean outside [min, max]
    mean = min(max(mean, lo), hi)
    return lo, hi, mean, statistics.median(lp), total


def _stable_hash(word):
    return int.from_bytes(hashlib.blake2b(word.encode("utf-8"), digest_size=8).digest(), "little")


def span_text_features(surface, dim=TEXT_DIM):
    """Hashed bag of lowercase words, L2-normalised (zero vector for no words)."""
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokenize(surface.lower()):
        if any(ch.isalnum() for ch in tok.surface):
            vec[_stable_hash(tok.surface) % dim] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def feature_vector(logprobs, nb_w, pii_type, surface=None, text_dim=None):
    """Build a row from a scorer's output for one span.

    ``nb_sw`` counts the values beyond one per word (subword pieces reported
    by an external scorer); the n-gram scorer always yields zero.
    """
    lo, hi, mean, mdn, total = aggregate_logprobs(logprobs)
    text = span_text_features(surface, text_dim) if text_dim else None
    return FeatureVector(lo, hi, mean, mdn, total, nb_w, max(0, len(logprobs) - nb_w),
                         SemanticType(pii_type), text)


def span_features(scorer, tokens, token_range, pii_type, surface, text_dim=None):
    lp = span_logprobs(scorer, tokens, token_range)
    return feature_vector(lp, token_range[1] - token_range[0], pii_type, surface, text_dim)
