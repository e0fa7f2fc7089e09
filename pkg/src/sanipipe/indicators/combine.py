"""k-of-n voting over indicator decisions."""

from __future__ import annotations

import warnings
from collections import defaultdict

from .decisions import INDICATORS


def combine(decisions, k):
    """Spans ``(doc_id, start, end)`` flagged risky by at least ``k`` indicators."""
    if not 1 <= k <= len(INDICATORS):
        raise ValueError(f"k must be in 1..{len(INDICATORS)}, got {k}")
    votes = defaultdict(set)
    seen = defaultdict(set)
    indicators = set()
    for d in decisions:
        if d.indicator in seen[d.span]:
            raise ValueError(f"indicator {d.indicator} voted twice on span {d.span}")
        seen[d.span].add(d.indicator)
        indicators.add(d.indicator)
        if d.risky:
            votes[d.span].add(d.indicator)
    if k > len(indicators):
        warnings.warn(f"k={k} exceeds the {len(indicators)} indicators supplied; nothing can be risky", stacklevel=2)
    return {span for span, v in votes.items() if len(v) >= k}
