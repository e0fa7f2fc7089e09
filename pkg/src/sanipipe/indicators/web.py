"""Web-search risk: shared URLs with the protected person, or raw hit counts."""

from __future__ import annotations

from ..websearch import normalize_url
from .decisions import RiskDecision


def websearch_url_indicator(span_urls, person_urls, span=("", 0, 0)):
    """Risky iff the span's result URLs and the person's URLs intersect."""
    shared = {normalize_url(u) for u in span_urls} & {normalize_url(u) for u in person_urls}
    doc_id, start, end = span
    return RiskDecision(doc_id, start, end, "WEBSEARCH", bool(shared), float(len(shared)))


def websearch_hits_indicator(total_hits, lower=100, upper=None, span=("", 0, 0), inclusive=True):
    if total_hits < 0:
        raise ValueError("total_hits must be non-negative")
    above = total_hits >= lower if inclusive else total_hits > lower
    below = upper is None or total_hits <= upper
    doc_id, start, end = span
    return RiskDecision(doc_id, start, end, "WEBSEARCH", above and below, float(total_hits))
