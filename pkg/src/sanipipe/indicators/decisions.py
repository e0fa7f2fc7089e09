"""Per-span verdicts emitted by the risk indicators."""

from __future__ import annotations

import json
from dataclasses import dataclass

INDICATORS = ("PROB", "SPANCLS", "PERTURB", "SEQLAB", "WEBSEARCH")


@dataclass(frozen=True)
class RiskDecision:
    doc_id: str
    start: int
    end: int
    indicator: str
    risky: bool
    score: float

    def __post_init__(self):
        if self.indicator not in INDICATORS:
            raise ValueError(f"unknown indicator {self.indicator!r}")

    @property
    def span(self):
        return (self.doc_id, self.start, self.end)

    def to_json(self):
        return {
            "doc_id": self.doc_id,
            "start": self.start,
            "end": self.end,
            "indicator": self.indicator,
            "risky": self.risky,
            "score": float(self.score),
        }


def write_decisions(path, decisions):
    with open(path, "w", encoding="utf-8") as fh:
        for d in decisions:
            fh.write(json.dumps(d.to_json(), ensure_ascii=False) + "\n")


def read_decisions(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(RiskDecision(obj["doc_id"], int(obj["start"]), int(obj["end"]),
                                        obj["indicator"], bool(obj["risky"]), float(obj["score"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
