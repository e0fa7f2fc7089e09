"""Log-probabilities of a span given its context, with the span masked.

Two backends share one interface (``score_many``):

* ``NGramScorer``: word n-gram with add-k smoothing and back-off to shorter
  histories when a history was never seen. Offline and fast.
* ``ExternalScorer``: any process or TCP endpoint speaking JSONL::

      -> {"id": "r1", "tokens": ["a", "b", "c"], "mask": [1, 3]}
      <- {"id": "r1", "logprobs": [-0.7, -2.3]}

  one natural-log value per token of the mask range. Responses may arrive
  out of order; they are matched by id.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
import shlex
import socket
import subprocess
import threading
from collections import Counter
from concurrent.futures import Future
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass
from pathlib import Path

from .corpus import tokenize

logger = logging.getLogger(__name__)

MASK = "<mask>"
UNK = "<unk>"
BOS = "<s>"
# Used only when add_k == 0 leaves an event with zero probability.
LOG_FLOOR = math.log(1e-12)
MODEL_MAGIC = "#sanipipe-ngram"
MODEL_VERSION = 1


class ScorerError(RuntimeError):
    def __init__(self, message, request_id=None):
        self.request_id = request_id
        super().__init__(f"request {request_id}: {message}" if request_id is not None else message)


class ScorerTimeout(ScorerError):
    pass


class MalformedResponse(ScorerError):
    pass


class ResponseIdMismatch(ScorerError):
    pass


class LengthMismatch(ScorerError):
    pass


@dataclass(frozen=True)
class ScoreRequest:
    request_id: str
    tokens: tuple[str, ...]
    span: tuple[int, int]

    def __post_init__(self):
        i, j = self.span
        if not 0 <= i < j <= len(self.tokens):
            raise ValueError(f"bad span range {self.span} for {len(self.tokens)} tokens")

    def to_json(self):
        return {"id": self.request_id, "tokens": list(self.tokens), "mask": list(self.span)}


@dataclass(frozen=True)
class ScoreResponse:
    request_id: str
    logprobs: tuple[float, ...]


def _check_response(req, values):
    values = list(values)
    i, j = req.span
    if len(values) != j - i:
        raise LengthMismatch(f"expected {j - i} logprobs, got {len(values)}", req.request_id)
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v > 0:
            raise MalformedResponse(f"invalid logprob {v!r}", req.request_id)
    return [float(v) for v in values]


_request_ids = itertools.count()


def span_logprobs(scorer, tokens, span_range):
    """Logprob of each token in ``span_range`` with the span masked."""
    req = ScoreRequest(f"q{next(_request_ids)}", tuple(tokens), tuple(span_range))
    return scorer.score_many([req])[0]


def token_information_content(scorer, tokens, index):
    return max(0.0, -span_logprobs(scorer, tokens, (index, index + 1))[0])


def token_weights(scorer, tokens):
    """Information content of every token, scored one at a time."""
    if not tokens:
        return []
    reqs = [ScoreRequest(f"w{i}", tuple(tokens), (i, i + 1)) for i in range(len(tokens))]
    return [max(0.0, -lp[0]) for lp in scorer.score_many(reqs)]


class NGramScorer:
    """Add-k word n-gram with back-off on unseen histories.

    ``P(v | h) = (c(h, v) + k) / (c(h) + k |V|)`` using the longest suffix of
    ``h`` seen in training (the empty history gives the unigram estimate).
    ``V`` holds the training types plus ``<unk>``; unknown tokens and mask
    placeholders in the history map to ``<unk>``. Within a masked span the
    positions before the scored token are filled in left to right.
    """

    name = "ngram"

    def __init__(self, order=3, add_k=0.1, lowercase=True):
        if order < 1:
            raise ValueError("order must be >= 1")
        if add_k < 0:
            raise ValueError("add_k must be >= 0")
        self.order = order
        self.add_k = float(add_k)
        self.lowercase = lowercase
        self.counts: Counter = Counter()
        self.context: Counter = Counter()
        self.vocab: set[str] = {UNK}

    def _norm(self, tok):
        if tok == MASK:
            return UNK
        tok = tok.lower() if self.lowercase else tok
        return tok if tok in self.vocab else UNK

    def fit(self, sequences):
        n = self.order
        total = 0
        for seq in sequences:
            seq = [t.lower() if self.lowercase else t for t in seq]
            self.vocab.update(seq)
            padded = [BOS] * (n - 1) + seq
            for p in range(n - 1, len(padded)):
                for L in range(0, n):
                    hist = tuple(padded[p - L:p])
                    self.counts[hist + (padded[p],)] += 1
                    self.context[hist] += 1
            total += len(seq)
        if total == 0:
            raise ValueError("cannot train an n-gram model on an empty corpus")
        return self

    def prob(self, history, token):
        """Smoothed ``P(token | history)``; ``history`` is any token tuple."""
        n = self.order
        v = self._norm(token)
        hist = tuple(BOS if t == BOS else self._norm(t) for t in history[len(history) - (n - 1):]) if n > 1 else ()
        k, V = self.add_k, len(self.vocab)
        for L in range(len(hist), -1, -1):
            h = hist[len(hist) - L:]
            c_h = self.context.get(h, 0)
            if c_h > 0 or L == 0:
                denom = c_h + k * V
                return (self.counts.get(h + (v,), 0) + k) / denom if denom > 0 else 0.0
        raise AssertionError("unreachable")

    def logprob(self, history, token):
        p = self.prob(history, token)
        return math.log(p) if p > 0 else LOG_FLOOR

    def _score(self, tokens, span):
        i, j = span
        n = self.order
        padded = [BOS] * (n - 1) + list(tokens)
        out = []
        for p in range(i, j):
            q = p + n - 1
            out.append(min(0.0, self.logprob(tuple(padded[q - (n - 1):q]), padded[q])))
        return out

    def score_many(self, requests):
        return [self._score(r.tokens, r.span) for r in requests]

    def save(self, path):
        lines = [f"{MODEL_MAGIC}\tv{MODEL_VERSION}\torder={self.order}\tadd_k={self.add_k!r}\tlowercase={int(self.lowercase)}"]
        for tok in sorted(self.vocab):
            lines.append(f"V\t{tok}")
        for gram, c in sorted(self.counts.items()):
            lines.append(f"N\t{' '.join(gram)}\t{c}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(MODEL_MAGIC):
            raise ValueError(f"{path}: not an n-gram model file")
        head = lines[0].split("\t")
        if head[1] != f"v{MODEL_VERSION}":
            raise ValueError(f"{path}: unsupported model version {head[1]}")
        meta = dict(kv.split("=", 1) for kv in head[2:])
        model = cls(int(meta["order"]), float(meta["add_k"]), bool(int(meta["lowercase"])))
        for lineno, line in enumerate(lines[1:], 2):
            parts = line.split("\t")
            if parts[0] == "V" and len(parts) == 2:
                model.vocab.add(parts[1])
            elif parts[0] == "N" and len(parts) == 3:
                gram = tuple(parts[1].split(" ")) if parts[1] else ()
                c = int(parts[2])
                model.counts[gram] = c
                model.context[gram[:-1]] += c
            else:
                raise ValueError(f"{path}:{lineno}: malformed line")
        return model


def train_ngram(texts, order=3, add_k=0.1, lowercase=True):
    """Fit an ``NGramScorer`` on raw texts (tokenized with ``corpus.tokenize``)."""
    seqs = [[t.surface for t in tokenize(text)] for text in texts]
    if not any(seqs):
        raise ValueError("cannot train an n-gram model on an empty corpus")
    return NGramScorer(order, add_k, lowercase).fit(seqs)


class ExternalScorer:
    """Client for a JSONL scorer over a subprocess's stdio or a TCP socket.

    Writes are serialised under a lock; a reader thread routes responses to
    the waiting requests by id, so callers may pipeline or share the handle.
    """

    name = "external"

    def __init__(self, command=None, address=None, timeout=30.0):
        if (command is None) == (address is None):
            raise ValueError("give exactly one of command or address")
        self.timeout = timeout
        self._proc = None
        self._sock = None
        if command is not None:
            argv = shlex.split(command) if isinstance(command, str) else list(command)
            self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
            self._wfile, self._rfile = self._proc.stdin, self._proc.stdout
        else:
            host, _, port = address.rpartition(":")
            self._sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=timeout)
            self._sock.settimeout(None)
            self._rfile = self._sock.makefile("rb")
            self._wfile = self._sock.makefile("wb")
        self._pending: dict[str, Future] = {}
        self._lock = threading.Lock()
        self._ids = itertools.count()
        self._closed = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _fail_all(self, exc_type, message):
        with self._lock:
            pending, self._pending = self._pending, {}
        for rid, fut in pending.items():
            fut.set_exception(exc_type(message, rid))

    def _read_loop(self):
        try:
            for raw in self._rfile:
                if not raw.strip():
                    continue
                try:
                    obj = json.loads(raw)
                    rid = obj["id"]
                    values = obj["logprobs"]
                except (ValueError, KeyError, TypeError):
                    self._fail_all(MalformedResponse, f"unparsable response {raw[:80]!r}")
                    continue
                with self._lock:
                    fut = self._pending.pop(rid, None)
                if fut is None:
                    self._fail_all(ResponseIdMismatch, f"response for unknown id {rid!r}")
                    continue
                if not isinstance(values, list):
                    fut.set_exception(MalformedResponse("logprobs is not a list", rid))
                else:
                    fut.set_result(values)
        except (OSError, ValueError):
            pass
        self._fail_all(ScorerError, "endpoint closed the connection")

    def score_many(self, requests):
        futures = []
        payload = []
        local = []
        for req in requests:
            rid = f"{req.request_id}#{next(self._ids)}"
            fut = Future()
            local.append((rid, req, fut))
            payload.append(json.dumps({"id": rid, "tokens": list(req.tokens), "mask": list(req.span)}, ensure_ascii=False))
        with self._lock:
            if self._closed:
                raise ScorerError("scorer is closed")
            for rid, _, fut in local:
                self._pending[rid] = fut
            try:
                self._wfile.write(("\n".join(payload) + "\n").encode("utf-8"))
                self._wfile.flush()
            except OSError as exc:
                for rid, _, _ in local:
                    self._pending.pop(rid, None)
                raise ScorerError(f"write failed: {exc}") from None
        for rid, req, fut in local:
            try:
                values = fut.result(timeout=self.timeout)
            except FutureTimeout:
                with self._lock:
                    self._pending.pop(rid, None)
                raise ScorerTimeout(f"no response within {self.timeout}s", req.request_id) from None
            except ScorerError as exc:
                raise type(exc)(str(exc).split(": ", 1)[-1], req.request_id) from None
            futures.append(_check_response(req, values))
        return futures

    def close(self):
        with self._lock:
            self._closed = True
        try:
            self._wfile.close()
        except OSError:
            pass
        if self._proc is not None:
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        if self._sock is not None:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def external_scorer(command=None, address=None, timeout=30.0):
    return ExternalScorer(command=command, address=address, timeout=timeout)


def serve_jsonl(scorer, infile, outfile):
    """Answer JSONL score requests from ``infile`` with ``scorer``.

    Lets any in-process scorer act as an external endpoint (stdio or a
    socket file pair).
    """
    for raw in infile:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        obj = json.loads(raw)
        req = ScoreRequest(obj["id"], tuple(obj["tokens"]), tuple(obj["mask"]))
        values = scorer.score_many([req])[0]
        line = json.dumps({"id": req.request_id, "logprobs": values}) + "\n"
        outfile.write(line.encode("utf-8") if "b" in getattr(outfile, "mode", "") else line)
        outfile.flush()
