import math
import random
import socket
import sys
import textwrap
import threading

import pytest

from _oracles import PlantedScorer
from sanipipe.scorer import (
    LOG_FLOOR,
    MASK,
    UNK,
    ExternalScorer,
    LengthMismatch,
    MalformedResponse,
    NGramScorer,
    ResponseIdMismatch,
    ScoreRequest,
    ScorerTimeout,
    serve_jsonl,
    span_logprobs,
    token_information_content,
    token_weights,
    train_ngram,
)


def test_deterministic_bigram():
    m = NGramScorer(order=2, add_k=0.0).fit([["a", "b", "a", "b"]])
    assert m.prob(("a",), "b") == 1.0
    assert span_logprobs(m, ["a", "b"], (1, 2)) == [0.0]


def test_hand_computed_add_k_and_backoff():
    m = NGramScorer(order=2, add_k=0.5).fit([["a", "b", "a", "b"]])
    assert m.vocab == {"a", "b", UNK}
    # unseen token maps to <unk>: (0 + k) / (c(a) + k|V|)
    assert m.prob(("a",), "zzz") == pytest.approx(0.5 / (2 + 1.5))
    # unseen history backs off to the unigram estimate
    assert m.prob(("zzz",), "a") == pytest.approx((2 + 0.5) / (4 + 1.5))
    assert m.prob((MASK,), "a") == m.prob(("zzz",), "a")


def test_distribution_sums_to_one():
    rng = random.Random(4)
    words = ["w%d" % i for i in range(12)]
    corpus = [[rng.choice(words) for _ in range(rng.randint(1, 20))] for _ in range(30)]
    m = NGramScorer(order=3, add_k=0.1).fit(corpus)
    for _ in range(100):
        hist = tuple(rng.choice(words + ["novel", MASK]) for _ in range(rng.randint(0, 4)))
        assert sum(m.prob(hist, v) for v in m.vocab) == pytest.approx(1.0, abs=1e-9)


def test_zero_k_unseen_gives_floor_and_logprobs_are_valid():
    m = NGramScorer(order=2, add_k=0.0).fit([["a", "b"]])
    assert m.logprob(("a",), "a") == LOG_FLOOR
    rng = random.Random(1)
    m = train_ngram(["the court held that the applicant", "the applicant was born in 1970"], order=3)
    for _ in range(50):
        toks = [rng.choice(["the", "court", "x", MASK, "1970"]) for _ in range(rng.randint(1, 10))]
        i = rng.randrange(len(toks))
        j = rng.randint(i + 1, len(toks))
        vals = span_logprobs(m, toks, (i, j))
        assert len(vals) == j - i and all(math.isfinite(v) and v <= 0 for v in vals)


def test_save_load_round_trip(tmp_path):
    m = train_ngram(["Mr Kołodziński lives in Łódź .", "the applicant lives in Riga ."], order=3, add_k=0.2)
    path = tmp_path / "m.ngram"
    m.save(path)
    back = NGramScorer.load(path)
    assert (back.order, back.add_k, back.lowercase) == (3, 0.2, True)
    assert back.vocab == m.vocab and back.counts == m.counts and back.context == m.context
    toks = ["mr", "kołodziński", "lives", "in", "paris"]
    assert span_logprobs(back, toks, (1, 5)) == span_logprobs(m, toks, (1, 5))
    (tmp_path / "bad").write_text("hello\n")
    with pytest.raises(ValueError):
        NGramScorer.load(tmp_path / "bad")


def test_empty_corpus_and_bad_params():
    with pytest.raises(ValueError, match="empty"):
        train_ngram(["", "   "])
    with pytest.raises(ValueError):
        NGramScorer(order=0)
    with pytest.raises(ValueError):
        ScoreRequest("x", ("a",), (0, 2))


def test_information_content():
    assert token_weights(PlantedScorer({}, base=-2.0), ["a", "b", "c"]) == [2.0, 2.0, 2.0]
    assert token_weights(PlantedScorer({}), []) == []
    m = train_ngram(["one two three four five", "two three four"], order=2)
    toks = ["one", "two", "three", "four", "five"]
    w = token_weights(m, toks)
    assert w == [token_information_content(m, toks, i) for i in range(5)]
    assert all(x >= 0 for x in w)


def _script(tmp_path, body):
    path = tmp_path / "endpoint.py"
    path.write_text("import json, sys, time\n" + textwrap.dedent(body))
    return [sys.executable, str(path)]


ECHO = """
for line in sys.stdin:
    req = json.loads(line)
    i, j = req["mask"]
    print(json.dumps({"id": req["id"], "logprobs": [-1.0] * (j - i)}), flush=True)
"""

REVERSED = """
buf = []
for line in sys.stdin:
    buf.append(json.loads(line))
    if len(buf) == 2:
        for req in reversed(buf):
            i, j = req["mask"]
            print(json.dumps({"id": req["id"], "logprobs": [-float(i + 1)] * (j - i)}), flush=True)
        buf = []
"""


def _reqs(*spans):
    toks = ("a", "b", "c", "d")
    return [ScoreRequest(f"r{k}", toks, s) for k, s in enumerate(spans)]


def test_external_echo_and_out_of_order(tmp_path):
    with ExternalScorer(command=_script(tmp_path, ECHO), timeout=10) as ext:
        assert ext.score_many(_reqs((0, 2), (3, 4))) == [[-1.0, -1.0], [-1.0]]
    with ExternalScorer(command=_script(tmp_path, REVERSED), timeout=10) as ext:
        assert ext.score_many(_reqs((0, 1), (2, 4))) == [[-1.0], [-3.0, -3.0]]


@pytest.mark.parametrize("body,exc", [
    ('for line in sys.stdin:\n    r = json.loads(line)\n    print(json.dumps({"id": r["id"], "logprobs": [-1.0] * 5}), flush=True)\n',
     LengthMismatch),
    ('for line in sys.stdin:\n    print("not json", flush=True)\n', MalformedResponse),
    ('for line in sys.stdin:\n    r = json.loads(line)\n    print(json.dumps({"id": r["id"], "logprobs": [0.5]}), flush=True)\n',
     MalformedResponse),
    ('for line in sys.stdin:\n    print(json.dumps({"id": "bogus", "logprobs": [-1.0]}), flush=True)\n', ResponseIdMismatch),
    ("for line in sys.stdin:\n    time.sleep(5)\n", ScorerTimeout),
])
def test_external_failures_name_the_request(tmp_path, body, exc):
    with ExternalScorer(command=_script(tmp_path, body), timeout=1.0) as ext:
        with pytest.raises(exc) as err:
            ext.score_many([ScoreRequest("req-7", ("a", "b"), (1, 2))])
    assert err.value.request_id == "req-7"


def test_external_requires_one_endpoint():
    with pytest.raises(ValueError):
        ExternalScorer()


def test_tcp_loopback_matches_in_process():
    model = train_ngram(["the applicant was born in 1970 in Riga", "the court found a violation"], order=3)
    server = socket.socket()
    server.bind(("127.0.0.1", 0))
    server.listen(1)
    port = server.getsockname()[1]

    def serve():
        conn, _ = server.accept()
        with conn, conn.makefile("rb") as rf, conn.makefile("wb") as wf:
            serve_jsonl(model, rf, wf)

    t = threading.Thread(target=serve, daemon=True)
    t.start()
    rng = random.Random(8)
    vocab = ["the", "applicant", "court", "1970", "Riga", MASK, "unseen"]
    reqs = []
    for k in range(200):
        toks = tuple(rng.choice(vocab) for _ in range(rng.randint(1, 12)))
        i = rng.randrange(len(toks))
        reqs.append(ScoreRequest(f"f{k}", toks, (i, rng.randint(i + 1, len(toks)))))
    with ExternalScorer(address=f"127.0.0.1:{port}", timeout=10) as ext:
        assert ext.score_many(reqs) == model.score_many(reqs)
    t.join(5)
    server.close()
