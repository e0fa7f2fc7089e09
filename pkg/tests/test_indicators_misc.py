import random

import pytest

from sanipipe.corpus import SemanticType, tokenize
from sanipipe.indicators.combine import combine
from sanipipe.indicators.decisions import INDICATORS, RiskDecision, read_decisions, write_decisions
from sanipipe.indicators.seqlab import PARTIAL, STRICT, read_token_predictions, seqlab_decisions, seqlab_indicator
from sanipipe.indicators.web import websearch_hits_indicator, websearch_url_indicator
from sanipipe.silver import PredictedSpan

TEXT = "the tennis coach from Riga"
TOKS = tokenize(TEXT)


def span(i, j):
    return PredictedSpan(TOKS[i].start, TOKS[j - 1].end, SemanticType.DEM)


def test_seqlab_example():
    preds = [False, True, True, False, False]
    spans = [span(1, 3), span(2, 4), span(4, 5)]
    assert seqlab_indicator(preds, TOKS, spans, STRICT) == {0}
    assert seqlab_indicator(preds, TOKS, spans, PARTIAL) == {0, 1}
    assert seqlab_indicator([False] * 5, TOKS, spans, PARTIAL) == set()
    decs = seqlab_decisions("d", preds, TOKS, spans, STRICT)
    assert [d.score for d in decs] == [1.0, 0.5, 0.0]
    # a span overlapping no token is never risky
    assert seqlab_indicator([True] * 5, TOKS, [PredictedSpan(3, 4, SemanticType.DEM)], PARTIAL) == set()


def test_seqlab_errors(tmp_path):
    with pytest.raises(ValueError, match="4 token predictions for 5"):
        seqlab_indicator([True] * 4, TOKS, [span(0, 1)], PARTIAL, doc_id="d")
    with pytest.raises(ValueError):
        seqlab_indicator([True] * 5, TOKS, [span(0, 1)], "SOMETIMES")
    bad = tmp_path / "p.jsonl"
    bad.write_text('{"doc_id": "d", "labels": ["MASK", "O"]}\n')
    with pytest.raises(ValueError, match=":1:"):
        read_token_predictions(bad)


def test_strict_is_subset_of_partial():
    rng = random.Random(6)
    for _ in range(300):
        preds = [rng.random() < 0.5 for _ in TOKS]
        spans = []
        pos = 0
        while pos < len(TOKS) and rng.random() < 0.8:
            a = rng.randint(pos, len(TOKS) - 1)
            b = rng.randint(a + 1, len(TOKS))
            spans.append(span(a, b))
            pos = b
        strict = seqlab_indicator(preds, TOKS, spans, STRICT)
        partial = seqlab_indicator(preds, TOKS, spans, PARTIAL)
        assert strict <= partial


@pytest.mark.parametrize("span_urls,person_urls,risky", [
    ([], [], False),
    (["https://a.org/x"], [], False),
    ([], ["https://a.org/x"], False),
    (["https://a.org/x"], ["https://a.org/y"], False),
    (["https://a.org/x", "https://b.org/"], ["https://b.org/"], True),
    (["HTTPS://A.ORG/x#top"], ["https://a.org/x"], True),
    (["https://a.org/X"], ["https://a.org/x"], False),
])
def test_url_truth_table(span_urls, person_urls, risky):
    assert websearch_url_indicator(span_urls, person_urls).risky is risky
    assert websearch_url_indicator(person_urls, span_urls).risky is risky


def test_hits_boundaries():
    assert websearch_hits_indicator(100).risky
    assert not websearch_hits_indicator(99).risky
    assert not websearch_hits_indicator(100, inclusive=False).risky
    assert websearch_hits_indicator(10**6, upper=10**6).risky
    assert not websearch_hits_indicator(10**7, upper=10**6).risky
    assert websearch_hits_indicator(0, lower=0).risky
    with pytest.raises(ValueError):
        websearch_hits_indicator(-1)


def _dec(ind, risky, doc="d", s=0, e=3):
    return RiskDecision(doc, s, e, ind, risky, 1.0 if risky else 0.0)


def test_combine_votes_and_monotonicity():
    rng = random.Random(12)
    for _ in range(200):
        decs = []
        for s in range(rng.randint(0, 6)):
            for ind in rng.sample(INDICATORS, rng.randint(1, 5)):
                decs.append(_dec(ind, rng.random() < 0.5, s=2 * s, e=2 * s + 1))
        present = {d.indicator for d in decs}
        prev = None
        for k in range(1, 6):
            if k > len(present):
                with pytest.warns(UserWarning):
                    out = combine(decs, k)
            else:
                out = combine(decs, k)
            expect = {d.span for d in decs if sum(x.risky for x in decs if x.span == d.span) >= k}
            assert out == expect
            if prev is not None:
                assert out <= prev
            prev = out


def test_combine_errors():
    for k in (0, 6):
        with pytest.raises(ValueError):
            combine([], k)
    with pytest.raises(ValueError, match="twice"):
        combine([_dec("PROB", True), _dec("PROB", False)], 1)
    four = [_dec(i, True) for i in INDICATORS[:4]]
    with pytest.warns(UserWarning, match="k=5"):
        assert combine(four, 5) == set()
    assert combine(four, 4) == {("d", 0, 3)}


def test_decision_io(tmp_path):
    decs = [_dec("PROB", True), _dec("WEBSEARCH", False, "é", 4, 9)]
    path = tmp_path / "d.jsonl"
    write_decisions(path, decs)
    assert read_decisions(path) == decs
    with pytest.raises(ValueError):
        RiskDecision("d", 0, 1, "GUESS", True, 0.0)
