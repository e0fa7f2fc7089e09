import json

import pytest

from sanipipe.corpus import Document, SemanticType
from sanipipe.silver import PredictedSpan
from sanipipe.websearch import (
    RateLimiter,
    SearchClient,
    SearchError,
    UncachedQueryError,
    make_query,
    normalize_url,
    person_urls,
    span_queries,
)


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.now += dt


def test_fixture_passthrough_and_errors():
    fixture = {"Leszek Kołodziński": {"urls": ["https://Example.org/a#x", "https://example.org/a"], "total_hits": 7},
               '"nobody"': {"urls": [], "total_hits": 0}}
    client = SearchClient(fixture=fixture)
    res = client.search("Leszek Kołodziński")
    assert res.urls == ("https://example.org/a",) and res.total_hits == 7
    assert client.search('"nobody"').total_hits == 0
    with pytest.raises(UncachedQueryError) as err:
        client.search("missing")
    assert err.value.query == "missing"
    assert sum(client.network_calls.values()) == 0
    with pytest.raises(SearchError):
        SearchClient()


def test_normalize_url():
    assert normalize_url(" HTTPS://Ex.ORG/Path?q=1#frag ") == "https://ex.org/Path?q=1"


def _pages(total=1234, n=15):
    links = [f"https://site{i}.org/" for i in range(n)]
    calls = []

    def transport(url, params, timeout):
        calls.append(params)
        start = params["start"] - 1
        items = [{"link": u} for u in links[start:start + params["num"]]]
        return {"items": items, "searchInformation": {"totalResults": str(total)}}

    return transport, calls


def test_live_two_pages_and_cache(tmp_path):
    transport, calls = _pages()
    clock = FakeClock()
    cache = tmp_path / "cache.jsonl"
    client = SearchClient(endpoint="http://x", api_key="k", engine_id="c", cache_path=cache,
                          transport=transport, clock=clock, sleep=clock.sleep)
    res = client.search('"tennis coach"')
    assert len(res.urls) == 15 and res.total_hits == 1234
    assert [c["start"] for c in calls] == [1, 11]
    assert client.search('"tennis coach"') == res
    assert client.network_calls['"tennis coach"'] == 1
    again = SearchClient(endpoint="http://x", api_key="k", engine_id="c", cache_path=cache,
                         transport=transport, clock=clock, sleep=clock.sleep)
    assert again.search('"tennis coach"').urls == res.urls
    assert sum(again.network_calls.values()) == 0 and len(calls) == 2
    assert json.loads(cache.read_text().splitlines()[0])["total_hits"] == 1234


def test_short_first_page_stops():
    transport, calls = _pages(total=3, n=3)
    clock = FakeClock()
    client = SearchClient(endpoint="http://x", transport=transport, clock=clock, sleep=clock.sleep)
    assert len(client.search("q").urls) == 3 and len(calls) == 1


def test_rate_limit_with_mock_clock():
    clock = FakeClock()
    limiter = RateLimiter(4.0, clock, clock.sleep)
    for _ in range(10):
        limiter.acquire()
    assert clock.now >= (10 - 1) / 4.0 - 1e-12
    with pytest.raises(ValueError):
        RateLimiter(0)


def test_retries_then_error_names_query():
    attempts = []

    def broken(url, params, timeout):
        attempts.append(params["q"])
        raise ConnectionError("boom")

    clock = FakeClock()
    client = SearchClient(endpoint="http://x", transport=broken, max_retries=2, clock=clock, sleep=clock.sleep)
    with pytest.raises(SearchError) as err:
        client.search('"Riga"')
    assert err.value.query == '"Riga"' and len(attempts) == 3
    assert [s for s in clock.sleeps if s >= 1] == [1, 2]


def test_queries():
    text = "the tennis\ncoach met the tennis  coach in Riga"
    doc = Document("d", text, "Anna Nowak", {})
    a = text.index("tennis")
    b = text.index("tennis", a + 1)
    r = text.index("Riga")
    spans = [PredictedSpan(a, a + 12, SemanticType.DEM), PredictedSpan(b, b + 13, SemanticType.DEM),
             PredictedSpan(r, r + 4, SemanticType.LOC)]
    assert span_queries(doc, spans) == ['"tennis coach"', '"Riga"']
    assert span_queries(doc, spans, quote=False) == ["tennis coach", "Riga"]
    assert make_query("  a   b ") == '"a b"'
    client = SearchClient(fixture={"Anna Nowak": {"urls": ["https://x.org/"], "total_hits": 1}})
    assert person_urls(client, " Anna  Nowak ") == {"https://x.org/"}
    with pytest.raises(ValueError):
        person_urls(client, "  ")
