"""Search-engine client with an on-disk cache, rate limiting and fixture mode.

Live mode talks to a Custom-Search-style JSON API configured through

    SANIPIPE_SEARCH_URL   endpoint (e.g. https://www.googleapis.com/customsearch/v1)
    SANIPIPE_SEARCH_KEY   API key
    SANIPIPE_SEARCH_CX    engine id

and fetches the first two result pages (10 results each). Fixture mode
reads ``{query: {"urls": [...], "total_hits": n}}`` and never touches the
network; a query missing from the fixture raises ``UncachedQueryError``.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlsplit, urlunsplit

logger = logging.getLogger(__name__)

PAGE_SIZE = 10
MAX_RESULTS = 20


class SearchError(RuntimeError):
    def __init__(self, message, query=None):
        self.query = query
        super().__init__(f"{message} (query {query!r})" if query is not None else message)


class UncachedQueryError(SearchError):
    pass


def normalize_url(url):
    """Lower-case scheme and host, drop the fragment."""
    parts = urlsplit(url.strip())
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), parts.path, parts.query, ""))


def _dedupe(urls, limit=MAX_RESULTS):
    out = []
    seen = set()
    for u in urls:
        n = normalize_url(u)
        if n not in seen:
            seen.add(n)
            out.append(n)
        if len(out) == limit:
            break
    return tuple(out)


@dataclass(frozen=True)
class SearchResult:
    query: str
    urls: tuple[str, ...]
    total_hits: int
    fetched_at: float | None = None

    def to_json(self):
        return {"query": self.query, "urls": list(self.urls), "total_hits": self.total_hits, "fetched_at": self.fetched_at}


class RateLimiter:
    """At most ``rate`` acquisitions per second (evenly spaced)."""

    def __init__(self, rate, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self.clock = clock
        self.sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def acquire(self):
        with self._lock:
            now = self.clock()
            if self._next is not None and now < self._next:
                self.sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


def _requests_transport(url, params, timeout):
    import requests

    resp = requests.get(url, params=params, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


class SearchClient:
    """Cached, rate-limited search.

    ``transport(url, params, timeout) -> dict`` performs one HTTP request; it
    defaults to ``requests``. ``network_calls`` counts live fetches per query.
    """

    def __init__(self, fixture=None, endpoint=None, api_key=None, engine_id=None, cache_path=None,
                 rate=1.0, max_retries=3, timeout=10.0, max_inflight=1,
                 transport=None, clock=time.monotonic, sleep=time.sleep):
        if fixture is None and endpoint is None:
            raise SearchError("no fixture and no live endpoint configured")
        self.fixture = None
        if fixture is not None:
            raw = fixture if isinstance(fixture, dict) else json.loads(Path(fixture).read_text(encoding="utf-8"))
            self.fixture = {q: SearchResult(q, _dedupe(v.get("urls", [])), int(v.get("total_hits", 0)))
                            for q, v in raw.items()}
        self.endpoint = endpoint
        self.api_key = api_key
        self.engine_id = engine_id
        self.max_retries = max_retries
        self.timeout = timeout
        self.transport = transport or _requests_transport
        self.limiter = RateLimiter(rate, clock, sleep)
        self.clock = clock
        self.sleep = sleep
        self.network_calls = Counter()
        self._inflight = threading.Semaphore(max_inflight)
        self._lock = threading.Lock()
        self._cache = {}
        self.cache_path = Path(cache_path) if cache_path else None
        if self.cache_path and self.cache_path.exists():
            for line in self.cache_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    obj = json.loads(line)
                    self._cache[obj["query"]] = SearchResult(obj["query"], tuple(obj["urls"]),
                                                             int(obj["total_hits"]), obj.get("fetched_at"))

    @classmethod
    def from_env(cls, **kw):
        endpoint = os.environ.get("SANIPIPE_SEARCH_URL")
        key = os.environ.get("SANIPIPE_SEARCH_KEY")
        cx = os.environ.get("SANIPIPE_SEARCH_CX")
        if not (endpoint and key and cx):
            raise SearchError("SANIPIPE_SEARCH_URL, SANIPIPE_SEARCH_KEY and SANIPIPE_SEARCH_CX must be set")
        return cls(endpoint=endpoint, api_key=key, engine_id=cx, **kw)

    def search(self, query):
        if self.fixture is not None:
            try:
                return self.fixture[query]
            except KeyError:
                raise UncachedQueryError("query not in fixture", query) from None
        with self._lock:
            hit = self._cache.get(query)
        if hit is not None:
            return hit
        result = self._fetch(query)
        with self._lock:
            self._cache[query] = result
            if self.cache_path is not None:
                with open(self.cache_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(result.to_json(), ensure_ascii=False) + "\n")
        return result

    def _fetch(self, query):
        self.network_calls[query] += 1
        urls = []
        total = 0
        for page in range(MAX_RESULTS // PAGE_SIZE):
            params = {"key": self.api_key, "cx": self.engine_id, "q": query,
                      "start": page * PAGE_SIZE + 1, "num": PAGE_SIZE}
            payload = self._request(params, query)
            items = payload.get("items") or []
            urls.extend(item["link"] for item in items if "link" in item)
            if page == 0:
                total = int((payload.get("searchInformation") or {}).get("totalResults", 0) or 0)
            if len(items) < PAGE_SIZE:
                break
        return SearchResult(query, _dedupe(urls), total, time.time())

    def _request(self, params, query):
        last = None
        for attempt in range(self.max_retries + 1):
            self.limiter.acquire()
            try:
                with self._inflight:
                    return self.transport(self.endpoint, params, self.timeout)
            except Exception as exc:  # transport errors are library-specific
                last = exc
                logger.warning("search attempt %d failed for %r: %s", attempt + 1, query, exc)
                if attempt < self.max_retries:
                    self.sleep(2 ** attempt)
        raise SearchError(f"endpoint failed after {self.max_retries + 1} attempts: {last}", query)


def make_query(surface, quote=True):
    q = " ".join(surface.split())
    return f'"{q}"' if quote else q


def span_queries(doc, spans, quote=True):
    """Distinct exact-phrase queries for the span surfaces, in order of appearance."""
    return list(dict.fromkeys(make_query(doc.text[s.start:s.end], quote) for s in spans))


def person_urls(client, target_name):
    if not target_name or not target_name.strip():
        raise ValueError("target name must be non-empty")
    return set(client.search(" ".join(target_name.split())).urls)
