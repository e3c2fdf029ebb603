"""Search and fetch backends used by the recommender.

Fixture backends read recorded results from disk so the recommendation loop
runs offline; live backends talk HTTP through requests.

Fixture layout::

    fixtures/search.json          {"<query text>": [{"url", "title", "snippet"}, ...]}
    fixtures/pages/<sha256>.json  {"url", "status", "content_type", "body"}

where <sha256> is the hex digest of the UTF-8 URL with its fragment removed.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urldefrag, urlparse

import requests
from bs4 import BeautifulSoup
from django.conf import settings

from .exceptions import BackendUnavailable, BrokenLink, FixtureMiss, IoError, SchemaError

logger = logging.getLogger(__name__)

EXCERPT_CHARS = 4000
MAX_RESULTS = 10


@dataclass(frozen=True)
class SearchResult:
    url: str
    title: str
    snippet: str = ""


@dataclass(frozen=True)
class FetchedPage:
    url: str
    status: int
    content_type: str
    body: str


def is_absolute_url(url: str) -> bool:
    parts = urlparse(url)
    return parts.scheme in ("http", "https") and bool(parts.netloc)


def canonical_url(url: str) -> str:
    return urldefrag(url.strip())[0]


def url_digest(url: str) -> str:
    return hashlib.sha256(canonical_url(url).encode("utf-8")).hexdigest()


def page_text(body: str, content_type: str) -> str:
    """Readable text of a fetched body: HTML goes through BeautifulSoup."""
    if "html" not in content_type:
        return " ".join(body.split())
    soup = BeautifulSoup(body, "html.parser")
    for tag in soup(["script", "style", "noscript"]):
        tag.decompose()
    title = soup.title.get_text(" ", strip=True) if soup.title else ""
    paragraphs = [p.get_text(" ", strip=True) for p in soup.find_all(["h1", "h2", "h3", "p", "li"])]
    text = " ".join(part for part in [title, *paragraphs] if part)
    return text or " ".join(soup.get_text(" ").split())


# ── search ────────────────────────────────────────────────────────────────────

class FixtureSearchBackend:
    kind = "fixture"

    def __init__(self, results: dict):
        self.results = results
        self.queries: list[str] = []

    @classmethod
    def from_dir(cls, directory) -> "FixtureSearchBackend":
        path = Path(directory) / "search.json"
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read search fixtures {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"search fixtures {path} are not valid JSON: {exc}") from exc
        return cls(data)

    def search(self, query: str) -> list[SearchResult]:
        self.queries.append(query)
        if query not in self.results:
            raise FixtureMiss(query)
        return [
            SearchResult(url=item["url"], title=item.get("title", ""), snippet=item.get("snippet", ""))
            for item in self.results[query]
        ]


class LiveSearchBackend:
    """GET <ALIGN_SEARCH_URL>?q=...&key=... returning {"items": [{link, title, snippet}]}."""

    kind = "live"

    def __init__(self, url=None, api_key=None, timeout=None, session=None):
        self.url = url if url is not None else settings.ALIGN["SEARCH_URL"]
        self.api_key = api_key if api_key is not None else settings.ALIGN["SEARCH_KEY"]
        self.timeout = timeout or settings.ALIGN["HTTP_TIMEOUT"]
        self.session = session or requests.Session()

    def search(self, query: str) -> list[SearchResult]:
        if not self.url:
            raise BackendUnavailable("ALIGN_SEARCH_URL is not set")
        params = {"q": query, "num": MAX_RESULTS}
        if self.api_key:
            params["key"] = self.api_key
        try:
            response = self.session.get(self.url, params=params, timeout=self.timeout)
            response.raise_for_status()
            items = response.json().get("items", [])
        except requests.exceptions.RequestException as exc:
            raise BackendUnavailable(f"search request failed: {exc}") from exc
        except ValueError as exc:
            raise BackendUnavailable(f"search backend returned invalid JSON: {exc}") from exc
        return [
            SearchResult(url=item.get("link") or item.get("url", ""), title=item.get("title", ""),
                         snippet=item.get("snippet", ""))
            for item in items
        ]


# ── fetch ─────────────────────────────────────────────────────────────────────

class FixtureFetchBackend:
    kind = "fixture"

    def __init__(self, pages_dir):
        self.pages_dir = Path(pages_dir)
        self.fetched: list[str] = []

    def fetch(self, url: str) -> FetchedPage:
        self.fetched.append(url)
        path = self.pages_dir / f"{url_digest(url)}.json"
        if not path.exists():
            # an unrecorded page behaves like an unreachable host
            raise BrokenLink(url, None)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IoError(f"cannot read page fixture {path}: {exc}") from exc
        return FetchedPage(
            url=url,
            status=int(data.get("status", 200)),
            content_type=data.get("content_type", "text/html"),
            body=data.get("body", ""),
        )


class LiveFetchBackend:
    kind = "live"

    def __init__(self, timeout=None, session=None):
        self.timeout = timeout or settings.ALIGN["HTTP_TIMEOUT"]
        self.session = session or requests.Session()

    def fetch(self, url: str) -> FetchedPage:
        headers = {"User-Agent": settings.ALIGN["USER_AGENT"]}
        try:
            response = self.session.get(url, headers=headers, timeout=self.timeout)
        except requests.exceptions.RequestException as exc:
            raise BrokenLink(url, None) from exc
        content_type = response.headers.get("Content-Type", "")
        body = response.text if "pdf" not in content_type else ""
        return FetchedPage(url=url, status=response.status_code, content_type=content_type, body=body)


def fixture_backends(directory):
    directory = Path(directory)
    return FixtureSearchBackend.from_dir(directory), FixtureFetchBackend(directory / "pages")
