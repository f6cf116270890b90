"""Revision history client for MediaWiki-style APIs with an on-disk cache.

Revisions are listed through ``action=query&prop=revisions`` and each
revision is rendered to HTML through ``action=parse&oldid=...``. The cache
lives at ``<cache>/<article>/<revision_id>.html`` next to a ``manifest.csv``;
a cached article is served without any network call.
"""
from __future__ import annotations

import re
import time
from datetime import datetime
from pathlib import Path

from .ingest import RevisionRecord, parse_timestamp, read_manifest, write_manifest

DEFAULT_ENDPOINT = "https://en.wikipedia.org/w/api.php"
DEFAULT_USER_AGENT = "gwharris/0.1 (structural revision analysis)"


class NetworkError(RuntimeError):
    pass


class RateLimited(NetworkError):
    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class NotFound(LookupError):
    pass


def article_dirname(title: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", title.strip()).strip("_") or "article"


def _stamp(ts: datetime | None):
    return None if ts is None else ts.strftime("%Y-%m-%dT%H:%M:%SZ")


class RevisionFetcher:
    """Sequential, rate-limited client; ``session`` only needs a requests-like ``get``."""

    def __init__(self, cache_dir, endpoint: str = DEFAULT_ENDPOINT, user_agent: str = DEFAULT_USER_AGENT,
                 session=None, min_interval: float = 1.0, timeout: float = 30.0, credentials=None):
        if session is None:
            import requests
            session = requests.Session()
        self.cache_dir = Path(cache_dir)
        self.endpoint = endpoint
        self.session = session
        self.headers = {"User-Agent": user_agent}
        self.min_interval = min_interval
        self.timeout = timeout
        self.auth = credentials
        self.calls = 0
        self._last = 0.0

    def _get(self, params: dict) -> dict:
        wait = self._last + self.min_interval - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._last = time.monotonic()
        self.calls += 1
        try:
            resp = self.session.get(self.endpoint, params={**params, "format": "json", "formatversion": 2},
                                    headers=self.headers, timeout=self.timeout, auth=self.auth)
        except Exception as exc:  # transport failures of any client library
            raise NetworkError(f"request to {self.endpoint} failed: {exc}") from exc
        if resp.status_code == 429:
            after = resp.headers.get("Retry-After")
            raise RateLimited("rate limited by the server", float(after) if after else None)
        if resp.status_code == 404:
            raise NotFound(f"{self.endpoint} answered 404")
        if resp.status_code >= 400:
            raise NetworkError(f"HTTP {resp.status_code} from {self.endpoint}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise NetworkError(f"response is not JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise NetworkError("response is not a JSON object")
        err = payload.get("error")
        if err:
            code = err.get("code", "") if isinstance(err, dict) else str(err)
            if code in ("ratelimited", "maxlag"):
                raise RateLimited(f"API error {code}", None)
            if code in ("missingtitle", "nosuchrevid", "missingpage"):
                raise NotFound(f"API error {code}")
            raise NetworkError(f"API error: {err}")
        return payload

    def list_revisions(self, title: str, start=None, end=None) -> list[tuple[datetime, str]]:
        params = {"action": "query", "prop": "revisions", "titles": title, "rvprop": "ids|timestamp",
                  "rvlimit": "max", "rvdir": "newer"}
        if start is not None:
            params["rvstart"] = _stamp(start)
        if end is not None:
            params["rvend"] = _stamp(end)
        out = []
        cont: dict = {}
        while True:
            payload = self._get({**params, **cont})
            try:
                pages = payload["query"]["pages"]
                page = pages[0] if isinstance(pages, list) else next(iter(pages.values()))
                if page.get("missing") or page.get("invalid"):
                    raise NotFound(f"article {title!r} does not exist")
                for rev in page.get("revisions", []):
                    out.append((parse_timestamp(rev["timestamp"]), str(rev["revid"])))
            except (KeyError, TypeError, IndexError, StopIteration, ValueError) as exc:
                raise NetworkError(f"malformed revision listing: missing {exc!r}") from exc
            if "continue" not in payload:
                return out
            cont = payload["continue"]

    def render(self, revision_id: str) -> str:
        payload = self._get({"action": "parse", "oldid": revision_id, "prop": "text"})
        try:
            text = payload["parse"]["text"]
            if isinstance(text, dict):
                text = text["*"]
        except (KeyError, TypeError) as exc:
            raise NetworkError(f"malformed parse payload for revision {revision_id}: missing {exc!r}") from exc
        if not isinstance(text, str):
            raise NetworkError(f"malformed parse payload for revision {revision_id}")
        return text

    def fetch(self, title: str, start=None, end=None, refresh: bool = False) -> list[RevisionRecord]:
        folder = self.cache_dir / article_dirname(title)
        manifest = folder / "manifest.csv"
        if manifest.exists() and not refresh:
            return _in_range(read_manifest(manifest), start, end)
        listing = self.list_revisions(title, start, end)
        # everything is downloaded before the first byte reaches the cache
        pages = {rid: self.render(rid) for _, rid in listing}
        folder.mkdir(parents=True, exist_ok=True)
        records = []
        for ts, rid in listing:
            target = folder / f"{rid}.html"
            tmp = target.with_name(target.name + ".tmp")
            tmp.write_text(pages[rid], encoding="utf-8")
            tmp.replace(target)
            records.append(RevisionRecord(ts, rid, str(target)))
        write_manifest(records, manifest)
        return records


def _in_range(records, start, end):
    return [r for r in records
            if (start is None or r.timestamp >= start) and (end is None or r.timestamp <= end)]


def fetch_revisions(endpoint: str, title: str, start=None, end=None, cache_dir="wiki_cache",
                    credentials=None, session=None, user_agent: str = DEFAULT_USER_AGENT,
                    min_interval: float = 1.0) -> list[RevisionRecord]:
    fetcher = RevisionFetcher(cache_dir, endpoint, user_agent, session, min_interval, credentials=credentials)
    return fetcher.fetch(title, start, end)
