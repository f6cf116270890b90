from datetime import datetime, timezone
from importlib.resources import files

import pytest

from gwharris.fetch import NetworkError, NotFound, RateLimited, RevisionFetcher, article_dirname, fetch_revisions
from gwharris.ingest import detect_spikes, monthly_series, read_manifest

FIXTURE = files("gwharris") / "data" / "wiki_fixture" / "manifest.csv"


class Response:
    def __init__(self, payload=None, status=200, headers=None, raw=None):
        self.payload = payload
        self.status_code = status
        self.headers = headers or {}
        self.raw = raw

    def json(self):
        if self.raw is not None:
            raise ValueError("not json")
        return self.payload


class FixtureWiki:
    """Serves the bundled revision fixture through the API shape, two revisions per page."""

    def __init__(self, title="Fixture article"):
        self.title = title
        self.records = read_manifest(FIXTURE)
        self.calls = []

    def get(self, url, params=None, headers=None, timeout=None, auth=None):
        self.calls.append(params)
        assert headers["User-Agent"]
        if params["action"] == "query":
            if params["titles"] != self.title:
                return Response({"query": {"pages": [{"title": params["titles"], "missing": True}]}})
            start = int(params.get("rvcontinue", 0))
            chunk = self.records[start:start + 2]
            body = {"query": {"pages": [{"title": self.title, "revisions": [
                {"revid": int(r.revision_id), "timestamp": r.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")}
                for r in chunk]}]}}
            if start + 2 < len(self.records):
                body["continue"] = {"rvcontinue": str(start + 2)}
            return Response(body)
        rec = next(r for r in self.records if r.revision_id == str(params["oldid"]))
        return Response({"parse": {"text": rec.load().decode()}})


class Canned:
    def __init__(self, *responses):
        self.responses = list(responses)
        self.calls = 0

    def get(self, *args, **kwargs):
        self.calls += 1
        return self.responses.pop(0)


def fetcher(tmp_path, session):
    return RevisionFetcher(tmp_path, "https://wiki.invalid/api.php", session=session, min_interval=0)


def test_article_dirname():
    assert article_dirname("Foo bar/Baz?") == "Foo_bar_Baz"
    assert article_dirname("  ") == "article"


def test_fetch_populates_cache_and_matches_offline(tmp_path):
    wiki = FixtureWiki()
    f = fetcher(tmp_path, wiki)
    records = f.fetch(wiki.title)
    assert len(records) == len(wiki.records)
    assert f.calls == len(wiki.calls) == 40 + len(records)
    cached = tmp_path / "Fixture_article"
    assert (cached / "manifest.csv").exists()
    assert not list(cached.glob("*.tmp"))
    online = monthly_series(records, ((2005, 1), (2007, 12)))
    offline = monthly_series(read_manifest(FIXTURE), ((2005, 1), (2007, 12)))
    detect_spikes(online)
    detect_spikes(offline)
    assert online.to_csv() == offline.to_csv()


def test_cache_hit_makes_no_call(tmp_path):
    wiki = FixtureWiki()
    fetcher(tmp_path, wiki).fetch(wiki.title)
    again = Canned()
    f = fetcher(tmp_path, again)
    lo = datetime(2006, 1, 1, tzinfo=timezone.utc)
    hi = datetime(2006, 12, 31, 23, 59, tzinfo=timezone.utc)
    records = f.fetch(wiki.title, lo, hi)
    assert again.calls == 0 and f.calls == 0
    assert records and all(lo <= r.timestamp <= hi for r in records)


def test_malformed_payload_leaves_no_cache(tmp_path):
    session = Canned(Response({"query": {"pages": [{"title": "X", "revisions": [{"revid": 1}]}]}}))
    with pytest.raises(NetworkError):
        fetcher(tmp_path, session).fetch("X")
    assert not (tmp_path / "X").exists()
    session = Canned(Response({"query": {"pages": [{"title": "X", "revisions": [
        {"revid": 1, "timestamp": "2005-01-01T00:00:00Z"}]}]}}), Response({"parse": {}}))
    with pytest.raises(NetworkError):
        fetcher(tmp_path, session).fetch("X")
    assert not (tmp_path / "X").exists()
    with pytest.raises(NetworkError):
        fetcher(tmp_path, Canned(Response(raw="<html>"))).fetch("X")


def test_rate_limit(tmp_path):
    with pytest.raises(RateLimited) as info:
        fetcher(tmp_path, Canned(Response(status=429, headers={"Retry-After": "30"}))).fetch("X")
    assert info.value.retry_after == 30.0
    with pytest.raises(RateLimited):
        fetcher(tmp_path, Canned(Response({"error": {"code": "ratelimited"}}))).fetch("X")


def test_not_found(tmp_path):
    with pytest.raises(NotFound):
        fetcher(tmp_path, FixtureWiki()).fetch("No such article")
    with pytest.raises(NotFound):
        fetcher(tmp_path, Canned(Response(status=404))).fetch("X")
    with pytest.raises(NetworkError):
        fetcher(tmp_path, Canned(Response(status=503))).fetch("X")


def test_transport_error_is_wrapped(tmp_path):
    class Broken:
        def get(self, *a, **k):
            raise OSError("connection reset")

    with pytest.raises(NetworkError):
        fetcher(tmp_path, Broken()).fetch("X")


def test_fetch_revisions_wrapper(tmp_path):
    wiki = FixtureWiki()
    records = fetch_revisions("https://wiki.invalid/api.php", wiki.title, cache_dir=tmp_path, session=wiki,
                              min_interval=0)
    assert [r.revision_id for r in records] == [r.revision_id for r in wiki.records]
