"""HTML documents as ordered trees and monthly scale histories of revisions.

Only element tags become nodes; text, comments and attributes are dropped.
Void elements are leaves. An end tag closes the nearest matching open
element and implicitly closes everything opened inside it; stray end tags
are ignored. This is deliberately simpler than browser tree construction.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import Path

import numpy as np

from .estimators import lambda_hat
from .trees import OrderedTree, _from_parents

VOID_ELEMENTS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta",
    "param", "source", "track", "wbr",
})
DOCUMENT_ROOT = "#document"


class UnparseableDocument(ValueError):
    pass


class NoRevisions(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HtmlDocumentTree:
    tree: OrderedTree
    tags: tuple
    source: str = ""

    @property
    def n(self) -> int:
        return self.tree.n


class _TagCollector(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parent: list[int] = []
        self.tags: list[str] = []
        self.open: list[int] = []

    def _new(self, tag: str) -> int:
        self.parent.append(self.open[-1] if self.open else -1)
        self.tags.append(tag)
        return len(self.tags) - 1

    def handle_starttag(self, tag, attrs):
        node = self._new(tag)
        if tag not in VOID_ELEMENTS:
            self.open.append(node)

    def handle_startendtag(self, tag, attrs):
        self._new(tag)

    def handle_endtag(self, tag):
        for depth in range(len(self.open) - 1, -1, -1):
            if self.tags[self.open[depth]] == tag:
                del self.open[depth:]
                return


def parse_html_tree(document, source: str = "") -> HtmlDocumentTree:
    """Ordered tree of element tags in document order."""
    if isinstance(document, (bytes, bytearray)):
        document = bytes(document).decode("utf-8", errors="replace")
    collector = _TagCollector()
    collector.feed(document)
    collector.close()
    parent = collector.parent
    tags = collector.tags
    if not tags:
        raise UnparseableDocument(f"no element found in {source or 'document'}")
    tops = [i for i, p in enumerate(parent) if p < 0]
    if len(tops) > 1:
        # several top-level elements hang under a synthetic document node
        parent = [-1] + [p + 1 for p in parent]
        tags = [DOCUMENT_ROOT] + tags
    tree = _from_parents(np.asarray(parent, dtype=np.int64))
    return HtmlDocumentTree(tree, tuple(tags), source)


def read_html_tree(path) -> HtmlDocumentTree:
    path = Path(path)
    return parse_html_tree(path.read_bytes(), source=str(path))


def lambda_of_document(doc: HtmlDocumentTree) -> float:
    return lambda_hat(doc.tree)


# ---------------------------------------------------------------------------
# revision histories

@dataclass(frozen=True)
class RevisionRecord:
    timestamp: datetime
    revision_id: str
    content: object  # path to an HTML file, or the raw document

    def load(self) -> bytes:
        if isinstance(self.content, (bytes, bytearray)):
            return bytes(self.content)
        if isinstance(self.content, str) and self.content.lstrip().startswith("<"):
            return self.content.encode("utf-8")
        return Path(self.content).read_bytes()

    @property
    def month(self) -> tuple:
        return (self.timestamp.year, self.timestamp.month)


def parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def read_manifest(path) -> list[RevisionRecord]:
    """Revisions listed in a CSV with columns timestamp, revision_id, file_path."""
    path = Path(path)
    base = path.parent
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = [RevisionRecord(parse_timestamp(r["timestamp"]), r["revision_id"],
                              str(base / r["file_path"])) for r in rows]
    ids = [r.revision_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("revision ids must be unique")
    return sorted(records, key=lambda r: r.timestamp)


def write_manifest(records, path) -> None:
    path = Path(path)
    base = path.parent
    lines = ["timestamp,revision_id,file_path"]
    for r in records:
        rel = Path(r.content).relative_to(base) if isinstance(r.content, (str, Path)) else r.content
        lines.append(f"{r.timestamp.strftime('%Y-%m-%dT%H:%M:%SZ')},{r.revision_id},{rel}")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def _month_index(month) -> int:
    return month[0] * 12 + month[1] - 1


def _month_of(index: int) -> tuple:
    return (index // 12, index % 12 + 1)


def parse_month(text: str) -> tuple:
    year, month = text.strip().split("-")[:2]
    return (int(year), int(month))


@dataclass
class ScaleHistory:
    months: list
    values: list
    counts: list
    carried: list
    spikes: dict = field(default_factory=dict)  # month -> +1 / -1

    def to_csv(self) -> str:
        lines = ["month,lambda_ls,n_revisions,carried,spike_flag"]
        for m, v, c, car in zip(self.months, self.values, self.counts, self.carried):
            lines.append(f"{m[0]:04d}-{m[1]:02d},{v:.17g},{c},{int(car)},{self.spikes.get(m, 0)}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())


def monthly_series(revisions, month_range=None, values_by_id=None) -> ScaleHistory:
    """Least-squares scale of each month's forest of revisions, carrying empty months forward.

    ``month_range`` is an inclusive ``((y0, m0), (y1, m1))`` pair; months before
    the first revision are absent. ``values_by_id`` may hold precomputed per-revision values.
    """
    revisions = sorted(revisions, key=lambda r: r.timestamp)
    if month_range is not None:
        lo, hi = (_month_index(m) for m in month_range)
        if hi < lo:
            raise NoRevisions("empty month range")
        revisions = [r for r in revisions if _month_index(r.month) <= hi]
    if not revisions:
        raise NoRevisions("no revision at or before the end of the range")
    values_by_id = dict(values_by_id or {})
    buckets: dict[int, list[float]] = {}
    for r in revisions:
        if r.revision_id not in values_by_id:
            values_by_id[r.revision_id] = lambda_of_document(parse_html_tree(r.load(), r.revision_id))
        buckets.setdefault(_month_index(r.month), []).append(values_by_id[r.revision_id])
    first = min(buckets)
    last = max(buckets) if month_range is None else hi
    history = ScaleHistory([], [], [], [])
    previous = math.nan
    for idx in range(first, last + 1):
        vals = buckets.get(idx, [])
        value = float(np.mean(vals)) if vals else previous
        previous = value
        if month_range is not None and idx < lo:
            continue
        history.months.append(_month_of(idx))
        history.values.append(value)
        history.counts.append(len(vals))
        history.carried.append(not vals)
    if not history.months:
        raise NoRevisions("no month of the range follows a revision")
    return history


def detect_spikes(history: ScaleHistory, sensitivity: float = 5.0, radius: int = 2) -> dict:
    """Months whose value departs from the median of their neighbours by more than
    ``sensitivity`` robust scales of the first differences. Returns month -> sign."""
    v = np.asarray(history.values, dtype=float)
    if v.size < 3:
        raise ValueError("spike detection needs at least 3 months")
    d = np.diff(v)
    scale = 1.4826 * np.median(np.abs(d - np.median(d)))
    # carried months give many zero differences; keep a tiny floor relative to the level
    scale = max(scale, 1e-6 * float(np.median(np.abs(v))), 1e-12)
    flags = {}
    width = min(2 * radius, v.size - 1)
    for i in range(v.size):
        # the window slides inward at the ends so every month has the same number of neighbours
        start = min(max(0, i - radius), v.size - 1 - width)
        nb = np.delete(v[start:start + width + 1], i - start)
        resid = v[i] - np.median(nb)
        if abs(resid) > sensitivity * scale:
            flags[history.months[i]] = int(np.sign(resid))
    history.spikes = flags
    return flags
