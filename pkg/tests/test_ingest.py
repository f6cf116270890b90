from datetime import datetime, timezone
from importlib.resources import files

import pytest
from hypothesis import given, strategies as st

from gwharris.estimators import lambda_hat
from gwharris.ingest import (DOCUMENT_ROOT, NoRevisions, RevisionRecord, ScaleHistory, UnparseableDocument,
                             detect_spikes, lambda_of_document, monthly_series, parse_html_tree, parse_month,
                             parse_timestamp, read_html_tree, read_manifest, write_manifest)
from gwharris.trees import build_tree

DATA = files("gwharris") / "data"
SAMPLE_SEQ = (1, 4, 0, 0, 3, 0, 1, 2, 0, 0, 0, 0)


def rev(ts, rid, doc):
    return RevisionRecord(parse_timestamp(ts), rid, doc)


def section_doc(k):
    return "<html><body>" + "<div><p>x</p></div>" * k + "</body></html>"


# --- documents as trees -----------------------------------------------------------

def test_sample_document():
    doc = read_html_tree(DATA / "sample_document.html")
    assert doc.n == 12
    assert tuple(doc.tree.degree_sequence()) == SAMPLE_SEQ
    assert doc.tags[:5] == ("html", "body", "h1", "p", "ul")
    assert lambda_of_document(doc) == pytest.approx(0.751893051085788, rel=1e-12)
    assert lambda_of_document(doc) == lambda_hat(build_tree(SAMPLE_SEQ))


def test_single_element():
    doc = parse_html_tree("<html></html>")
    assert doc.n == 1
    assert doc.tags == ("html",)


def test_text_comments_and_attributes_are_dropped():
    a = parse_html_tree('<div class="x">hi <!-- c --><span id=1>t</span>&amp;</div>')
    b = parse_html_tree("<div><span></span></div>")
    assert a.tree.same_shape(b.tree)


def test_void_elements_are_leaves():
    doc = parse_html_tree("<p>a<br>b<img src=x><input/>c</p>")
    assert tuple(doc.tree.degree_sequence()) == (3, 0, 0, 0)
    assert doc.tags == ("p", "br", "img", "input")


def test_malformed_markup_recovery():
    # an end tag closes everything opened inside it
    assert tuple(parse_html_tree("<a><b></a>").tree.degree_sequence()) == (1, 0)
    assert tuple(parse_html_tree("<a><b><c></a><d></d>").tree.degree_sequence()) == (2, 1, 1, 0, 0)
    # stray end tags are ignored
    assert tuple(parse_html_tree("<a></x><b></b></a>").tree.degree_sequence()) == (1, 0)
    # unclosed elements close at the end of input
    assert tuple(parse_html_tree("<a><b><c>").tree.degree_sequence()) == (1, 1, 0)


def test_several_top_level_elements():
    doc = parse_html_tree("<p></p><p><b></b></p>")
    assert doc.tags[0] == DOCUMENT_ROOT
    assert tuple(doc.tree.degree_sequence()) == (2, 0, 1, 0)


def test_unparseable():
    for bad in ("", "just text", "<!-- only a comment -->", b"\xff\xfe"):
        with pytest.raises(UnparseableDocument):
            parse_html_tree(bad)


@given(st.permutations(["<i></i>", "<b><i></i></b>", "<ul><li></li><li></li></ul>", "<br>"]))
def test_property_sibling_order_changes_shape_not_size(children):
    doc = parse_html_tree("<div>" + "".join(children) + "</div>")
    assert doc.n == 8
    assert int(doc.tree.child_counts()[0]) == 4


# --- revisions and monthly series ----------------------------------------------------

def test_parse_timestamp_and_month():
    assert parse_timestamp("2006-05-01T10:00:00Z") == datetime(2006, 5, 1, 10, tzinfo=timezone.utc)
    assert parse_timestamp("2006-05-01T12:00:00+02:00") == datetime(2006, 5, 1, 10, tzinfo=timezone.utc)
    assert parse_month("2007-09") == (2007, 9)


def test_manifest_roundtrip(tmp_path):
    for rid in ("7", "3"):
        (tmp_path / f"{rid}.html").write_text(section_doc(int(rid)))
    records = [rev("2005-02-01T00:00:00Z", "7", str(tmp_path / "7.html")),
               rev("2005-01-01T00:00:00Z", "3", str(tmp_path / "3.html"))]
    write_manifest(records, tmp_path / "manifest.csv")
    back = read_manifest(tmp_path / "manifest.csv")
    assert [r.revision_id for r in back] == ["3", "7"]
    assert back[0].load() == (tmp_path / "3.html").read_bytes()
    (tmp_path / "dup.csv").write_text("timestamp,revision_id,file_path\n"
                                      "2005-01-01T00:00:00Z,1,3.html\n2005-01-02T00:00:00Z,1,7.html\n")
    with pytest.raises(ValueError):
        read_manifest(tmp_path / "dup.csv")


def test_monthly_mean_and_carry_forward():
    revs = [rev("2005-01-05T00:00:00Z", "a", section_doc(2)),
            rev("2005-01-20T00:00:00Z", "b", section_doc(5)),
            rev("2005-03-02T00:00:00Z", "c", section_doc(3))]
    lam = {r.revision_id: lambda_of_document(parse_html_tree(r.load())) for r in revs}
    h = monthly_series(revs)
    assert h.months == [(2005, 1), (2005, 2), (2005, 3)]
    assert h.values[0] == pytest.approx((lam["a"] + lam["b"]) / 2)
    assert h.values[1] == h.values[0]
    assert h.values[2] == pytest.approx(lam["c"])
    assert h.counts == [2, 0, 1]
    assert h.carried == [False, True, False]
    cropped = monthly_series(revs, ((2005, 2), (2005, 5)))
    assert cropped.months == [(2005, 2), (2005, 3), (2005, 4), (2005, 5)]
    assert cropped.values[0] == h.values[0] and cropped.values[3] == h.values[2]


def test_monthly_series_errors():
    revs = [rev("2005-06-05T00:00:00Z", "a", section_doc(2))]
    with pytest.raises(NoRevisions):
        monthly_series([])
    with pytest.raises(NoRevisions):
        monthly_series(revs, ((2005, 1), (2005, 3)))
    with pytest.raises(NoRevisions):
        monthly_series(revs, ((2005, 9), (2005, 7)))


def test_identical_revisions_give_flat_series():
    revs = [rev(f"2005-{m:02d}-10T00:00:00Z", str(m), section_doc(4)) for m in range(1, 9)]
    h = monthly_series(revs)
    assert len(set(h.values)) == 1
    assert detect_spikes(h) == {}


def test_spikes_jump_and_return():
    values = [1.0, 1.01, 0.99, 1.02, 1.0, 3.0, 1.01, 0.98, 1.0, 1.02, 0.2, 1.0, 0.99]
    months = [(2005 + (i // 12), i % 12 + 1) for i in range(len(values))]
    h = ScaleHistory(months, values, [1] * len(values), [False] * len(values))
    assert detect_spikes(h) == {(2005, 6): 1, (2005, 11): -1}
    assert "2005-06,3,1,0,1" in h.to_csv()
    with pytest.raises(ValueError):
        detect_spikes(ScaleHistory(months[:2], values[:2], [1, 1], [False, False]))


def test_fixture_history_is_deterministic():
    revs = read_manifest(DATA / "wiki_fixture" / "manifest.csv")
    a = monthly_series(revs, ((2005, 1), (2007, 12)))
    detect_spikes(a)
    b = monthly_series(revs, ((2005, 1), (2007, 12)))
    detect_spikes(b)
    assert a.to_csv() == b.to_csv()
    assert len(a.months) == 36
    assert a.spikes == {(2006, 5): -1, (2007, 5): 1}
    assert sum(a.carried) == 6
