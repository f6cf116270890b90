"""Monthly scale of an article's revisions and the months that stand out.

Uses the bundled offline fixture. To analyse a live article instead, run
``gwharris wiki history --article "Title" --from 2005-01 --to 2007-12``.

Run with: python demos/04_revision_history.py
"""
from importlib.resources import files

from gwharris.ingest import detect_spikes, monthly_series, read_html_tree, read_manifest, lambda_of_document

data = files("gwharris") / "data"
doc = read_html_tree(data / "sample_document.html")
print(f"small document: {doc.n} element nodes, lambda_hat {lambda_of_document(doc):.4f}")
print("tags in document order:", " ".join(doc.tags))

history = monthly_series(read_manifest(data / "wiki_fixture" / "manifest.csv"), ((2005, 1), (2007, 12)))
flags = detect_spikes(history)
for month, value, count, carried in zip(history.months, history.values, history.counts, history.carried):
    mark = {1: "  <- jump up (content removed)", -1: "  <- drop (mass addition)"}.get(flags.get(month), "")
    note = " (carried)" if carried else ""
    print(f"{month[0]}-{month[1]:02d}  {value:.4f}  revisions={count}{note}{mark}")
