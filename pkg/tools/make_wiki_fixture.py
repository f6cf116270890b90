"""Regenerate the bundled HTML fixtures under src/gwharris/data.

The revision history describes a synthetic encyclopedia article that grows
slowly from 2005 to 2007 with a few quiet months. Two vandal edits are
injected, each reverted within the same month:

* 2006-05: 720 empty sections appended (flat, wide tree)
* 2007-05: the whole body removed

Run ``python tools/make_wiki_fixture.py`` from the repository root.
"""
from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "gwharris" / "data"

SAMPLE_DOCUMENT = """<!-- small nested document used as a parsing reference -->
<html>
  <body>
    <h1>Title</h1>
    <p>Some text.</p>
    <ul>
      <li>first item</li>
      <li>second item
        <ol>
          <li>nested one</li>
          <li>nested two</li>
        </ol>
      </li>
      <li>third item</li>
    </ul>
    <p>Closing text.</p>
  </body>
</html>
"""

MASS_ADDITION = ("2006-05", 720)
DELETION = "2007-05"
QUIET_MONTHS = {"2005-04", "2005-09", "2006-01", "2006-08", "2007-02", "2007-09"}


def section(rng: random.Random, k: int) -> str:
    paras = []
    for _ in range(rng.randint(1, 3)):
        links = "".join(f'<a href="#r{k}">ref</a>' for _ in range(rng.randint(0, 3)))
        paras.append(f"<p>text {links}</p>")
    extra = ""
    if rng.random() < 0.3:
        items = "".join(f"<li>item <a href='#'>x</a></li>" for _ in range(rng.randint(2, 4)))
        extra = f"<ul>{items}</ul>"
    return f'<div class="section"><h2>Section {k}</h2>{"".join(paras)}{extra}</div>'


def article(sections: list[str], junk: int = 0) -> str:
    toc = "".join(f"<li><a href='#s{i}'>s{i}</a></li>" for i in range(len(sections)))
    body = "".join(sections) + "".join(f"<h2>x</h2>" for _ in range(junk))
    return ("<html><head><title>Article</title><meta charset='utf-8'><link rel='stylesheet' href='s.css'></head>"
            f"<body><div id='content'><h1>Article</h1><div class='toc'><ul>{toc}</ul></div>{body}</div>"
            "<div id='footer'><p>footer</p></div></body></html>\n")


def blanked() -> str:
    return "<html><head><title>Article</title></head><body><p></p></body></html>\n"


def main() -> None:
    rng = random.Random(20160811)
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "sample_document.html").write_text(SAMPLE_DOCUMENT)
    out = DATA / "wiki_fixture"
    out.mkdir(exist_ok=True)
    for old in out.glob("*.html"):
        old.unlink()
    sections = [section(rng, k) for k in range(40)]
    rows = ["timestamp,revision_id,file_path"]
    rid = 1000
    for year in (2005, 2006, 2007):
        for month in range(1, 13):
            key = f"{year:04d}-{month:02d}"
            if key in QUIET_MONTHS:
                continue
            start = datetime(year, month, 1, tzinfo=timezone.utc)
            events = []
            for _ in range(rng.randint(2, 4)):
                if rng.random() < 0.6:
                    sections.append(section(rng, len(sections)))
                elif len(sections) > 40:
                    sections[rng.randrange(len(sections))] = section(rng, rng.randrange(100))
                events.append(article(sections))
            # vandal edit followed by its revert, alone in the month
            if key == MASS_ADDITION[0]:
                events = [article(sections, junk=MASS_ADDITION[1]), article(sections)]
            if key == DELETION:
                events = [blanked(), article(sections)]
            for j, doc in enumerate(events):
                rid += 1
                ts = start + timedelta(days=2 + 6 * j, hours=rng.randint(0, 23), minutes=rng.randint(0, 59))
                name = f"{rid}.html"
                (out / name).write_text(doc)
                rows.append(f"{ts.strftime('%Y-%m-%dT%H:%M:%SZ')},{rid},{name}")
    (out / "manifest.csv").write_text("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
