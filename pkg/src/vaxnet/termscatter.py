"""Term-association scatter: per-class term counts placed by dense frequency rank."""
from __future__ import annotations

import gzip
import json
from collections import Counter
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping
from xml.sax.saxutils import escape

from .community import ANTIVAXX

TSV_COLUMNS = ("term", "count_pos", "count_neg", "x", "y", "score")


@dataclass(frozen=True)
class TermStats:
    term: str
    count_pos: int
    count_neg: int
    x: float
    y: float
    score: float


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    text = resources.files("vaxnet.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


@lru_cache(maxsize=None)
def default_dictionary() -> frozenset[str]:
    raw = resources.files("vaxnet.data").joinpath("english_words.txt.gz").read_bytes()
    return frozenset(gzip.decompress(raw).decode("ascii").split())


def load_wordlist(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip() and not w.startswith("#"))


def _is_word(tok: str) -> bool:
    return not tok.startswith("#") and not (len(tok) > 1 and tok[0] == ":" and tok[-1] == ":")


def _posts(doc) -> list[list[str]]:
    if hasattr(doc, "posts"):
        return doc.posts()
    return [list(doc)]


def count_terms(
    documents: Iterable,
    labels: Mapping[str, str],
    ngram_max: int = 2,
    min_count: int = 1,
    stopwords: Iterable[str] = (),
    dictionary: Iterable[str] | None = None,
) -> dict[str, tuple[int, int]]:
    """Occurrences of each unigram/bigram in Antivaxx vs Other documents.

    Bigrams are adjacent tokens of one post. Terms containing a stopword are
    dropped; with a dictionary, word unigrams outside it are dropped.
    Documents whose author is not in ``labels`` are ignored.
    """
    if not 1 <= ngram_max <= 2:
        raise ValueError("ngram_max must be 1 or 2")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    stop = frozenset(stopwords)
    vocab = None if dictionary is None else frozenset(dictionary)
    pos: Counter = Counter()
    neg: Counter = Counter()
    n_docs = 0
    for doc in documents:
        lab = labels.get(doc.author_id)
        if lab is None:
            continue
        n_docs += 1
        target = pos if lab == ANTIVAXX else neg
        for post in _posts(doc):
            for i, tok in enumerate(post):
                if tok not in stop and (vocab is None or not _is_word(tok) or tok in vocab):
                    target[tok] += 1
                if ngram_max >= 2 and i + 1 < len(post):
                    nxt = post[i + 1]
                    if tok not in stop and nxt not in stop:
                        target[f"{tok} {nxt}"] += 1
    if n_docs == 0:
        raise ValueError("empty corpus: no labelled documents")
    out = {}
    for term in sorted(pos.keys() | neg.keys()):
        cp, cn = pos[term], neg[term]
        if cp + cn >= min_count:
            out[term] = (cp, cn)
    return out


def dense_rank_scaled(values: list[int]) -> list[float]:
    """Dense rank of each value mapped onto [0, 1]; the lowest value gets 0."""
    distinct = sorted(set(values))
    if len(distinct) == 1:
        only = 1.0 if distinct[0] > 0 else 0.0
        return [only] * len(values)
    rank = {v: i / (len(distinct) - 1) for i, v in enumerate(distinct)}
    return [rank[v] for v in values]


def characteristic_score(x: float, y: float) -> float:
    """Harmonic mean of x and 1 - y."""
    a, b = x, 1.0 - y
    return 0.0 if a + b == 0 else 2 * a * b / (a + b)


def compute_coordinates(counts: Mapping[str, tuple[int, int]]) -> list[TermStats]:
    if not counts:
        raise ValueError("no terms to place")
    terms = sorted(counts)
    xs = dense_rank_scaled([counts[t][0] for t in terms])
    ys = dense_rank_scaled([counts[t][1] for t in terms])
    stats = [
        TermStats(t, counts[t][0], counts[t][1], x, y, characteristic_score(x, y))
        for t, x, y in zip(terms, xs, ys)
    ]
    stats.sort(key=lambda s: (-s.score, s.term))
    return stats


def _svg(stats: list[TermStats], n_labels: int = 20) -> str:
    size, pad = 640, 60
    span = size - 2 * pad

    def px(v):
        return pad + v * span

    def py(v):
        return size - pad - v * span

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" font-family="sans-serif">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#444"/>',
        f'<line x1="{px(0.5):.2f}" y1="{pad}" x2="{px(0.5):.2f}" y2="{size - pad}" stroke="#bbb" stroke-dasharray="4 4"/>',
        f'<line x1="{pad}" y1="{py(0.5):.2f}" x2="{size - pad}" y2="{py(0.5):.2f}" stroke="#bbb" stroke-dasharray="4 4"/>',
        f'<text x="{size / 2:.0f}" y="{size - 20}" text-anchor="middle" font-size="13">'
        "Antivaxx frequency (dense rank)</text>",
        f'<text x="20" y="{size / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {size / 2:.0f})">Other frequency (dense rank)</text>',
    ]
    for s in sorted(stats, key=lambda s: s.term):
        lines.append(
            f'<circle cx="{px(s.x):.2f}" cy="{py(s.y):.2f}" r="3" '
            f'fill="#c0392b" fill-opacity="{0.25 + 0.75 * s.score:.3f}"><title>{escape(s.term)}</title></circle>'
        )
    for s in stats[:n_labels]:
        lines.append(
            f'<text x="{px(s.x) + 5:.2f}" y="{py(s.y) - 5:.2f}" font-size="10">{escape(s.term)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_scatter(stats: list[TermStats], path, fmt: str = "tsv") -> None:
    """Write the scatter as TSV, JSON or SVG; output bytes depend only on ``stats``."""
    path = Path(path)
    if fmt == "tsv":
        rows = ["\t".join(TSV_COLUMNS)]
        rows += [
            f"{s.term}\t{s.count_pos}\t{s.count_neg}\t{s.x!r}\t{s.y!r}\t{s.score!r}" for s in stats
        ]
        body = "\n".join(rows) + "\n"
    elif fmt == "json":
        body = json.dumps({"terms": [asdict(s) for s in stats]}, indent=1, sort_keys=True) + "\n"
    elif fmt == "svg":
        body = _svg(list(stats))
    else:
        raise ValueError(f"unknown scatter format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(body)
