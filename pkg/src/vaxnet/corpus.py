"""Per-author documents: tokenization, emoji aliasing and document assembly."""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import IO, Iterable, NamedTuple

WORD = "word"
HASHTAG = "hashtag"
EMOJI = "emoji_alias"

UNKNOWN_EMOJI = ":emoji:"

_URL_RE = re.compile(r"https?://\S*", re.IGNORECASE)
_TOKEN_RE = re.compile(r"@[a-z0-9_]+|#[a-z0-9_]+|[a-z0-9]+")

# Joiners, variation selectors and skin-tone modifiers that did not form part of
# a known sequence carry no meaning on their own.
_EMOJI_GLUE = frozenset([0x200D, 0xFE0E, 0xFE0F, 0x20E3, *range(0x1F3FB, 0x1F400)])
_PICTOGRAPHIC_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2300, 0x23FF),
    (0x2B00, 0x2BFF),
    (0x1F1E6, 0x1F1FF),
    (0xE0020, 0xE007F),
)


class Token(NamedTuple):
    kind: str
    surface: str


@dataclass(frozen=True)
class UserDocument:
    author_id: str
    tokens: tuple[Token, ...]
    n_posts: int
    # token count of each post, in order; bigrams never span these boundaries
    post_lengths: tuple[int, ...] = ()

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    def posts(self) -> list[list[str]]:
        lengths = self.post_lengths or (len(self.tokens),)
        out, start = [], 0
        for n in lengths:
            out.append([t.surface for t in self.tokens[start:start + n]])
            start += n
        return out


@lru_cache(maxsize=1)
def emoji_table() -> tuple[dict[str, str], int]:
    """Return the bundled ``sequence -> alias`` table and its longest key length."""
    table: dict[str, str] = {}
    text = resources.files("vaxnet.data").joinpath("emoji_aliases.tsv").read_text("utf-8")
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        codes, alias = line.split("\t")
        table["".join(chr(int(c, 16)) for c in codes.split())] = alias
    return table, max(len(k) for k in table)


def _is_pictographic(cp: int) -> bool:
    return any(lo <= cp <= hi for lo, hi in _PICTOGRAPHIC_RANGES)


def map_emoji(seq: str) -> Token | None:
    """Alias for an emoji codepoint sequence.

    Returns None when ``seq`` is not an emoji at all and the generic
    ``:emoji:`` token for pictographs missing from the bundled table.
    """
    if not seq:
        return None
    table, _ = emoji_table()
    alias = table.get(seq)
    if alias is None:
        alias = table.get(seq.replace("\ufe0f", ""))
    if alias is not None:
        return Token(EMOJI, alias)
    if _is_pictographic(ord(seq[0])):
        return Token(EMOJI, UNKNOWN_EMOJI)
    return None


def _fold(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return decomposed.encode("ascii", "ignore").decode("ascii").lower()


def _text_tokens(chunk: str) -> list[Token]:
    out = []
    for m in _TOKEN_RE.finditer(_fold(chunk)):
        s = m.group()
        if s[0] == "@":
            continue
        out.append(Token(HASHTAG, s) if s[0] == "#" else Token(WORD, s))
    return out


def tokenize(text: str) -> list[Token]:
    """Split a post into word, hashtag and emoji-alias tokens.

    URLs and @mentions are dropped; everything else that is not alphanumeric
    acts as a separator.
    """
    table, longest = emoji_table()
    text = _URL_RE.sub(" ", text)
    tokens: list[Token] = []
    buf: list[str] = []
    i, n = 0, len(text)
    while i < n:
        cp = ord(text[i])
        # ASCII never starts an emoji we care about except keycaps ("1️⃣")
        if cp < 0x80 and not (i + 1 < n and ord(text[i + 1]) in (0xFE0F, 0x20E3)):
            buf.append(text[i])
            i += 1
            continue
        match = None
        for size in range(min(longest, n - i), 0, -1):
            alias = table.get(text[i:i + size])
            if alias is not None:
                match = (size, alias)
                break
        if match is None and _is_pictographic(cp):
            match = (1, UNKNOWN_EMOJI)
        if match is not None:
            tokens.extend(_text_tokens("".join(buf)))
            buf = []
            tokens.append(Token(EMOJI, match[1]))
            i += match[0]
        elif cp in _EMOJI_GLUE:
            buf.append(" ")
            i += 1
        else:
            buf.append(text[i])
            i += 1
    tokens.extend(_text_tokens("".join(buf)))
    return tokens


def extract_hashtags(text: str) -> list[str]:
    """Hashtags of ``text`` in order of appearance, lowercased, without '#'."""
    return [t.surface[1:] for t in tokenize(text) if t.kind == HASHTAG]


def build_documents(dataset) -> list[UserDocument]:
    """One document per author with at least one original post, sorted by author."""
    by_author: dict[str, list] = {}
    for post in dataset.posts:
        if not post.is_retweet:
            by_author.setdefault(post.author_id, []).append(post)
    docs = []
    for author in sorted(by_author):
        posts = sorted(by_author[author], key=lambda p: (p.timestamp, p.post_id))
        tokens: list[Token] = []
        lengths = []
        for p in posts:
            toks = tokenize(p.text)
            tokens.extend(toks)
            lengths.append(len(toks))
        docs.append(UserDocument(author, tuple(tokens), len(posts), tuple(lengths)))
    return docs


def token_from_surface(surface: str) -> Token:
    if surface.startswith("#"):
        return Token(HASHTAG, surface)
    if len(surface) > 1 and surface.startswith(":") and surface.endswith(":"):
        return Token(EMOJI, surface)
    return Token(WORD, surface)


def write_corpus(docs: Iterable[UserDocument], fh: IO[str]) -> None:
    for d in docs:
        rec = {
            "author_id": d.author_id,
            "tokens": d.surfaces,
            "n_posts": d.n_posts,
            "post_lengths": list(d.post_lengths),
        }
        fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_corpus(fh: IO[str]) -> list[UserDocument]:
    docs = []
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            tokens = tuple(token_from_surface(s) for s in rec["tokens"])
            lengths = tuple(rec.get("post_lengths") or (len(tokens),))
            n_posts = int(rec.get("n_posts", len(lengths)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"corpus line {lineno}: {exc}") from exc
        if sum(lengths) != len(tokens):
            raise ValueError(f"corpus line {lineno}: post_lengths do not add up to token count")
        docs.append(UserDocument(rec["author_id"], tokens, n_posts, lengths))
    return docs
