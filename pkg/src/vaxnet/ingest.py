"""Post datasets: parsing, keyword and author filters, triage listings, synthesis."""
from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable

import numpy as np

from .corpus import extract_hashtags, tokenize

log = logging.getLogger(__name__)

_FIELDS = (
    "post_id", "author_id", "author_handle", "is_verified", "timestamp", "text",
    "is_retweet", "retweeted_post_id", "retweeted_author_id", "hashtags",
)


class IngestError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


@dataclass(frozen=True)
class RawPost:
    post_id: str
    author_id: str
    author_handle: str
    is_verified: bool
    timestamp: int
    text: str
    is_retweet: bool
    retweeted_post_id: str | None = None
    retweeted_author_id: str | None = None
    hashtags: tuple[str, ...] = ()

    def __post_init__(self):
        linked = self.retweeted_post_id is not None and self.retweeted_author_id is not None
        unlinked = self.retweeted_post_id is None and self.retweeted_author_id is None
        if self.is_retweet and not linked:
            raise IngestError(f"retweet {self.post_id!r} lacks retweeted_post_id/retweeted_author_id")
        if not self.is_retweet and not unlinked:
            raise IngestError(f"original post {self.post_id!r} carries retweet linkage fields")

    def to_record(self) -> dict:
        rec = {name: getattr(self, name) for name in _FIELDS}
        rec["hashtags"] = list(self.hashtags)
        return rec


@dataclass(frozen=True)
class Dataset:
    posts: tuple[RawPost, ...]
    provenance: str = field(default="", compare=False)
    skipped: int = field(default=0, compare=False)
    # planted author -> community labels, only set by the synthetic generator
    planted: dict[str, int] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        seen = set()
        for p in self.posts:
            if p.post_id in seen:
                raise IngestError(f"duplicate post_id {p.post_id!r}")
            seen.add(p.post_id)

    def __len__(self) -> int:
        return len(self.posts)

    def replace_posts(self, posts: Iterable[RawPost]) -> "Dataset":
        return Dataset(tuple(posts), self.provenance, 0, self.planted)


@dataclass(frozen=True)
class KeywordFilter:
    phrases: tuple[str, ...]

    def __post_init__(self):
        if not self.phrases:
            raise ValueError("keyword list is empty")
        if len(set(self.phrases)) != len(self.phrases):
            raise ValueError("keyword list contains duplicates")
        bad = [p for p in self.phrases if p != p.lower() or not p.strip()]
        if bad:
            raise ValueError(f"keywords must be non-blank lowercase: {bad[:3]}")

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "KeywordFilter":
        phrases: list[str] = []
        for line in lines:
            line = line.strip().lower()
            if line and not line.startswith("# ") and line != "#" and line not in phrases:
                phrases.append(line)
        return cls(tuple(phrases))

    @classmethod
    def default(cls) -> "KeywordFilter":
        text = resources.files("vaxnet.data").joinpath("keywords.txt").read_text("utf-8")
        return cls.from_lines(text.splitlines())

    def pattern(self) -> re.Pattern:
        alts = "|".join(re.escape(p) for p in sorted(self.phrases, key=len, reverse=True))
        return re.compile(rf"(?<![a-z0-9])(?:{alts})(?![a-z0-9])")


def record_to_post(rec: dict) -> RawPost:
    if not isinstance(rec, dict):
        raise ValueError("record is not a JSON object")
    kind = rec.get("kind")
    if rec.get("is_quote") or (kind is not None and kind not in ("original", "retweet")):
        raise ValueError(f"unsupported record kind {kind or 'quote'!r}")
    for name in ("post_id", "author_id", "text", "is_retweet", "timestamp"):
        if name not in rec:
            raise ValueError(f"missing field {name!r}")
    is_retweet = rec["is_retweet"]
    if not isinstance(is_retweet, bool):
        raise ValueError("is_retweet must be a boolean")
    if kind is not None and (kind == "retweet") != is_retweet:
        raise ValueError("kind disagrees with is_retweet")
    text = rec["text"]
    if not isinstance(text, str):
        raise ValueError("text must be a string")
    ts = rec["timestamp"]
    if isinstance(ts, bool) or not isinstance(ts, (int, float)) or ts != int(ts):
        raise ValueError("timestamp must be integral UTC seconds")
    hashtags = tuple(extract_hashtags(text))
    given = rec.get("hashtags")
    if given is not None:
        norm = {str(h).lower().lstrip("#") for h in given}
        if norm != set(hashtags):
            raise ValueError(f"hashtags {sorted(norm)} do not match text {sorted(set(hashtags))}")
    rt_post = rec.get("retweeted_post_id")
    rt_author = rec.get("retweeted_author_id")
    return RawPost(
        post_id=str(rec["post_id"]),
        author_id=str(rec["author_id"]),
        author_handle=str(rec.get("author_handle") or rec["author_id"]),
        is_verified=bool(rec.get("is_verified", False)),
        timestamp=int(ts),
        text=text,
        is_retweet=is_retweet,
        retweeted_post_id=None if rt_post is None else str(rt_post),
        retweeted_author_id=None if rt_author is None else str(rt_author),
        hashtags=hashtags,
    )


def parse_dataset(lines: Iterable[str], strict: bool = False, provenance: str = "") -> Dataset:
    """Parse line-delimited JSON posts.

    Malformed lines raise in strict mode and are skipped (and counted in
    ``Dataset.skipped``) otherwise. Duplicate post ids are always an error.
    """
    posts: list[RawPost] = []
    seen: dict[str, int] = {}
    skipped = 0
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            post = record_to_post(json.loads(line))
        except ValueError as exc:  # includes JSONDecodeError and IngestError
            if strict:
                raise IngestError(str(exc), lineno) from exc
            skipped += 1
            log.debug("skipping line %d: %s", lineno, exc)
            continue
        if post.post_id in seen:
            raise IngestError(f"duplicate post_id {post.post_id!r} (first seen on line {seen[post.post_id]})", lineno)
        seen[post.post_id] = lineno
        posts.append(post)
    if skipped:
        log.warning("skipped %d malformed line(s)", skipped)
    return Dataset(tuple(posts), provenance, skipped)


def read_dataset(path, strict: bool = False) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh, strict=strict, provenance=str(path))


def write_dataset(dataset: Dataset, fh: IO[str]) -> None:
    for p in dataset.posts:
        fh.write(json.dumps(p.to_record(), ensure_ascii=False) + "\n")


def filter_by_keywords(dataset: Dataset, keywords: KeywordFilter) -> Dataset:
    pat = keywords.pattern()
    return dataset.replace_posts(p for p in dataset.posts if pat.search(p.text.lower()))


def filter_retweet_only_users(dataset: Dataset) -> Dataset:
    contributors = {p.author_id for p in dataset.posts if not p.is_retweet}
    return dataset.replace_posts(p for p in dataset.posts if p.author_id in contributors)


def top_authors(dataset: Dataset, n: int, by: str = "originals") -> list[tuple[str, int]]:
    """Most active (``originals``) or most retweeted (``times_retweeted``) authors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if by == "originals":
        counts = Counter(p.author_id for p in dataset.posts if not p.is_retweet)
    elif by in ("times_retweeted", "retweets"):
        counts = Counter(p.retweeted_author_id for p in dataset.posts if p.is_retweet)
    else:
        raise ValueError(f"unknown ranking {by!r}")
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:n]


# --- synthetic data -------------------------------------------------------

_FILLER = (
    "people health shot dose kids school doctor news week study data risk flu "
    "covid virus trial test safe effect family mother work state plan today "
    "public care report science clinic cases world city time year support help "
    "mask nurse parent child case team local million program fund policy "
    "hospital medicine research result expert record early free open daily "
    "share watch read story talk call update thanks great good hope life home "
    "community history change future question answer reason choice right "
    "power control fear trust system truth freedom liberty nature body immune "
    "natural chemical injury damage harm danger warning evidence proof fact"
).split()

ANTIVAXX_TERMS = ("bigpharma", "sheeple", "depopulation", "microchip")
MARKER_HASHTAGS = ("illuminati", "praybig", "notest", "mykidsmychoice", "vaccineroulette")
_OTHER_HASHTAGS = (
    ("vaccineswork", "publichealth", "science", "getvaccinated", "immunization"),
    ("flushot", "healthcare", "medicare", "election", "vote"),
    ("socialism", "medicareforall", "strike", "union", "housing"),
    ("cdc", "unicef", "research", "globalhealth", "measles"),
)
_KEYWORDS = ("vaccine", "vaccines work", "vaccination", "vax", "anti-vax", "vaccine injury")
ALPHA, OMEGA = "alpha", "omega"
_EPOCH = 1575158400  # 2019-12-01T00:00:00Z


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 200
    n_communities: int = 2
    # 0: every community draws the same words; 1: each draws only its own share
    vocab_shift: float = 0.5
    # expected retweets made per user
    retweet_density: float = 5.0
    in_community_prob: float = 0.95
    ordering_signal: bool = False
    posts_per_user: tuple[int, int] = (1, 4)
    tokens_per_post: tuple[int, int] = (6, 14)
    antivaxx_community: int = 0
    planted_rate: float = 1.0

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("n_users must be >= 2")
        if self.n_communities < 2:
            raise ValueError("n_communities must be >= 2")
        if self.n_users < self.n_communities:
            raise ValueError("need at least one user per community")
        if not 0.0 <= self.vocab_shift <= 1.0:
            raise ValueError("vocab_shift must lie in [0, 1]")
        if self.retweet_density < 0:
            raise ValueError("retweet_density must be >= 0")
        if not 0.0 <= self.in_community_prob <= 1.0:
            raise ValueError("in_community_prob must lie in [0, 1]")
        if not 0.0 <= self.planted_rate <= 1.0:
            raise ValueError("planted_rate must lie in [0, 1]")
        lo, hi = self.posts_per_user
        if lo < 1 or hi < lo:
            raise ValueError("posts_per_user must satisfy 1 <= lo <= hi")
        lo, hi = self.tokens_per_post
        if lo < 1 or hi < lo:
            raise ValueError("tokens_per_post must satisfy 1 <= lo <= hi")
        if not 0 <= self.antivaxx_community < self.n_communities:
            raise ValueError("antivaxx_community out of range")
        if self.ordering_signal and self.n_communities != 2:
            raise ValueError("ordering_signal requires exactly 2 communities")

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        raw = dict(raw)
        for key in ("posts_per_user", "tokens_per_post"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)


def _word_probs(cfg: SynthConfig) -> np.ndarray:
    k = cfg.n_communities
    base = np.full((k, len(_FILLER)), 1.0 - cfg.vocab_shift)
    for c in range(k):
        base[c, c::k] += cfg.vocab_shift * k
    return base / base.sum(axis=1, keepdims=True)


def generate_synthetic(cfg: SynthConfig, seed: int) -> Dataset:
    """Planted-community dataset; ``Dataset.planted`` holds the true labels.

    Users are assigned round-robin to communities. Each user writes originals
    whose words follow a community-skewed distribution and retweets mostly
    within its own community. The antivaxx community also uses the marker
    hashtags and a few exclusive terms.

    With ``ordering_signal`` the two communities are built in twin pairs whose
    documents hold identical token multisets; the positive twin has "alpha"
    before "omega" and the negative twin the reverse.
    """
    rng = np.random.default_rng(seed)
    k = cfg.n_communities
    users = [f"u{i:05d}" for i in range(cfg.n_users)]
    community = {u: i % k for i, u in enumerate(users)}
    members = [[u for u in users if community[u] == c] for c in range(k)]
    probs = _word_probs(cfg)
    texts: dict[str, list[str]] = {}

    def post_words(c: int) -> list[str]:
        n_tok = int(rng.integers(cfg.tokens_per_post[0], cfg.tokens_per_post[1] + 1))
        words = list(rng.choice(_FILLER, size=n_tok, p=probs[c]))
        words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(_KEYWORDS)))
        if cfg.ordering_signal:
            return words
        if c == cfg.antivaxx_community:
            if rng.random() < cfg.planted_rate:
                words.append(str(rng.choice(ANTIVAXX_TERMS)))
            if rng.random() < cfg.planted_rate:
                words.append("#" + str(rng.choice(MARKER_HASHTAGS)))
        elif rng.random() < cfg.planted_rate:
            tags = _OTHER_HASHTAGS[c % len(_OTHER_HASHTAGS)]
            words.append("#" + str(rng.choice(tags)))
        return words

    if cfg.ordering_signal:
        pos = cfg.antivaxx_community
        for u_pos, u_neg in zip(members[pos], members[1 - pos]):
            n_posts = int(rng.integers(cfg.posts_per_user[0], cfg.posts_per_user[1] + 1))
            posts = [post_words(int(rng.integers(0, 2))) for _ in range(n_posts)]
            carrier = int(rng.integers(0, n_posts))
            a, b = sorted(rng.choice(len(posts[carrier]) + 2, size=2, replace=False))
            with_pair = list(posts[carrier])
            with_pair.insert(int(a), ALPHA)
            with_pair.insert(int(b), OMEGA)
            swapped = [OMEGA if w == ALPHA else ALPHA if w == OMEGA else w for w in with_pair]
            texts[u_pos] = [" ".join(p) for p in posts[:carrier] + [with_pair] + posts[carrier + 1:]]
            texts[u_neg] = [" ".join(p) for p in posts[:carrier] + [swapped] + posts[carrier + 1:]]
        for u in users:  # odd user left without a twin
            if u not in texts:
                texts[u] = [" ".join(post_words(community[u]))]
    else:
        for u in users:
            n_posts = int(rng.integers(cfg.posts_per_user[0], cfg.posts_per_user[1] + 1))
            texts[u] = [" ".join(post_words(community[u])) for _ in range(n_posts)]

    verified = {u: bool(rng.random() < 0.05) for u in users}
    posts: list[RawPost] = []
    originals: dict[str, list[RawPost]] = {}
    for u in users:
        t = _EPOCH + int(rng.integers(0, 86400 * 30))
        for text in texts[u]:
            t += int(rng.integers(60, 86400))
            p = RawPost(f"p{len(posts):07d}", u, f"user_{u}", verified[u], t, text, False,
                        hashtags=tuple(extract_hashtags(text)))
            posts.append(p)
            originals.setdefault(u, []).append(p)

    for u in users:
        c = community[u]
        for _ in range(int(rng.poisson(cfg.retweet_density))):
            pool = members[c] if rng.random() < cfg.in_community_prob else users
            target = pool[int(rng.integers(0, len(pool)))]
            if target == u:
                continue
            src = originals[target][int(rng.integers(0, len(originals[target])))]
            text = f"RT @user_{target}: {src.text}"
            posts.append(RawPost(
                f"p{len(posts):07d}", u, f"user_{u}", verified[u],
                src.timestamp + int(rng.integers(1, 86400 * 7)), text, True,
                src.post_id, target, tuple(extract_hashtags(text)),
            ))
    return Dataset(tuple(posts), f"synthetic:seed={seed}", 0, community)


def twin_marginals_match(dataset: Dataset, antivaxx_community: int = 0) -> bool:
    """True when every ordering twin pair has identical token multisets.

    Pairs are rebuilt the way the generator forms them: the i-th positive
    member with the i-th negative member. Retweets are ignored.
    """
    if not dataset.planted:
        raise ValueError("dataset carries no planted communities")
    groups: dict[int, list[str]] = {}
    for u, c in sorted(dataset.planted.items()):
        groups.setdefault(c, []).append(u)
    if len(groups) != 2:
        raise ValueError("twin check needs exactly two planted communities")
    bag: dict[str, Counter] = {}
    for p in dataset.posts:
        if not p.is_retweet:
            bag.setdefault(p.author_id, Counter()).update(tok.surface for tok in tokenize(p.text))
    pos = groups[antivaxx_community]
    neg = groups[1 - antivaxx_community]
    return all(bag.get(a, Counter()) == bag.get(b, Counter()) for a, b in zip(pos, neg))

