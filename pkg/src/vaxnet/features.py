"""Vocabulary, bag-of-words and sequence encodings, balanced sampling, splitting."""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .community import ANTIVAXX, OTHER

PAD = 0
UNK = 1
BOW = "bow"
SEQ = "seq"


def _surfaces(doc) -> list[str]:
    if hasattr(doc, "surfaces"):
        return doc.surfaces
    return list(doc)


@dataclass(frozen=True)
class Vocabulary:
    index: dict[str, int]
    min_df: int = 1
    max_size: int = 0

    def __post_init__(self):
        ids = sorted(self.index.values())
        if ids != list(range(2, 2 + len(ids))):
            raise ValueError("vocabulary indices must be dense from 2")

    @property
    def size(self) -> int:
        return len(self.index) + 2

    def lookup(self, token: str) -> int:
        return self.index.get(token, UNK)

    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.tokens()).encode("utf-8")).hexdigest()[:16]

    def write(self, fh: IO[str]) -> None:
        for tok in self.tokens():
            fh.write(f"{tok}\t{self.index[tok]}\n")

    @classmethod
    def read(cls, fh: IO[str]) -> "Vocabulary":
        index = {}
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                tok, idx = line.rsplit("\t", 1)
                index[tok] = int(idx)
            except ValueError as exc:
                raise ValueError(f"vocabulary line {lineno}: expected token<TAB>index") from exc
        return cls(index)


def build_vocabulary(documents: Iterable, min_df: int = 2, max_size: int = 20000) -> Vocabulary:
    """Tokens in at least ``min_df`` documents, most frequent first (ties lexicographic)."""
    if min_df < 1:
        raise ValueError("min_df must be >= 1")
    tf: Counter = Counter()
    df: Counter = Counter()
    n_docs = 0
    for doc in documents:
        toks = _surfaces(doc)
        n_docs += 1
        tf.update(toks)
        df.update(set(toks))
    if n_docs == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted((t for t in tf if df[t] >= min_df), key=lambda t: (-tf[t], t))
    if max_size:
        kept = kept[:max_size]
    return Vocabulary({t: i + 2 for i, t in enumerate(kept)}, min_df, max_size)


def vectorize_bow(doc, vocab: Vocabulary) -> dict[int, int]:
    return dict(sorted(Counter(vocab.lookup(t) for t in _surfaces(doc)).items()))


def encode_sequence(doc, vocab: Vocabulary, max_len: int) -> list[int]:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ids = [vocab.lookup(t) for t in _surfaces(doc)[:max_len]]
    return ids + [PAD] * (max_len - len(ids))


@dataclass(frozen=True)
class LabeledSet:
    samples: list
    labels: np.ndarray
    author_ids: list[str]
    representation: str = "doc"
    vocab_size: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (len(self.samples) == len(self.labels) == len(self.author_ids)):
            raise ValueError("samples, labels and author_ids must have equal length")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx: Sequence[int]) -> "LabeledSet":
        idx = list(idx)
        return replace(
            self,
            samples=[self.samples[i] for i in idx],
            labels=self.labels[idx] if idx else self.labels[:0],
            author_ids=[self.author_ids[i] for i in idx],
        )

    def matrix(self):
        """CSR count matrix for BOW sets, int array of ids for sequence sets."""
        if self.representation == BOW:
            return bow_matrix(self.samples, self.vocab_size)
        if self.representation == SEQ:
            return np.asarray(self.samples, dtype=np.int64).reshape(len(self.samples), -1)
        raise ValueError(f"set of raw documents has no matrix form ({self.representation})")


def bow_matrix(samples: Sequence[dict[int, int]], vocab_size: int) -> sp.csr_matrix:
    indptr, indices, data = [0], [], []
    for s in samples:
        for j, c in sorted(s.items()):
            if not 0 <= j < vocab_size:
                raise ValueError(f"feature index {j} outside vocabulary of size {vocab_size}")
            indices.append(j)
            data.append(float(c))
        indptr.append(len(indices))
    return sp.csr_matrix((data, indices, indptr), shape=(len(samples), vocab_size), dtype=np.float64)


def balanced_sample(documents: Iterable, labels: dict[str, str], seed: int) -> LabeledSet:
    """All positive authors plus an equally sized seeded sample of negatives."""
    docs = sorted((d for d in documents if d.author_id in labels), key=lambda d: d.author_id)
    pos = [d for d in docs if labels[d.author_id] == ANTIVAXX]
    neg = [d for d in docs if labels[d.author_id] == OTHER]
    if len(neg) < len(pos):
        raise ValueError(f"only {len(neg)} negative authors for {len(pos)} positives")
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(neg), size=len(pos), replace=False).tolist())
    picked = pos + [neg[i] for i in chosen]
    y = [1] * len(pos) + [0] * len(pos)
    order = rng.permutation(len(picked)).tolist()
    return LabeledSet(
        samples=[picked[i] for i in order],
        labels=np.array([y[i] for i in order], dtype=np.int64),
        author_ids=[picked[i].author_id for i in order],
    )


def train_test_split(data: LabeledSet, train_fraction: float = 0.8, seed: int = 0) -> tuple[LabeledSet, LabeledSet]:
    """Stratified split; each class puts floor(fraction * n) samples (at least one) in train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    for cls in (0, 1):
        members = np.flatnonzero(data.labels == cls)
        if len(members) < 2:
            raise ValueError(f"class {cls} has {len(members)} sample(s); need at least 2")
        n_train = min(max(int(np.floor(train_fraction * len(members))), 1), len(members) - 1)
        train_idx.extend(rng.permutation(members)[:n_train].tolist())
    in_train = set(train_idx)
    train = sorted(in_train)
    test = [i for i in range(len(data)) if i not in in_train]
    return data.subset(train), data.subset(test)


def vectorize_set(data: LabeledSet, vocab: Vocabulary, representation: str, max_len: int = 256) -> LabeledSet:
    if representation == BOW:
        samples = [vectorize_bow(d, vocab) for d in data.samples]
    elif representation == SEQ:
        samples = [encode_sequence(d, vocab, max_len) for d in data.samples]
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return replace(data, samples=samples, representation=representation, vocab_size=vocab.size)


# --- archive format -------------------------------------------------------

def write_archive(parts: dict[str, LabeledSet], fh: IO[str]) -> None:
    """JSONL rows ``{author_id, label, split, bow|ids}``."""
    for split_name, data in parts.items():
        key = "bow" if data.representation == BOW else "ids"
        for a, y, s in zip(data.author_ids, data.labels.tolist(), data.samples):
            val = {str(k): v for k, v in s.items()} if key == "bow" else list(s)
            fh.write(json.dumps({"author_id": a, "label": int(y), "split": split_name, key: val}) + "\n")


def read_archive(fh: IO[str], vocab_size: int) -> dict[str, LabeledSet]:
    rows: dict[str, list] = {}
    rep = None
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if "bow" in rec:
                r, sample = BOW, {int(k): int(v) for k, v in rec["bow"].items()}
            else:
                r, sample = SEQ, [int(v) for v in rec["ids"]]
            row = (rec["author_id"], int(rec["label"]), sample)
            split_name = rec.get("split", "all")
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise ValueError(f"archive line {lineno}: {exc}") from exc
        if rep is not None and r != rep:
            raise ValueError(f"archive line {lineno}: mixed representations")
        rep = r
        rows.setdefault(split_name, []).append(row)
    return {
        name: LabeledSet(
            samples=[s for _, _, s in rs],
            labels=np.array([y for _, y, _ in rs], dtype=np.int64),
            author_ids=[a for a, _, _ in rs],
            representation=rep,
            vocab_size=vocab_size,
        )
        for name, rs in rows.items()
    }
