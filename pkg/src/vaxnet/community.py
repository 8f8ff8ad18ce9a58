"""Modularity clustering of the retweet network and community characterization."""
from __future__ import annotations

import json
import warnings
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .graph import RetweetNetwork
from .ingest import MARKER_HASHTAGS

ANTIVAXX = "Antivaxx"
OTHER = "Other"


@dataclass(frozen=True)
class Partition:
    assignment: dict[str, int]

    def __post_init__(self):
        ids = set(self.assignment.values())
        if ids != set(range(len(ids))):
            raise ValueError("community ids must be dense integers starting at 0")

    @property
    def community_count(self) -> int:
        return len(set(self.assignment.values()))

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = defaultdict(list)
        for node in sorted(self.assignment):
            out[self.assignment[node]].append(node)
        return dict(sorted(out.items()))

    @classmethod
    def from_groups(cls, groups: Iterable[Iterable[str]]) -> "Partition":
        """Partition with ids ordered by size (largest first), ties by smallest member."""
        groups = [sorted(g) for g in groups if g]
        groups.sort(key=lambda g: (-len(g), g[0]))
        return cls({n: cid for cid, g in enumerate(groups) for n in g})


@dataclass(frozen=True)
class CommunitySummary:
    community: int
    size: int
    node_share: float
    retweet_share: float
    top_hashtags: list[tuple[str, int]]
    top_verified: list[tuple[str, int]]


def _symmetric(g: RetweetNetwork) -> tuple[list[str], list[dict[int, float]]]:
    nodes = g.sorted_nodes()
    index = {n: i for i, n in enumerate(nodes)}
    adj: list[dict[int, float]] = [dict() for _ in nodes]
    for (u, v), w in g.edges.items():
        i, j = index[u], index[v]
        adj[i][j] = adj[i].get(j, 0.0) + w
        adj[j][i] = adj[j].get(i, 0.0) + w
    return nodes, adj


def modularity(g: RetweetNetwork, p: Partition, resolution: float = 1.0) -> float:
    """Newman modularity of ``p`` on the symmetrized weighted graph."""
    missing = g.nodes - p.assignment.keys()
    if missing:
        raise ValueError(f"partition does not cover {len(missing)} node(s), e.g. {sorted(missing)[0]!r}")
    two_m = 2.0 * g.total_weight
    if two_m == 0:
        return 0.0
    internal: Counter = Counter()
    strength: Counter = Counter()
    for (u, v), w in g.edges.items():
        cu, cv = p.assignment[u], p.assignment[v]
        strength[cu] += w
        strength[cv] += w
        if cu == cv:
            internal[cu] += 2 * w
    q = 0.0
    for c in sorted(strength):
        q += internal[c] / two_m - resolution * (strength[c] / two_m) ** 2
    return q


def _local_moves(adj, k, two_m, resolution, order, comm):
    """One level of greedy node moves; returns True if any node changed community."""
    tot = defaultdict(float)
    for i, c in enumerate(comm):
        tot[c] += k[i]
    moved_any = False
    while True:
        moved = False
        for i in order:
            ci = comm[i]
            links: dict[int, float] = {}
            for j, w in adj[i].items():
                if j != i:
                    links[comm[j]] = links.get(comm[j], 0.0) + w
            tot[ci] -= k[i]
            best, best_gain = ci, links.get(ci, 0.0) - resolution * tot[ci] * k[i] / two_m
            for c, w_ic in links.items():
                gain = w_ic - resolution * tot[c] * k[i] / two_m
                if gain > best_gain + 1e-12:
                    best, best_gain = c, gain
            tot[best] += k[i]
            if best != ci:
                comm[i] = best
                moved = moved_any = True
        yield moved_any
        if not moved:
            return


def louvain(
    g: RetweetNetwork,
    seed: int = 0,
    resolution: float = 1.0,
    history: list[float] | None = None,
) -> Partition:
    """Louvain modularity maximization (local moves + aggregation).

    Node visit order at every level is a seeded permutation. If ``history``
    is given, the modularity of the full-graph partition after every
    local-move pass is appended to it.
    """
    if not g.nodes:
        raise ValueError("louvain needs a non-empty graph")
    rng = np.random.default_rng(seed)
    names, adj = _symmetric(g)
    # membership[orig] -> current aggregated node
    membership = list(range(len(names)))
    two_m = 2.0 * g.total_weight
    if two_m == 0:
        return Partition.from_groups([[n] for n in names])

    def current_partition():
        groups = defaultdict(list)
        for i, a in enumerate(membership):
            groups[a].append(names[i])
        return Partition.from_groups(groups.values())

    while True:
        n = len(adj)
        k = [sum(nb.values()) for nb in adj]
        comm = list(range(n))
        order = [int(i) for i in rng.permutation(n)]
        changed = False
        for changed in _local_moves(adj, k, two_m, resolution, order, comm):
            if history is not None:
                snapshot = [comm[a] for a in membership]
                groups = defaultdict(list)
                for i, c in enumerate(snapshot):
                    groups[c].append(names[i])
                history.append(modularity(g, Partition.from_groups(groups.values()), resolution))
        if not changed:
            break
        relabel = {c: i for i, c in enumerate(sorted(set(comm)))}
        new_adj: list[dict[int, float]] = [dict() for _ in relabel]
        for i, nb in enumerate(adj):
            ci = relabel[comm[i]]
            for j, w in nb.items():
                cj = relabel[comm[j]]
                new_adj[ci][cj] = new_adj[ci].get(cj, 0.0) + w
        membership = [relabel[comm[a]] for a in membership]
        adj = new_adj
        if len(adj) == 1:
            break
    return current_partition()


def brute_force_best_partition(g: RetweetNetwork, resolution: float = 1.0) -> tuple[Partition, float]:
    """Exact modularity optimum by enumerating every set partition (<= 10 nodes)."""
    names = g.sorted_nodes()
    n = len(names)
    if n > 10:
        raise ValueError(f"exhaustive search is limited to 10 nodes, graph has {n}")
    if n == 0:
        return Partition({}), 0.0
    index = {v: i for i, v in enumerate(names)}
    a = np.zeros((n, n))
    for (u, v), w in g.edges.items():
        a[index[u], index[v]] += w
        a[index[v], index[u]] += w
    k = a.sum(axis=1)
    two_m = k.sum()
    if two_m == 0:
        return Partition.from_groups([[v] for v in names]), 0.0
    rows = a.tolist()
    labels = [0] * n
    tot = [0.0] * n
    best = [-np.inf, None]

    def rec(i, n_blocks, internal, sq):
        if i == n:
            q = internal / two_m - resolution * sq / (two_m * two_m)
            if q > best[0] + 1e-12:
                best[0], best[1] = q, labels[:]
            return
        row = rows[i]
        for b in range(n_blocks + 1):
            link = 0.0
            for j in range(i):
                if labels[j] == b:
                    link += row[j]
            t = tot[b]
            labels[i] = b
            tot[b] = t + k[i]
            rec(i + 1, max(n_blocks, b + 1), internal + 2 * link,
                sq - t * t + (t + k[i]) ** 2)
            tot[b] = t

    rec(0, 0, 0.0, 0.0)
    groups = defaultdict(list)
    for i, b in enumerate(best[1]):
        groups[b].append(names[i])
    part = Partition.from_groups(groups.values())
    return part, modularity(g, part, resolution)


def summarize_communities(g: RetweetNetwork, p: Partition, dataset, top_k: int = 10) -> list[CommunitySummary]:
    """Per-community node share, retweet share, top hashtags and top verified accounts.

    Retweet share credits each edge's weight to the community of the
    retweeted (source) author.
    """
    members = p.members()
    n_nodes = len(p.assignment)
    total = g.total_weight
    influence: Counter = Counter()
    times_retweeted: Counter = Counter()
    for (u, v), w in g.edges.items():
        influence[p.assignment[u]] += w
        times_retweeted[u] += w

    hashtags: dict[int, Counter] = defaultdict(Counter)
    handles: dict[str, str] = {}
    verified: set[str] = set()
    for post in dataset.posts:
        handles.setdefault(post.author_id, post.author_handle)
        if post.is_verified:
            verified.add(post.author_id)
        c = p.assignment.get(post.author_id)
        if c is not None and not post.is_retweet:
            hashtags[c].update(post.hashtags)

    out = []
    for c, nodes in members.items():
        tags = sorted(hashtags[c].items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
        ver = sorted(
            ((handles.get(n, n), times_retweeted[n]) for n in nodes if n in verified),
            key=lambda kv: (-kv[1], kv[0]),
        )[:top_k]
        out.append(CommunitySummary(
            community=c,
            size=len(nodes),
            node_share=len(nodes) / n_nodes if n_nodes else 0.0,
            retweet_share=influence[c] / total if total else 0.0,
            top_hashtags=tags,
            top_verified=ver,
        ))
    out.sort(key=lambda s: (-s.node_share, s.community))
    return out


def label_binary(p: Partition, antivaxx_id: int) -> dict[str, str]:
    if antivaxx_id not in set(p.assignment.values()):
        raise ValueError(f"unknown community id {antivaxx_id} (partition has {p.community_count})")
    return {n: ANTIVAXX if c == antivaxx_id else OTHER for n, c in sorted(p.assignment.items())}


def suggest_antivaxx_community(
    summaries: Sequence[CommunitySummary],
    marker_hashtags: Iterable[str] = MARKER_HASHTAGS,
) -> int:
    """Community whose top hashtags overlap most with the marker set (advisory)."""
    if not summaries:
        raise ValueError("no community summaries")
    markers = {m.lower().lstrip("#") for m in marker_hashtags}
    scored = [(len(markers & {t for t, _ in s.top_hashtags}), s.community) for s in summaries]
    best_score = max(score for score, _ in scored)
    if best_score == 0:
        warnings.warn("no community uses any marker hashtag; defaulting to the smallest id", stacklevel=2)
    return min(c for score, c in scored if score == best_score)


# --- file formats ---------------------------------------------------------

def write_partition(p: Partition, fh: IO[str]) -> None:
    for n, c in sorted(p.assignment.items()):
        fh.write(f"{n}\t{c}\n")


def read_partition(fh: IO[str]) -> Partition:
    assignment = {}
    for lineno, line in enumerate(fh, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        try:
            n, c = line.split("\t")
            assignment[n] = int(c)
        except ValueError as exc:
            raise ValueError(f"partition line {lineno}: expected author_id<TAB>community_id") from exc
    return Partition(assignment)


def write_labels(labels: dict[str, str], fh: IO[str]) -> None:
    for n, lab in sorted(labels.items()):
        fh.write(f"{n}\t{lab}\n")


def read_labels(fh: IO[str]) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(fh, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2 or parts[1] not in (ANTIVAXX, OTHER, "1", "0"):
            raise ValueError(f"labels line {lineno}: expected author_id<TAB>{ANTIVAXX}|{OTHER}")
        out[parts[0]] = ANTIVAXX if parts[1] in (ANTIVAXX, "1") else OTHER
    return out


def summaries_to_json(summaries: Sequence[CommunitySummary], fh: IO[str]) -> None:
    rows = []
    for s in summaries:
        row = asdict(s)
        row["top_hashtags"] = [list(t) for t in s.top_hashtags]
        row["top_verified"] = [list(t) for t in s.top_verified]
        rows.append(row)
    json.dump({"communities": rows}, fh, indent=2, sort_keys=True)
    fh.write("\n")


def summaries_from_json(fh: IO[str]) -> list[CommunitySummary]:
    rows = json.load(fh)["communities"]
    return [
        CommunitySummary(
            community=r["community"], size=r["size"], node_share=r["node_share"],
            retweet_share=r["retweet_share"],
            top_hashtags=[tuple(t) for t in r["top_hashtags"]],
            top_verified=[tuple(t) for t in r["top_verified"]],
        )
        for r in rows
    ]
