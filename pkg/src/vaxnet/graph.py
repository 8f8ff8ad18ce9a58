"""Weighted directed retweet network.

An edge ``u -> v`` with weight ``w`` means author ``v`` retweeted author
``u`` ``w`` times, i.e. ``u`` influenced ``v``.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import IO


@dataclass(frozen=True)
class NodeInfo:
    handle: str = ""
    is_verified: bool = False


@dataclass(frozen=True)
class RetweetNetwork:
    nodes: frozenset[str]
    edges: dict[tuple[str, str], int]
    meta: dict[str, NodeInfo] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError(f"self-loop on {u!r}")
            if not isinstance(w, int) or w < 1:
                raise ValueError(f"edge {u}->{v} has invalid weight {w!r}")
            if u not in self.nodes or v not in self.nodes:
                raise ValueError(f"edge {u}->{v} references an unknown node")

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())

    def sorted_nodes(self) -> list[str]:
        return sorted(self.nodes)

    def subgraph(self, keep) -> "RetweetNetwork":
        keep = frozenset(keep) & self.nodes
        edges = {e: w for e, w in self.edges.items() if e[0] in keep and e[1] in keep}
        return RetweetNetwork(keep, edges, {n: m for n, m in self.meta.items() if n in keep})


@dataclass(frozen=True)
class NetworkStats:
    node_count: int
    edge_count: int
    total_weight: int
    out_strength: dict[str, int]
    in_strength: dict[str, int]


def build_network(dataset) -> RetweetNetwork:
    nodes: set[str] = set()
    edges: Counter = Counter()
    meta: dict[str, NodeInfo] = {}
    for p in dataset.posts:
        meta[p.author_id] = NodeInfo(p.author_handle, p.is_verified)
        if not p.is_retweet:
            nodes.add(p.author_id)
            continue
        src, dst = p.retweeted_author_id, p.author_id
        if src == dst:
            continue
        nodes.update((src, dst))
        edges[(src, dst)] += 1
    # ordered edge dict keeps serialization independent of post order
    ordered = {e: edges[e] for e in sorted(edges)}
    return RetweetNetwork(frozenset(nodes), ordered, {n: meta.get(n, NodeInfo()) for n in sorted(nodes)})


def weak_components(g: RetweetNetwork) -> list[set[str]]:
    """Weakly connected components via union-find, largest first."""
    parent = {n: n for n in g.nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in g.edges:
        ru, rv = find(u), find(v)
        if ru != rv:
            parent[max(ru, rv)] = min(ru, rv)
    groups: dict[str, set[str]] = defaultdict(set)
    for n in g.nodes:
        groups[find(n)].add(n)
    return sorted(groups.values(), key=lambda c: (-len(c), min(c)))


def principal_wcc(g: RetweetNetwork) -> RetweetNetwork:
    """Largest weakly connected component; size ties go to the smallest author id."""
    comps = weak_components(g)
    if not comps:
        return g
    return g.subgraph(comps[0])


def network_stats(g: RetweetNetwork) -> NetworkStats:
    out_s = {n: 0 for n in g.sorted_nodes()}
    in_s = dict(out_s)
    for (u, v), w in g.edges.items():
        out_s[u] += w
        in_s[v] += w
    return NetworkStats(len(g.nodes), len(g.edges), g.total_weight, out_s, in_s)


def write_edges(g: RetweetNetwork, fh: IO[str]) -> None:
    for (u, v), w in sorted(g.edges.items()):
        fh.write(f"{u}\t{v}\t{w}\n")


def write_nodes(g: RetweetNetwork, fh: IO[str]) -> None:
    fh.write("author_id\thandle\tis_verified\n")
    for n in g.sorted_nodes():
        m = g.meta.get(n, NodeInfo())
        fh.write(f"{n}\t{m.handle}\t{int(m.is_verified)}\n")


def read_network(edges_fh: IO[str], nodes_fh: IO[str] | None = None) -> RetweetNetwork:
    nodes: set[str] = set()
    edges: dict[tuple[str, str], int] = {}
    meta: dict[str, NodeInfo] = {}
    for lineno, line in enumerate(edges_fh, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"edges line {lineno}: expected 3 tab-separated fields")
        u, v, w = parts
        try:
            edges[(u, v)] = edges.get((u, v), 0) + int(w)
        except ValueError as exc:
            raise ValueError(f"edges line {lineno}: bad weight {w!r}") from exc
        nodes.update((u, v))
    if nodes_fh is not None:
        next(nodes_fh, None)  # header
        for line in nodes_fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) >= 3:
                nodes.add(parts[0])
                meta[parts[0]] = NodeInfo(parts[1], parts[2] == "1")
    return RetweetNetwork(frozenset(nodes), dict(sorted(edges.items())), meta)
