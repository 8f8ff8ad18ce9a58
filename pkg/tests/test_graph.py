import io
import random

import pytest

from oracles import bfs_components
from vaxnet.graph import (
    RetweetNetwork, build_network, network_stats, principal_wcc, read_network, weak_components, write_edges,
    write_nodes,
)
from vaxnet.ingest import Dataset, RawPost


def _rt(pid, by, of):
    return RawPost(pid, by, by, False, 1, "vax", True, "src", of)


def _orig(pid, by):
    return RawPost(pid, by, by, False, 1, "vax", False)


def _net(edges):
    nodes = {u for u, _ in edges} | {v for _, v in edges}
    return RetweetNetwork(frozenset(nodes), dict(edges))


def test_single_retweet():
    g = build_network(Dataset((_rt("1", "B", "A"),)))
    assert g.nodes == {"A", "B"} and g.edges == {("A", "B"): 1}


def test_self_retweet_dropped():
    g = build_network(Dataset((_orig("0", "A"), _rt("1", "A", "A"))))
    assert g.edges == {} and g.nodes == {"A"}


def test_fixture_network(fixture_filtered):
    g = build_network(fixture_filtered)
    assert (len(g.nodes), len(g.edges), g.total_weight) == (7, 9, 13)


def test_fixture_edges_by_hand(fixture_filtered):
    g = build_network(fixture_filtered)
    assert g.edges == {("A", "B"): 2, ("A", "C"): 1, ("A", "E"): 1, ("D", "E"): 3, ("D", "F"): 1,
                       ("B", "A"): 2, ("C", "D"): 1, ("E", "F"): 1, ("F", "B"): 1}


def test_unseen_retweet_target_creates_node():
    g = build_network(Dataset((_orig("0", "B"), _rt("1", "B", "Z"))))
    assert "Z" in g.nodes


def test_connected_graph_unchanged():
    g = _net({("a", "b"): 1, ("b", "c"): 2})
    assert principal_wcc(g) == g


def test_largest_component_kept():
    g = _net({("a", "b"): 1, ("b", "c"): 1, ("c", "d"): 1, ("d", "e"): 1, ("x", "y"): 5})
    assert principal_wcc(g).nodes == {"a", "b", "c", "d", "e"}


def test_component_tie_goes_to_smallest_id():
    g = _net({("m", "n"): 1, ("b", "z"): 1})
    assert principal_wcc(g).nodes == {"b", "z"}


def test_empty_graph():
    g = RetweetNetwork(frozenset(), {})
    assert principal_wcc(g) == g
    s = network_stats(g)
    assert (s.node_count, s.edge_count, s.total_weight) == (0, 0, 0)


def test_fixture_wcc_matches_bfs(fixture_filtered):
    g = build_network(fixture_filtered)
    w = principal_wcc(g)
    assert len(w.nodes) == 6 and "G" not in w.nodes
    biggest = max(bfs_components(g.nodes, g.edges), key=len)
    assert w.nodes == biggest


def test_weak_components_match_bfs_random():
    rng = random.Random(5)
    for _ in range(50):
        names = [f"n{i}" for i in range(rng.randint(2, 15))]
        edges = {}
        for _ in range(rng.randint(0, 12)):
            u, v = rng.sample(names, 2)
            edges[(u, v)] = rng.randint(1, 4)
        g = RetweetNetwork(frozenset(names), edges)
        ours = sorted(map(sorted, weak_components(g)))
        assert ours == sorted(map(sorted, bfs_components(names, edges)))


def test_single_edge_stats():
    s = network_stats(_net({("u", "v"): 3}))
    assert s.total_weight == 3 and s.out_strength["u"] == 3 and s.in_strength["v"] == 3
    assert s.in_strength["u"] == 0


def test_fixture_strengths(fixture_filtered):
    s = network_stats(build_network(fixture_filtered))
    assert s.out_strength == {"A": 4, "B": 2, "C": 1, "D": 4, "E": 1, "F": 1, "G": 0}
    assert s.in_strength == {"A": 2, "B": 3, "C": 1, "D": 1, "E": 4, "F": 2, "G": 0}


def test_invalid_networks_rejected():
    with pytest.raises(ValueError):
        RetweetNetwork(frozenset({"a"}), {("a", "a"): 1})
    with pytest.raises(ValueError):
        RetweetNetwork(frozenset({"a", "b"}), {("a", "b"): 0})
    with pytest.raises(ValueError):
        RetweetNetwork(frozenset({"a"}), {("a", "b"): 1})


def test_serialization_round_trip(fixture_filtered):
    g = build_network(fixture_filtered)
    e, n = io.StringIO(), io.StringIO()
    write_edges(g, e)
    write_nodes(g, n)
    e.seek(0)
    n.seek(0)
    back = read_network(e, n)
    assert back == g
    assert back.meta["A"].is_verified and back.meta["A"].handle == "HealthAgency"


def test_edge_file_format(fixture_filtered):
    buf = io.StringIO()
    write_edges(principal_wcc(build_network(fixture_filtered)), buf)
    assert buf.getvalue().splitlines()[0] == "A\tB\t2"


def test_read_network_rejects_bad_lines():
    with pytest.raises(ValueError):
        read_network(io.StringIO("a\tb\n"))
    with pytest.raises(ValueError):
        read_network(io.StringIO("a\tb\tx\n"))
