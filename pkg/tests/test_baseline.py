import logging
import random

import pytest
from hypothesis import given, settings, strategies as st

from kgpath.backends import KGOracleClassifier
from kgpath.baseline import (
    SCORE_MODES,
    Subgraph,
    SubgraphError,
    build_subgraph,
    closeness,
    pagerank,
    rank_paths,
    replace_vague,
    score_nodes,
)
from kgpath.extract import ConceptPair
from kgpath.graph import RelationInventory, RelationType, Triple, build_graph, normalize_concept
from kgpath.pathfind import KnowledgePath, PathHop

from oracles import all_shortest_path_edges, pagerank_power_iteration, undirected_adjacency
from synth import random_graph

c = normalize_concept


def kg(*rows):
    triples = [
        Triple(head=c(h), relation=RelationType(r), tail=c(t), weight=w)
        for h, r, t, w in rows
    ]
    return build_graph(triples, RelationInventory.baseline())


def make_sub(rows, extra_nodes=()):
    """Hand-assembled Subgraph for scoring tests, bypassing construction."""
    triples = [
        Triple(head=c(h), relation=RelationType(r), tail=c(t), weight=w)
        for h, r, t, w in rows
    ]
    concepts = {}
    for t in triples:
        concepts[t.head.normalized] = t.head
        concepts[t.tail.normalized] = t.tail
    for name in extra_nodes:
        concepts[c(name).normalized] = c(name)
    return Subgraph(
        nodes=frozenset(concepts),
        edges=frozenset(triples),
        seeds=(),
        sp_edges={},
        concepts=concepts,
    )


def seeds_of(g, *names):
    return [g.concepts[c(n).normalized] for n in names]


# --- subgraph construction ----------------------------------------------------


def test_build_subgraph_rejects_unusable_seeds():
    g = kg(("car", "HasA", "engine", 1.0))
    with pytest.raises(SubgraphError):
        build_subgraph(g, [])
    with pytest.raises(SubgraphError):
        build_subgraph(g, [c("zeppelin"), c("submarine")])


def test_build_subgraph_drops_missing_seed_with_warning(caplog):
    g = kg(("car", "HasA", "engine", 1.0))
    with caplog.at_level(logging.WARNING):
        sub = build_subgraph(g, [c("car"), c("zeppelin")])
    assert [s.normalized for s in sub.seeds] == ["car"]
    assert "zeppelin" in caplog.text


def test_sp_edges_line_graph():
    g = kg(
        ("a1", "HasA", "b1", 1.0),
        ("b1", "HasA", "d1", 1.0),
        ("d1", "HasA", "e1", 1.0),
    )
    sub = build_subgraph(g, seeds_of(g, "a1", "e1"))
    assert sub.sp_edges[("a1", "e1")] == frozenset({("a1", "b1"), ("b1", "d1"), ("d1", "e1")})
    assert sub.nodes == {"a1", "b1", "d1", "e1"}
    assert len(sub.edges) == 3


def test_sp_edges_diamond_keeps_both_routes_and_all_parallel_triples():
    g = kg(
        ("start", "HasA", "mid1", 1.0),
        ("start", "UsedFor", "mid1", 2.0),  # parallel relation, same adjacency
        ("mid1", "HasA", "goal", 1.0),
        ("start", "HasA", "mid2", 1.0),
        ("mid2", "HasA", "goal", 1.0),
    )
    sub = build_subgraph(g, seeds_of(g, "start", "goal"))
    assert sub.sp_edges[("goal", "start")] == frozenset(
        {("mid1", "start"), ("goal", "mid1"), ("mid2", "start"), ("goal", "mid2")}
    )
    # both triples realizing the start-mid1 adjacency are retained
    assert sum(1 for t in sub.edges if {t.head.normalized, t.tail.normalized} == {"start", "mid1"}) == 2


def test_sp_edges_disconnected_pair_is_empty_but_neighborhoods_stay():
    g = kg(
        ("car", "HasA", "engine", 1.0),
        ("oven", "UsedFor", "baking", 1.0),
    )
    sub = build_subgraph(g, seeds_of(g, "car", "oven"))
    assert sub.sp_edges[("car", "oven")] == frozenset()
    # one-hop expansion still pulls each seed's own neighborhood
    assert {"car", "engine", "oven", "baking"} <= sub.nodes


def test_one_hop_expansion_stops_at_one_hop():
    # pendant chain b1 - p - r: p enters via expansion, r must not
    g = kg(
        ("a1", "HasA", "b1", 1.0),
        ("b1", "HasA", "d1", 1.0),
        ("b1", "HasA", "p", 1.0),
        ("p", "HasA", "r", 1.0),
    )
    sub = build_subgraph(g, seeds_of(g, "a1", "d1"))
    assert "p" in sub.nodes
    assert "r" not in sub.nodes
    assert all({t.head.normalized, t.tail.normalized} != {"p", "r"} for t in sub.edges)


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_sp_edges_match_bruteforce_enumeration(seed):
    g, _emb = random_graph(seed, max_nodes=30, max_triples=80)
    rng = random.Random(seed)
    picks = rng.sample(sorted(g.concepts), k=3)
    sub = build_subgraph(g, [g.concepts[n] for n in picks])
    adj = undirected_adjacency(g)
    assert len(sub.sp_edges) == 3
    for (s, t), got in sub.sp_edges.items():
        want = all_shortest_path_edges(adj, s, t)
        assert got == (frozenset() if want is None else frozenset(want))


# --- node scoring -------------------------------------------------------------


def test_pagerank_single_node_gets_all_mass():
    sub = make_sub([], extra_nodes=["lonely"])
    assert pagerank(sub) == {"lonely": 1.0}


def test_pagerank_ring_is_uniform():
    ring = [(f"n{i}", "HasA", f"n{(i + 1) % 5}", 1.0) for i in range(5)]
    pr = pagerank(make_sub(ring))
    for v in pr.values():
        assert v == pytest.approx(0.2, abs=1e-6)


def test_pagerank_star_frozen_values():
    # 0.15/4 + 0.85*(3x_l) with x_l = 0.15/4 + 0.85*x_c/3, solved by hand
    sub = make_sub(
        [("hub", "HasA", "l1", 1.0), ("hub", "HasA", "l2", 1.0), ("hub", "HasA", "l3", 1.0)]
    )
    pr = pagerank(sub)
    assert pr["hub"] == pytest.approx(0.47972972973, abs=1e-6)
    for leaf in ("l1", "l2", "l3"):
        assert pr[leaf] == pytest.approx(0.17342342342, abs=1e-6)
    assert sum(pr.values()) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_pagerank_matches_power_iteration_oracle(seed):
    g, _emb = random_graph(seed, max_nodes=25, max_triples=60)
    rng = random.Random(seed ^ 0x5F)
    picks = rng.sample(sorted(g.concepts), k=2)
    sub = build_subgraph(g, [g.concepts[n] for n in picks])
    edges = {
        (min(t.head.normalized, t.tail.normalized), max(t.head.normalized, t.tail.normalized))
        for t in sub.edges
    }
    want = pagerank_power_iteration(sorted(sub.nodes), edges)
    scale = sum(want.values())
    got = pagerank(sub)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-9)
    for node in sub.nodes:
        assert got[node] == pytest.approx(want[node] / scale, abs=1e-9)


def test_closeness_star_and_path():
    star = make_sub(
        [("hub", "HasA", "l1", 1.0), ("hub", "HasA", "l2", 1.0), ("hub", "HasA", "l3", 1.0)]
    )
    cl = closeness(star)
    assert cl["hub"] == pytest.approx(1.0)
    assert cl["l1"] == pytest.approx(0.6)  # (3/5) * (3/3)

    path = make_sub([("a1", "HasA", "b1", 1.0), ("b1", "HasA", "d1", 1.0)])
    cl = closeness(path)
    assert cl["b1"] == pytest.approx(1.0)
    assert cl["a1"] == pytest.approx(2 / 3)
    assert cl["d1"] == pytest.approx(2 / 3)


def test_closeness_isolated_node_scores_zero():
    sub = make_sub([("x1", "HasA", "y1", 1.0)], extra_nodes=["island"])
    cl = closeness(sub)
    assert cl["island"] == 0.0
    assert cl["x1"] == pytest.approx(0.5)  # (1/1) * (1/2)


def test_closeness_single_node_is_zero():
    assert closeness(make_sub([], extra_nodes=["lonely"])) == {"lonely": 0.0}


def test_score_nodes_bundles_both_metrics():
    sub = make_sub([("x1", "HasA", "y1", 1.0)])
    scores = score_nodes(sub)
    assert scores.pagerank == pagerank(sub)
    assert scores.closeness == closeness(sub)


# --- path ranking -------------------------------------------------------------


def hub_fringe_graph():
    """Two 2-hop routes s->t; the hub route's middle node is better connected."""
    return kg(
        ("s1", "HasA", "hub", 1.0),
        ("hub", "HasA", "t1", 1.0),
        ("s1", "HasA", "fringe", 1.0),
        ("fringe", "HasA", "t1", 1.0),
        ("hub", "HasA", "p1", 1.0),
        ("hub", "HasA", "p2", 1.0),
    )


def ranked(g, s, t, **kw):
    sub = build_subgraph(g, seeds_of(g, s, t))
    pair = ConceptPair(c(s), c(t))
    return rank_paths(sub, pair, score_nodes(sub), **kw)


def test_rank_paths_prefers_central_route():
    for mode in SCORE_MODES:
        paths = ranked(hub_fringe_graph(), "s1", "t1", top_k=2, score_mode=mode)
        assert len(paths) == 2
        assert [h.target.normalized for h in paths[0].hops] == ["hub", "t1"]
        assert [h.target.normalized for h in paths[1].hops] == ["fringe", "t1"]


def test_rank_paths_static_metadata():
    paths = ranked(hub_fringe_graph(), "s1", "t1")
    assert len(paths) == 1
    top = paths[0]
    assert top.origin == "static"
    assert top.direction == "s1->s2"
    assert top.terminal_similarity == 1.0
    assert all(not h.relation.inverted for h in top.hops)


def test_rank_paths_walks_reversed_edges():
    g = kg(("goal", "UsedFor", "start", 1.0))
    paths = ranked(g, "start", "goal")
    assert len(paths) == 1
    (h,) = paths[0].hops
    assert h.source.normalized == "start"
    assert h.target.normalized == "goal"
    assert h.relation == RelationType("UsedFor", inverted=True)
    assert h.confidence == 1.0


def test_rank_paths_confidence_is_weight_over_max():
    g = kg(("s1", "HasA", "m1", 2.0), ("m1", "HasA", "t1", 1.0))
    paths = ranked(g, "s1", "t1")
    assert [h.confidence for h in paths[0].hops] == [1.0, 0.5]


def test_rank_paths_tie_breaks_on_node_names():
    g = kg(
        ("left", "HasA", "apple", 1.0),
        ("apple", "HasA", "right", 1.0),
        ("left", "HasA", "banana", 1.0),
        ("banana", "HasA", "right", 1.0),
    )
    paths = ranked(g, "left", "right", top_k=2)
    assert [h.target.normalized for h in paths[0].hops] == ["apple", "right"]
    assert [h.target.normalized for h in paths[1].hops] == ["banana", "right"]


def test_rank_paths_expands_parallel_relations():
    g = kg(
        ("s1", "HasA", "m1", 1.0),
        ("m1", "HasA", "t1", 1.0),
        ("m1", "UsedFor", "t1", 1.0),
    )
    paths = ranked(g, "s1", "t1", top_k=5)
    assert len(paths) == 2
    assert paths[0].hops[1].relation.name == "HasA"
    assert paths[1].hops[1].relation.name == "UsedFor"


def test_rank_paths_respects_max_hops():
    g = kg(("s1", "HasA", "m1", 1.0), ("m1", "HasA", "t1", 1.0))
    assert ranked(g, "s1", "t1", max_hops=1) == []
    with pytest.raises(ValueError):
        ranked(g, "s1", "t1", max_hops=0)
    with pytest.raises(ValueError):
        ranked(g, "s1", "t1", max_hops=4)


def test_rank_paths_rejects_pair_outside_subgraph():
    g = kg(("s1", "HasA", "t1", 1.0))
    sub = build_subgraph(g, seeds_of(g, "s1", "t1"))
    with pytest.raises(SubgraphError):
        rank_paths(sub, ConceptPair(c("s1"), c("mars")), score_nodes(sub))


def test_rank_paths_rejects_unknown_score_mode():
    g = kg(("s1", "HasA", "t1", 1.0))
    with pytest.raises(ValueError):
        ranked(g, "s1", "t1", score_mode="degree")


def test_rank_paths_on_demo_fixture(demo_graph):
    pair = ConceptPair(c("waste"), c("environmental protection"))
    sub = build_subgraph(demo_graph, [pair.c_s, pair.c_t])
    assert sub.nodes == {"waste", "recycle", "environmental protection"}
    paths = rank_paths(sub, pair, score_nodes(sub))
    assert len(paths) == 1
    assert [(h.source.normalized, h.relation.name, h.target.normalized) for h in paths[0].hops] == [
        ("waste", "ReceivesAction", "recycle"),
        ("recycle", "PartOf", "environmental protection"),
    ]


# --- vague-hop relabeling -----------------------------------------------------


def vague_path(*hops):
    return KnowledgePath(
        hops=hops, origin="static", direction="s1->s2", terminal_similarity=1.0
    )


def phop(s, r, t, conf=1.0, inverted=False):
    return PathHop(source=c(s), relation=RelationType(r, inverted), target=c(t), confidence=conf)


def test_replace_vague_relabels_supported_hops_only():
    clf = KGOracleClassifier(
        kg(("alpha", "Causes", "beta", 1.0), ("beta", "HasA", "gamma", 1.0))
    )
    before = vague_path(
        phop("alpha", "RelatedTo", "beta", conf=0.7),
        phop("beta", "HasA", "gamma", conf=0.4),
    )
    (after,) = replace_vague([before], clf)
    assert after.hops[0].relation == RelationType("Causes")
    assert after.hops[0].confidence == 0.7  # confidence is not the classifier's score
    assert after.hops[1] == before.hops[1]
    assert (after.origin, after.direction, after.terminal_similarity) == (
        before.origin,
        before.direction,
        before.terminal_similarity,
    )


def test_replace_vague_unsupported_hop_keeps_label():
    clf = KGOracleClassifier(kg(("alpha", "Causes", "beta", 1.0)))
    # classifier sees Random=1.0 for this pair, which is excluded from relabeling
    before = vague_path(phop("beta", "RelatedTo", "gamma", conf=0.3))
    out = replace_vague([before], clf)
    assert out[0] is before
    assert out[0].hops[0].relation.name == "RelatedTo"


def test_replace_vague_handles_hascontext_and_inverted_hops():
    clf = KGOracleClassifier(kg(("alpha", "Causes", "beta", 1.0)))
    before = vague_path(phop("alpha", "HasContext", "beta", conf=0.9, inverted=True))
    (after,) = replace_vague([before], clf)
    assert after.hops[0].relation == RelationType("Causes")
    assert not after.hops[0].relation.inverted


def test_replace_vague_never_touches_concrete_relations():
    clf = KGOracleClassifier(kg(("alpha", "Causes", "beta", 1.0)))
    before = vague_path(phop("alpha", "HasA", "beta", conf=0.2))
    out = replace_vague([before], clf)
    assert out[0] is before
