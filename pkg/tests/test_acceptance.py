"""Acceptance gate: one test per shipping criterion, frozen tolerances.

Every test prints a single [PASS] line on success so a -s run reads as a
checklist; under plain -v the per-test PASSED/FAILED rows serve the same
purpose.
"""
import json
import random
import time

import pytest

from kgpath.backends import KGOracleGenerator
from kgpath.baseline import Subgraph, build_subgraph, pagerank
from kgpath.cli import main
from kgpath.embeddings import cosine
from kgpath.evaluate import (
    build_random_class,
    cohens_kappa,
    hits_at_k,
    token_match_f1,
    weighted_prf,
)
from kgpath.extract import ConceptPair
from kgpath.graph import RelationInventory, RelationType, Triple, build_graph, normalize_concept
from kgpath.pathfind import ChainParams, DirectLink, KnowledgePath, PathHop, Verdict, chain, combine

from oracles import (
    all_shortest_path_edges,
    bfs_distances,
    enumerate_knowledge_paths,
    greedy_token_f1,
    kappa_from_confusion,
    pagerank_power_iteration,
    prf_weighted_tally,
    undirected_adjacency,
)
from synth import random_graph, sparse_random_graph

c = normalize_concept


def demo_args(fixture_dir):
    return [
        "--graph", str(fixture_dir / "demo_graph.tsv"),
        "--relations", str(fixture_dir / "demo_relations.txt"),
        "--embeddings", str(fixture_dir / "demo_embeddings.txt"),
        "--corpus", str(fixture_dir / "demo_corpus.jsonl"),
    ]


def test_c1_chainer_matches_enumeration_oracle_on_100_graphs():
    """chain() with the KG-oracle backend set-equals brute-force enumeration,
    exact including hop confidences, under default parameters."""
    started = time.monotonic()
    total_paths = 0
    for seed in range(100):
        g, emb = random_graph(seed)
        rng = random.Random(seed + 1)
        c_s, c_t = rng.sample(sorted(g.concepts), 2)
        pair = ConceptPair(g.concepts[c_s], g.concepts[c_t])
        got = chain(pair, KGOracleGenerator(g), emb, ChainParams())
        want = enumerate_knowledge_paths(g, emb, pair.c_s, pair.c_t)
        got_canon = {
            (
                tuple(
                    (h.source.normalized, h.relation.name, h.relation.inverted,
                     h.target.normalized, h.confidence)
                    for h in p.hops
                ),
                p.terminal_similarity,
            )
            for p in got
        }
        assert got_canon == want, f"divergence on seed {seed}"
        total_paths += len(got)
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    assert total_paths >= 50, f"only {total_paths} paths found; fixture too easy to trust"
    print(f"\n[PASS] C1 chainer==enumeration oracle on 100 graphs "
          f"({total_paths} paths, {elapsed:.1f}s)")


def test_c2_fixture_end_to_end(fixture_dir, tmp_path):
    """connect recovers the three expected fixture connections exactly."""
    out = tmp_path / "connect.jsonl"
    started = time.monotonic()
    assert main(["connect", *demo_args(fixture_dir), "--out", str(out)]) == 0
    elapsed = time.monotonic() - started
    assert elapsed < 5.0, f"took {elapsed:.1f}s"

    with open(out, encoding="utf-8") as fh:
        rows = {r["pair_id"]: r for r in map(json.loads, fh)}
    assert set(rows) == {"p1#0", "p2#0", "p3#0"}

    p1 = rows["p1#0"]
    assert (p1["c_s"], p1["c_t"]) == ("car", "engine")
    assert p1["verdict"] == "Direct"
    assert p1["links"] == [{"prob": 1.0, "relation": "HasA"}]
    assert p1["paths"] == []
    assert p1["discarded_multihop"] == 1

    p2 = rows["p2#0"]
    assert p2["verdict"] == "Multihop"
    (path,) = p2["paths"]
    assert path["origin"] == "generator"
    assert path["terminal_similarity"] == pytest.approx(1.0, abs=1e-9)
    assert path["hops"] == [
        {"source": "baking", "relation": "UsedFor", "inverted": True,
         "target": "oven", "confidence": 1.0}
    ]

    p3 = rows["p3#0"]
    assert p3["verdict"] == "Multihop"
    (path,) = p3["paths"]
    assert path["terminal_similarity"] == pytest.approx(1.0, abs=1e-9)
    assert [(h["source"], h["relation"], h["inverted"], h["target"], h["confidence"])
            for h in path["hops"]] == [
        ("waste", "ReceivesAction", False, "recycle", 1.0),
        ("recycle", "PartOf", False, "environmental protection", 1.0),
    ]
    print(f"\n[PASS] C2 fixture end-to-end: all 3 connections exact ({elapsed:.2f}s)")


def test_c3_combiner_totality():
    """Every (links, paths) shape yields exactly one verdict, and Multihop
    never coexists with a non-empty direct link set."""
    pair = ConceptPair(c("car"), c("engine"))

    def link(i):
        return DirectLink(pair=pair, relation=RelationType("HasA"), probability=1.0 - i / 10)

    def path(i):
        hop = PathHop(source=c("car"), relation=RelationType("UsedFor"),
                      target=c("engine"), confidence=1.0 - i / 10)
        return KnowledgePath(hops=(hop,), origin="generator", direction="s1->s2",
                             terminal_similarity=1.0 - i / 10)

    cases = 0
    for n_links in (0, 1, 2):
        for n_paths in (0, 1, 2):
            links = [link(i) for i in range(n_links)]
            paths = [path(i) for i in range(n_paths)]
            result = combine(pair, links, paths, top_k=2)
            cases += 1
            if result.verdict is Verdict.MULTIHOP:
                assert not result.links
            if n_links:
                assert result.verdict is Verdict.DIRECT
                assert result.paths == ()
                assert result.discarded_multihop == n_paths
            elif n_paths:
                assert result.verdict is Verdict.MULTIHOP
                assert len(result.paths) == n_paths
            else:
                assert result.verdict is Verdict.UNCONNECTED
                assert result.links == () and result.paths == ()
    assert cases == 9
    print("\n[PASS] C3 combiner totality: 9/9 verdict shapes exact")


def make_sub(g, seeds):
    return build_subgraph(g, [g.concepts[s] for s in seeds])


def whole_graph_sub(triples):
    """A Subgraph covering the given triples verbatim (no seed construction,
    which would trim edges outside the shortest-path + one-hop region)."""
    concepts = {}
    for t in triples:
        concepts[t.head.normalized] = t.head
        concepts[t.tail.normalized] = t.tail
    return Subgraph(
        nodes=frozenset(concepts),
        edges=frozenset(triples),
        seeds=(),
        sp_edges={},
        concepts=concepts,
    )


def test_c4_pagerank_mass_and_reference_graphs():
    checked = 0
    for seed in range(20):
        g, _emb = random_graph(seed, max_nodes=40, max_triples=100)
        rng = random.Random(seed * 31)
        sub = make_sub(g, rng.sample(sorted(g.concepts), 2))
        pr = pagerank(sub)
        assert abs(sum(pr.values()) - 1.0) <= 1e-9
        checked += 1

    ring_triples = [
        Triple(head=c(f"n{i}"), relation=RelationType("HasA"), tail=c(f"n{(i + 1) % 5}"), weight=1.0)
        for i in range(5)
    ]
    pr = pagerank(whole_graph_sub(ring_triples))
    assert abs(sum(pr.values()) - 1.0) <= 1e-9
    for v in pr.values():
        assert v == pytest.approx(0.2, abs=1e-6)

    star_triples = [
        Triple(head=c("hub"), relation=RelationType("HasA"), tail=c(leaf), weight=1.0)
        for leaf in ("l1", "l2", "l3")
    ]
    star = build_graph(star_triples, RelationInventory.core())
    sub = make_sub(star, ["hub", "l1"])
    pr = pagerank(sub)
    edges = {
        (min(t.head.normalized, t.tail.normalized), max(t.head.normalized, t.tail.normalized))
        for t in sub.edges
    }
    want = pagerank_power_iteration(sorted(sub.nodes), edges)
    scale = sum(want.values())
    for node in sub.nodes:
        assert pr[node] == pytest.approx(want[node] / scale, abs=1e-6)
    # solved by hand from the 0.85-damped stationary equations
    assert pr["hub"] == pytest.approx(0.47972972973, abs=1e-6)
    assert pr["l1"] == pytest.approx(0.17342342342, abs=1e-6)
    print(f"\n[PASS] C4 pagerank: mass 1±1e-9 on {checked} subgraphs; ring uniform; "
          "star matches iteration oracle")


def test_c5_shortest_path_minimality_on_50_graphs():
    """sp_edges capture exactly the edges on minimal paths, and the recorded
    edge set preserves the BFS-oracle seed-pair distance."""
    pairs_checked = 0
    for seed in range(50):
        g = sparse_random_graph(seed, max_nodes=100)
        rng = random.Random(seed * 7 + 1)
        seeds = rng.sample(sorted(g.concepts), 3)
        sub = make_sub(g, seeds)
        adj = undirected_adjacency(g)
        for (s, t), got in sub.sp_edges.items():
            want = all_shortest_path_edges(adj, s, t)
            assert got == (frozenset() if want is None else frozenset(want)), (seed, s, t)
            if want is None:
                continue
            restricted: dict[str, set[str]] = {}
            for u, v in got:
                restricted.setdefault(u, set()).add(v)
                restricted.setdefault(v, set()).add(u)
            assert bfs_distances(restricted, s)[t] == bfs_distances(adj, s)[t], (seed, s, t)
            pairs_checked += 1
    print(f"\n[PASS] C5 shortest-path minimality: 50 graphs, {pairs_checked} reachable "
          "seed pairs exact")


def thousand_triple_graph():
    rng = random.Random(9)
    names = [f"n{i}" for i in range(120)]
    rels = RelationInventory.core().names
    keys: set[tuple[str, str, str]] = set()
    while len(keys) < 1000:
        h, t = rng.sample(names, 2)
        keys.add((rng.choice(rels), h, t))
    triples = [
        Triple(head=c(h), relation=RelationType(r), tail=c(t), weight=1.0)
        for r, h, t in sorted(keys)
    ]
    return build_graph(triples, RelationInventory.core())


def test_c6_random_class_builder():
    g = thousand_triple_graph()
    assert len(g.triples) == 1000
    positives = {(t.head.normalized, t.tail.normalized) for t in g.triples}
    for n in (4, 40, 400):
        pairs = build_random_class(g, n, seed=13)
        assert len(pairs) == n
        kinds = [p.kind for p in pairs]
        assert kinds.count("opposite") == n // 2
        assert kinds.count("corrupt") == n // 2
        keys = [p.pair.key for p in pairs]
        assert len(set(keys)) == n
        assert not set(keys) & positives
        assert pairs == build_random_class(g, n, seed=13)
    assert build_random_class(g, 40, seed=13) != build_random_class(g, 40, seed=14)
    print("\n[PASS] C6 random-class: n in {4, 40, 400} exact halves, zero positive "
          "overlap, seed-reproducible")


def test_c7_metric_oracles():
    report = weighted_prf(list("ABBCC"), list("AABBC"))
    want = prf_weighted_tally([{"A"}, {"B"}, {"B"}, {"C"}, {"C"}],
                              [{"A"}, {"A"}, {"B"}, {"B"}, {"C"}])
    assert report.precision == pytest.approx(want[0], abs=1e-9) == pytest.approx(0.7, abs=1e-9)
    assert report.recall == pytest.approx(want[1], abs=1e-9) == pytest.approx(0.6, abs=1e-9)
    assert report.f1 == pytest.approx(want[2], abs=1e-9) == pytest.approx(0.6, abs=1e-9)

    beams = [["engine", "wheel"], ["bumper", "wheel"], ["seat"], []]
    gold = ["engine", "wheel", "roof", "seat"]
    for k in (1, 2):
        hits = sum(1 for beam, target in zip(beams, gold) if target in beam[:k])
        assert hits_at_k(beams, gold, k) == pytest.approx(hits / len(gold), abs=1e-9)

    a1 = ["x"] * 25 + ["y"] * 25
    a2 = ["x"] * 20 + ["y"] * 5 + ["x"] * 10 + ["y"] * 15
    want_kappa = kappa_from_confusion([[20, 5], [10, 15]])
    assert cohens_kappa(a1, a2) == pytest.approx(want_kappa, abs=1e-9)
    assert want_kappa == pytest.approx(0.4, abs=1e-9)

    u, v = [3.0, 4.0], [4.0, 3.0]
    by_hand = sum(a * b for a, b in zip(u, v)) / (
        sum(a * a for a in u) ** 0.5 * sum(b * b for b in v) ** 0.5
    )
    import numpy as np
    assert cosine(np.array(u), np.array(v)) == pytest.approx(by_hand, abs=1e-9)
    assert by_hand == pytest.approx(24 / 25, abs=1e-9)

    from kgpath.embeddings import EmbeddingStore
    emb = EmbeddingStore.from_vectors({"dog": [1.0, 0.0], "bone": [0.0, 1.0]})
    got = token_match_f1("dog", "dog bone", emb)
    want_p, want_r, want_f = greedy_token_f1(["dog"], ["dog", "bone"], emb)
    assert got.precision == pytest.approx(want_p, abs=1e-9) == pytest.approx(1.0, abs=1e-9)
    assert got.recall == pytest.approx(want_r, abs=1e-9) == pytest.approx(0.5, abs=1e-9)
    assert got.f1 == pytest.approx(want_f, abs=1e-9) == pytest.approx(2 / 3, abs=1e-9)
    print("\n[PASS] C7 metric oracles: P/R/F1, hits@k, kappa, cosine, greedy F1 "
          "all within 1e-9")


def test_c8_connect_is_deterministic_across_workers(fixture_dir, tmp_path):
    blobs = []
    for workers in (1, 8):
        out = tmp_path / f"run_w{workers}.jsonl"
        assert main(["connect", *demo_args(fixture_dir), "--out", str(out),
                     "--workers", str(workers)]) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]
    print("\n[PASS] C8 determinism: workers 1 and 8 byte-identical")


def test_c9_stats_layout(fixture_dir, tmp_path, capsys):
    chainer_out = tmp_path / "chainer.jsonl"
    static_out = tmp_path / "static.jsonl"
    assert main(["connect", *demo_args(fixture_dir), "--out", str(chainer_out)]) == 0
    assert main(["baseline", *demo_args(fixture_dir), "--out", str(static_out)]) == 0

    stats_out = tmp_path / "stats.json"
    assert main(["stats", "--results", f"chainer={chainer_out}",
                 "--results", f"static={static_out}", "--out", str(stats_out)]) == 0

    table = capsys.readouterr().out
    lines = table.splitlines()
    header = lines[0].split()
    assert header == ["chainer", "static"]  # method columns
    by_label = {line[:12].strip(): line.split()[-2:] for line in lines[1:4]}
    assert by_label["total pairs"] == ["3", "3"]
    assert by_label["linked pairs"] == ["3", "3"]
    assert by_label["avg hops"] == ["1.33", "1.33"]

    payload = json.loads(stats_out.read_text())
    # hand computation: hops are 1 (direct), 1, and 2 over three linked pairs
    assert payload["avg_hops"]["chainer"] == (1 + 1 + 2) / 3
    assert payload["avg_hops"]["static"] == (1 + 1 + 2) / 3
    assert payload["linked_pairs"] == {"chainer": 3, "static": 3}
    print("\n[PASS] C9 stats layout: methods x {linked pairs, avg hops} rows, "
          "avg 4/3 exact")
