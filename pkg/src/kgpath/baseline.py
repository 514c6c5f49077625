"""Static graph baseline: subgraph extraction, centrality scoring, path ranking.

Connectivity is computed over an edge-direction-agnostic view of the graph;
edge direction is preserved in the stored triples and in emitted hops. Vague
catch-all relations can be relabeled afterwards with the classifier.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

from .backends import ClassifierBackend
from .extract import ConceptPair
from .graph import RANDOM_LABEL, VAGUE_RELATION_NAMES, Concept, KnowledgeGraph, RelationType, Triple
from .pathfind import DIRECTION_FORWARD, KnowledgePath, PathHop

logger = logging.getLogger(__name__)

SCORE_MODES = ("product", "pagerank", "closeness")


class SubgraphError(ValueError):
    """Subgraph construction or path ranking got unusable seeds."""


@dataclass(frozen=True)
class Subgraph:
    """Induced working graph around a set of seed concepts.

    ``sp_edges`` records, per seed pair, the undirected adjacencies that lie
    on at least one shortest path between them (provenance for auditing).
    """

    nodes: frozenset[str]
    edges: frozenset[Triple]
    seeds: tuple[Concept, ...]
    sp_edges: Mapping[tuple[str, str], frozenset[tuple[str, str]]]
    concepts: Mapping[str, Concept]

    def __post_init__(self) -> None:
        for seed in self.seeds:
            if seed.normalized not in self.nodes:
                raise ValueError(f"seed {seed.normalized!r} outside subgraph")
        for t in self.edges:
            if t.head.normalized not in self.nodes or t.tail.normalized not in self.nodes:
                raise ValueError("edge endpoint outside subgraph")


@dataclass(frozen=True)
class NodeScores:
    pagerank: Mapping[str, float]
    closeness: Mapping[str, float]


def _undirected_adjacency(triples: Iterable[Triple]) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for t in triples:
        adj.setdefault(t.head.normalized, set()).add(t.tail.normalized)
        adj.setdefault(t.tail.normalized, set()).add(t.head.normalized)
    return adj


def _bfs(adj: Mapping[str, set[str]], start: str) -> dict[str, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def build_subgraph(g: KnowledgeGraph, concepts: Iterable[Concept]) -> Subgraph:
    """Seeds + all shortest paths between seed pairs + one-hop neighborhoods.

    Shortest paths are found over the direction-agnostic adjacency; every
    triple realizing an on-path adjacency is stored with its direction. After
    the path stage, every node's full incident edge set is pulled in.
    """
    wanted = list(concepts)
    if not wanted:
        raise SubgraphError("empty concept set")
    seeds: list[Concept] = []
    for c in wanted:
        if c.normalized in g.concepts:
            seeds.append(c)
        else:
            logger.warning("seed concept %r not in graph, dropped", c.normalized)
    if not seeds:
        raise SubgraphError("no seed concept occurs in the graph")

    adj = _undirected_adjacency(g.triples)
    pair_triples: dict[tuple[str, str], list[Triple]] = {}
    incident: dict[str, list[Triple]] = {}
    for t in g.triples:
        u, v = t.head.normalized, t.tail.normalized
        pair_triples.setdefault((min(u, v), max(u, v)), []).append(t)
        incident.setdefault(u, []).append(t)
        incident.setdefault(v, []).append(t)

    nodes: set[str] = {s.normalized for s in seeds}
    edges: set[Triple] = set()
    sp_edges: dict[tuple[str, str], frozenset[tuple[str, str]]] = {}

    ordered = sorted({s.normalized for s in seeds})
    for i, s in enumerate(ordered):
        dist_s = _bfs(adj, s)
        for t in ordered[i + 1 :]:
            if t not in dist_s:
                sp_edges[(s, t)] = frozenset()
                continue
            dist_t = _bfs(adj, t)
            total = dist_s[t]
            on_path: set[tuple[str, str]] = set()
            for (u, v), triples in pair_triples.items():
                du_s, dv_s = dist_s.get(u), dist_s.get(v)
                du_t, dv_t = dist_t.get(u), dist_t.get(v)
                forward = du_s is not None and dv_t is not None and du_s + 1 + dv_t == total
                reverse = dv_s is not None and du_t is not None and dv_s + 1 + du_t == total
                if forward or reverse:
                    on_path.add((u, v))
                    nodes.update((u, v))
                    edges.update(triples)
            sp_edges[(s, t)] = frozenset(on_path)

    # one-hop neighborhoods of everything collected so far
    for v in sorted(nodes):
        for t in incident.get(v, ()):
            edges.add(t)
            nodes.add(t.head.normalized)
            nodes.add(t.tail.normalized)

    concepts_map = {n: g.concepts[n] for n in nodes}
    return Subgraph(
        nodes=frozenset(nodes),
        edges=frozenset(edges),
        seeds=tuple(seeds),
        sp_edges=sp_edges,
        concepts=concepts_map,
    )


def pagerank(
    sub: Subgraph, damping: float = 0.85, eps: float = 1e-8, max_iter: int = 100
) -> dict[str, float]:
    """Power iteration over the direction-agnostic adjacency.

    Dangling (edgeless) nodes spread their mass uniformly. The result is
    normalized so the mass sums to one.
    """
    nodes = sorted(sub.nodes)
    if not nodes:
        raise SubgraphError("empty subgraph")
    n = len(nodes)
    adj = {v: set() for v in nodes}
    for t in sub.edges:
        adj[t.head.normalized].add(t.tail.normalized)
        adj[t.tail.normalized].add(t.head.normalized)

    x = {v: 1.0 / n for v in nodes}
    for _ in range(max_iter):
        dangling = sum(x[v] for v in nodes if not adj[v])
        new = {}
        for v in nodes:
            inflow = sum(x[u] / len(adj[u]) for u in adj[v])
            new[v] = (1.0 - damping) / n + damping * (inflow + dangling / n)
        delta = sum(abs(new[v] - x[v]) for v in nodes)
        x = new
        if delta < eps:
            break
    total = sum(x.values())
    return {v: x[v] / total for v in nodes}


def closeness(sub: Subgraph) -> dict[str, float]:
    """Component-normalized closeness: (k−1)/Σd within the component, scaled
    by (k−1)/(n−1). Isolated nodes score 0."""
    nodes = sorted(sub.nodes)
    if not nodes:
        raise SubgraphError("empty subgraph")
    n = len(nodes)
    adj: dict[str, set[str]] = {v: set() for v in nodes}
    for t in sub.edges:
        adj[t.head.normalized].add(t.tail.normalized)
        adj[t.tail.normalized].add(t.head.normalized)
    out = {}
    for v in nodes:
        dist = _bfs(adj, v)
        k = len(dist)
        if k <= 1 or n <= 1:
            out[v] = 0.0
            continue
        total = sum(dist.values())
        out[v] = ((k - 1) / total) * ((k - 1) / (n - 1))
    return out


def score_nodes(sub: Subgraph) -> NodeScores:
    return NodeScores(pagerank=pagerank(sub), closeness=closeness(sub))


def rank_paths(
    sub: Subgraph,
    pair: ConceptPair,
    scores: NodeScores,
    max_hops: int = 3,
    top_k: int = 1,
    score_mode: str = "product",
) -> list[KnowledgePath]:
    """Enumerate acyclic <=max_hops paths between the pair's seeds and return
    the best top_k by mean node score (pagerank*closeness by default)."""
    if score_mode not in SCORE_MODES:
        raise ValueError(f"score_mode must be one of {SCORE_MODES}")
    if not (1 <= max_hops <= 3):
        raise ValueError("max_hops must be in 1..3")
    s, t = pair.c_s.normalized, pair.c_t.normalized
    if s not in sub.nodes or t not in sub.nodes:
        raise SubgraphError(f"pair {pair.key} not contained in subgraph")

    adj: dict[str, set[str]] = {v: set() for v in sub.nodes}
    step_triples: dict[tuple[str, str], list[Triple]] = {}
    for tri in sub.edges:
        u, v = tri.head.normalized, tri.tail.normalized
        adj[u].add(v)
        adj[v].add(u)
        step_triples.setdefault((u, v), []).append(tri)

    def node_score(v: str) -> float:
        if score_mode == "pagerank":
            return scores.pagerank[v]
        if score_mode == "closeness":
            return scores.closeness[v]
        return scores.pagerank[v] * scores.closeness[v]

    node_paths: list[list[str]] = []

    def dfs(current: str, trail: list[str]) -> None:
        if current == t:
            node_paths.append(list(trail))
            return
        if len(trail) - 1 >= max_hops:
            return
        for nxt in sorted(adj[current]):
            if nxt in trail:
                continue
            trail.append(nxt)
            dfs(nxt, trail)
            trail.pop()

    dfs(s, [s])

    max_weight = max((tri.weight for tri in sub.edges), default=1.0)
    scored: list[tuple[float, KnowledgePath]] = []
    for trail in node_paths:
        score = sum(node_score(v) for v in trail) / len(trail)
        hop_options: list[list[PathHop]] = []
        for u, v in zip(trail, trail[1:]):
            options = []
            for tri in step_triples.get((u, v), ()):  # forward edges u -> v
                options.append(
                    PathHop(
                        source=sub.concepts[u],
                        relation=tri.relation,
                        target=sub.concepts[v],
                        confidence=tri.weight / max_weight if max_weight > 0 else 0.0,
                    )
                )
            for tri in step_triples.get((v, u), ()):  # reversed edges v -> u
                options.append(
                    PathHop(
                        source=sub.concepts[u],
                        relation=tri.relation.inverse,
                        target=sub.concepts[v],
                        confidence=tri.weight / max_weight if max_weight > 0 else 0.0,
                    )
                )
            hop_options.append(options)
        for hops in product(*hop_options):
            path = KnowledgePath(
                hops=tuple(hops),
                origin="static",
                direction=DIRECTION_FORWARD,
                terminal_similarity=1.0,
            )
            scored.append((score, path))

    scored.sort(key=lambda sp: (-sp[0],) + sp[1].sort_key())
    return [p for _s, p in scored[:top_k]]


def replace_vague(
    paths: Sequence[KnowledgePath], clf: ClassifierBackend, threshold: float = 0.9
) -> list[KnowledgePath]:
    """Relabel RelatedTo/HasContext hops with the classifier's top confident
    relation. Topology, confidences and ordering stay untouched; hops whose
    best non-Random score misses the threshold keep their label."""
    skip = set(VAGUE_RELATION_NAMES) | {RANDOM_LABEL}
    out: list[KnowledgePath] = []
    for path in paths:
        hops = []
        changed = False
        for hop in path.hops:
            if hop.relation.name in VAGUE_RELATION_NAMES:
                dist = clf.classify(ConceptPair(hop.source, hop.target))
                top = dist.top_relation(exclude=skip)
                if top is not None and top[1] >= threshold:
                    hops.append(
                        PathHop(
                            source=hop.source,
                            relation=RelationType(top[0]),
                            target=hop.target,
                            confidence=hop.confidence,
                        )
                    )
                    changed = True
                    continue
            hops.append(hop)
        if changed:
            out.append(
                KnowledgePath(
                    hops=tuple(hops),
                    origin=path.origin,
                    direction=path.direction,
                    terminal_similarity=path.terminal_similarity,
                )
            )
        else:
            out.append(path)
    return out
