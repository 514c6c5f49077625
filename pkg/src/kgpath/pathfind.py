"""Direct links, multihop chaining, and the combination policy.

A sentence-level concept pair gets connected two ways: the relation
classifier proposes single direct links, and the target generator grows
relation chains from both ends, steered by embedding similarity to the other
concept. Direct links win; chains only count when no direct link exists.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .backends import (
    BackendError,
    ClassifierBackend,
    GeneratorBackend,
    PosPatternTable,
    Tagger,
    lexicon_tagger,
    pos_filter,
)
from .embeddings import EmbeddingStore, cosine, encode_phrase
from .extract import ConceptPair
from .graph import RANDOM_LABEL, Concept, RelationType

DIRECTION_FORWARD = "s1->s2"
DIRECTION_BACKWARD = "s2->s1"
ORIGINS = ("generator", "classifier", "static")
MAX_PATH_HOPS = 3


class CombineError(ValueError):
    """combine() received inputs that do not belong to the stated pair."""


class PairBackendError(BackendError):
    """A backend failed while working on one concept pair."""

    def __init__(self, pair: ConceptPair, cause: Exception):
        super().__init__(f"backend failure on pair {pair.key}: {cause}")
        self.pair = pair
        self.cause = cause


@dataclass(frozen=True)
class DirectLink:
    pair: ConceptPair
    relation: RelationType
    probability: float

    def __post_init__(self) -> None:
        if self.relation.name == RANDOM_LABEL:
            raise ValueError("a direct link cannot be labeled Random")
        if not (0.0 < self.probability <= 1.0):
            raise ValueError(f"link probability out of (0,1]: {self.probability}")


@dataclass(frozen=True)
class PathHop:
    source: Concept
    relation: RelationType
    target: Concept
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"hop confidence out of [0,1]: {self.confidence}")
        if self.source.normalized == self.target.normalized:
            raise ValueError("hop may not loop on one concept")


@dataclass(frozen=True)
class KnowledgePath:
    """A chain of 1..3 hops. Presentation is always s1->s2; ``direction``
    records which search direction produced it."""

    hops: tuple[PathHop, ...]
    origin: str
    direction: str
    terminal_similarity: float

    def __post_init__(self) -> None:
        if not (1 <= len(self.hops) <= MAX_PATH_HOPS):
            raise ValueError(f"path must have 1..{MAX_PATH_HOPS} hops, got {len(self.hops)}")
        for a, b in zip(self.hops, self.hops[1:]):
            if a.target.normalized != b.source.normalized:
                raise ValueError("hops do not chain")
        nodes = self.nodes
        if len(set(nodes)) != len(nodes):
            raise ValueError("path revisits a concept")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.direction not in (DIRECTION_FORWARD, DIRECTION_BACKWARD):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not (-1.0 <= self.terminal_similarity <= 1.0):
            raise ValueError("terminal similarity out of [-1,1]")

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.hops[0].source.normalized,) + tuple(h.target.normalized for h in self.hops)

    @property
    def mean_confidence(self) -> float:
        return sum(h.confidence for h in self.hops) / len(self.hops)

    def sort_key(self):
        return (
            -self.terminal_similarity,
            -self.mean_confidence,
            self.nodes,
            tuple(h.relation.name for h in self.hops),
            tuple(h.relation.inverted for h in self.hops),
        )

    def structure_key(self):
        return tuple(
            (h.source.normalized, h.relation.name, h.relation.inverted, h.target.normalized)
            for h in self.hops
        )


@dataclass(frozen=True)
class ChainParams:
    beam: int = 10
    sim_gate: float = 0.7
    terminate: float = 0.95
    max_hops: int = 3
    frontier_cap: int = 50
    use_inverse: bool = True
    bidirectional: bool = True

    def __post_init__(self) -> None:
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        if not (0.0 <= self.sim_gate <= self.terminate <= 1.0):
            raise ValueError("need 0 <= sim_gate <= terminate <= 1")
        if not (1 <= self.max_hops <= MAX_PATH_HOPS):
            raise ValueError(f"max_hops must be in 1..{MAX_PATH_HOPS}")
        if self.frontier_cap < 1:
            raise ValueError("frontier_cap must be >= 1")


@dataclass
class ChainDiagnostics:
    """Optional out-structure for chain(): search-side warnings."""

    zero_coverage_targets: list[str] = field(default_factory=list)
    generate_calls: int = 0


class Verdict(str, Enum):
    DIRECT = "Direct"
    MULTIHOP = "Multihop"
    UNCONNECTED = "Unconnected"


@dataclass(frozen=True)
class ConnectResult:
    pair: ConceptPair
    verdict: Verdict
    links: tuple[DirectLink, ...]
    paths: tuple[KnowledgePath, ...]
    discarded_multihop: int = 0

    def __post_init__(self) -> None:
        if self.verdict is Verdict.DIRECT and not self.links:
            raise ValueError("Direct verdict requires links")
        if self.verdict is Verdict.MULTIHOP and (self.links or not self.paths):
            raise ValueError("Multihop verdict requires paths and no links")
        if self.verdict is Verdict.UNCONNECTED and (self.links or self.paths):
            raise ValueError("Unconnected verdict must be empty")
        if self.verdict is Verdict.DIRECT and self.paths:
            raise ValueError("Direct verdict discards multihop paths")
        if self.discarded_multihop < 0:
            raise ValueError("discarded_multihop must be >= 0")


def link_direct(
    pairs: Iterable[ConceptPair],
    classifier: ClassifierBackend,
    threshold: float = 0.9,
    pos_table: PosPatternTable | None = None,
    tagger: Tagger = lexicon_tagger,
) -> dict[ConceptPair, list[DirectLink]]:
    """Classify each pair; keep non-Random relations scoring >= threshold.

    With a pattern table, predictions failing the PoS filter are dropped.
    Backend failures are re-raised as PairBackendError naming the pair.
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold out of (0,1]: {threshold}")
    out: dict[ConceptPair, list[DirectLink]] = {}
    for pair in pairs:
        try:
            dist = classifier.classify(pair)
        except BackendError as exc:
            raise PairBackendError(pair, exc) from exc
        links = []
        for name, prob in dist.above(threshold):
            relation = RelationType(name)
            if pos_table is not None and not pos_filter((pair.c_s, relation, pair.c_t), pos_table, tagger):
                continue
            links.append(DirectLink(pair=pair, relation=relation, probability=prob))
        out[pair] = links
    return out


def _fan_out(gen: GeneratorBackend, use_inverse: bool) -> list[RelationType]:
    base = list(gen.relations)
    if use_inverse:
        base += [r.inverse for r in gen.relations]
    return base


def _search_direction(
    start: Concept,
    goal: Concept,
    gen: GeneratorBackend,
    emb: EmbeddingStore,
    params: ChainParams,
    diagnostics: ChainDiagnostics | None,
) -> list[tuple[tuple[PathHop, ...], float]]:
    goal_pv = encode_phrase(emb, goal)
    if goal_pv.coverage == 0.0:
        if diagnostics is not None:
            diagnostics.zero_coverage_targets.append(goal.normalized)
        return []
    relations = _fan_out(gen, params.use_inverse)
    completed: list[tuple[tuple[PathHop, ...], float]] = []
    # frontier entries: (current concept, visited node set as tuple, hops so far)
    frontier: list[tuple[Concept, tuple[str, ...], tuple[PathHop, ...]]] = [
        (start, (start.normalized,), ())
    ]
    for level in range(params.max_hops):
        grown: list[tuple[Concept, tuple[str, ...], tuple[PathHop, ...], float]] = []
        for current, visited, hops in frontier:
            for relation in relations:
                targets = gen.generate(current, relation, params.beam)
                if diagnostics is not None:
                    diagnostics.generate_calls += 1
                for target in targets:
                    if target.concept.normalized in visited:
                        continue
                    sim = cosine(encode_phrase(emb, target.concept), goal_pv)
                    hop = PathHop(
                        source=current,
                        relation=relation,
                        target=target.concept,
                        confidence=target.confidence,
                    )
                    if sim > params.terminate:
                        completed.append((hops + (hop,), sim))
                    elif sim >= params.sim_gate and level + 1 < params.max_hops:
                        grown.append(
                            (target.concept, visited + (target.concept.normalized,), hops + (hop,), sim)
                        )
        if not grown:
            break
        # cap counts distinct frontier nodes, keeping the ones most similar to
        # the goal; every partial path ending at a kept node survives.
        node_sim = {c.normalized: sim for c, _v, _h, sim in grown}
        kept = set(sorted(node_sim, key=lambda n: (-node_sim[n], n))[: params.frontier_cap])
        frontier = [(c, v, h) for c, v, h, _sim in grown if c.normalized in kept]
    return completed


def _flip_backward(hops: tuple[PathHop, ...]) -> tuple[PathHop, ...]:
    return tuple(
        PathHop(source=h.target, relation=h.relation.inverse, target=h.source, confidence=h.confidence)
        for h in reversed(hops)
    )


def chain(
    pair: ConceptPair,
    gen: GeneratorBackend,
    emb: EmbeddingStore,
    params: ChainParams = ChainParams(),
    diagnostics: ChainDiagnostics | None = None,
) -> list[KnowledgePath]:
    """Beam-expand relation chains from c_s toward c_t (and back when
    bidirectional), returning completed paths only.

    A candidate whose similarity to the goal exceeds ``terminate`` closes its
    path; one at or above ``sim_gate`` stays on the frontier; anything lower
    is dropped. Results are deduplicated by node/relation sequence and ordered
    by terminal similarity, then mean hop confidence, then node sequence.
    """
    try:
        found: list[tuple[tuple[PathHop, ...], float, str]] = [
            (hops, sim, DIRECTION_FORWARD)
            for hops, sim in _search_direction(pair.c_s, pair.c_t, gen, emb, params, diagnostics)
        ]
        if params.bidirectional:
            found += [
                (_flip_backward(hops), sim, DIRECTION_BACKWARD)
                for hops, sim in _search_direction(pair.c_t, pair.c_s, gen, emb, params, diagnostics)
            ]
    except BackendError as exc:
        raise PairBackendError(pair, exc) from exc

    best: dict[tuple, tuple] = {}
    for hops, sim, direction in found:
        path = KnowledgePath(
            hops=hops, origin="generator", direction=direction, terminal_similarity=sim
        )
        preference = (-sim, -path.mean_confidence, 0 if direction == DIRECTION_FORWARD else 1)
        key = path.structure_key()
        if key not in best or preference < best[key][0]:
            best[key] = (preference, path)
    paths = [p for _pref, p in best.values()]
    paths.sort(key=KnowledgePath.sort_key)
    return paths


def combine(
    pair: ConceptPair,
    direct: Sequence[DirectLink],
    multihop: Sequence[KnowledgePath],
    top_k: int = 1,
) -> ConnectResult:
    """Combination policy: Direct beats Multihop beats Unconnected.

    When any direct link exists, every multihop path is discarded and counted.
    Otherwise the best ``top_k`` paths carry the verdict.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    for link in direct:
        if link.pair.key != pair.key:
            raise CombineError(f"direct link for {link.pair.key} mixed into pair {pair.key}")
    for path in multihop:
        if path.direction == DIRECTION_FORWARD and path.hops[0].source.normalized != pair.c_s.normalized:
            raise CombineError(f"forward path starts at {path.hops[0].source}, pair is {pair.key}")
        if path.direction == DIRECTION_BACKWARD and path.hops[-1].target.normalized != pair.c_t.normalized:
            raise CombineError(f"backward path ends at {path.hops[-1].target}, pair is {pair.key}")

    if direct:
        links = tuple(sorted(direct, key=lambda l: (-l.probability, l.relation.name)))
        return ConnectResult(
            pair=pair,
            verdict=Verdict.DIRECT,
            links=links,
            paths=(),
            discarded_multihop=len(multihop),
        )
    if multihop:
        ordered = sorted(multihop, key=KnowledgePath.sort_key)
        return ConnectResult(
            pair=pair, verdict=Verdict.MULTIHOP, links=(), paths=tuple(ordered[:top_k])
        )
    return ConnectResult(pair=pair, verdict=Verdict.UNCONNECTED, links=(), paths=())


# --------------------------------------------------------------------------
# JSON record form (one line per concept pair in the output JSONL)


def direct_link_as_path(link: DirectLink) -> KnowledgePath:
    """Present a classifier link as a 1-hop path (for templating and scoring)."""
    hop = PathHop(
        source=link.pair.c_s,
        relation=link.relation,
        target=link.pair.c_t,
        confidence=link.probability,
    )
    return KnowledgePath(
        hops=(hop,), origin="classifier", direction=DIRECTION_FORWARD, terminal_similarity=1.0
    )


def result_to_record(result: ConnectResult, pair_id: str, sentence_id: str) -> dict:
    return {
        "pair_id": pair_id,
        "sentence_id": sentence_id,
        "c_s": result.pair.c_s.normalized,
        "c_t": result.pair.c_t.normalized,
        "verdict": result.verdict.value,
        "links": [
            {"relation": l.relation.name, "prob": l.probability} for l in result.links
        ],
        "paths": [
            {
                "origin": p.origin,
                "direction": p.direction,
                "terminal_similarity": p.terminal_similarity,
                "hops": [
                    {
                        "source": h.source.normalized,
                        "relation": h.relation.name,
                        "inverted": h.relation.inverted,
                        "target": h.target.normalized,
                        "confidence": h.confidence,
                    }
                    for h in p.hops
                ],
            }
            for p in result.paths
        ],
        "discarded_multihop": result.discarded_multihop,
    }


def result_from_record(record: Mapping) -> tuple[str, str, ConnectResult]:
    pair = ConceptPair(Concept(record["c_s"]), Concept(record["c_t"]))
    links = tuple(
        DirectLink(pair=pair, relation=RelationType(l["relation"]), probability=l["prob"])
        for l in record["links"]
    )
    paths = tuple(
        KnowledgePath(
            hops=tuple(
                PathHop(
                    source=Concept(h["source"]),
                    relation=RelationType(h["relation"], h["inverted"]),
                    target=Concept(h["target"]),
                    confidence=h["confidence"],
                )
                for h in p["hops"]
            ),
            origin=p["origin"],
            direction=p["direction"],
            terminal_similarity=p["terminal_similarity"],
        )
        for p in record["paths"]
    )
    result = ConnectResult(
        pair=pair,
        verdict=Verdict(record["verdict"]),
        links=links,
        paths=paths,
        discarded_multihop=record["discarded_multihop"],
    )
    return record["pair_id"], record["sentence_id"], result
