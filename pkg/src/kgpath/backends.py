"""Model backends: relation classifier and target generator.

Two interchangeable implementations of each: a deterministic graph-lookup
oracle (for tests and offline runs) and a JSON/HTTP client for an external
model service. Also hosts the part-of-speech plausibility filter and the
small lexicon tagger it relies on.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from .extract import ConceptPair
from .graph import (
    CORE_RELATION_NAMES,
    RANDOM_LABEL,
    VAGUE_RELATION_NAMES,
    Concept,
    KnowledgeGraph,
    RelationType,
    neighbors,
    normalize_concept,
)

logger = logging.getLogger(__name__)


class BackendError(Exception):
    """Base class for classifier/generator failures."""


class RemoteTransportError(BackendError):
    """The service could not be reached (after retries)."""


class RemoteProtocolError(BackendError):
    """The service answered with a malformed or contract-violating payload."""


@dataclass(frozen=True)
class RelationDistribution:
    """Per-relation sigmoid scores for one ordered concept pair.

    Scores are independent probabilities; they need not sum to one. The label
    set is the relation inventory plus Random.
    """

    scores: Mapping[str, float]

    def __post_init__(self) -> None:
        if RANDOM_LABEL not in self.scores:
            raise ValueError("distribution must include the Random label")
        for name, p in self.scores.items():
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"score for {name} out of [0,1]: {p}")

    def above(self, threshold: float, exclude: Iterable[str] = (RANDOM_LABEL,)) -> list[tuple[str, float]]:
        """Relations scoring at or above the threshold, score desc then name."""
        skip = set(exclude)
        hits = [(n, p) for n, p in self.scores.items() if n not in skip and p >= threshold]
        hits.sort(key=lambda np_: (-np_[1], np_[0]))
        return hits

    def top_relation(self, exclude: Iterable[str] = (RANDOM_LABEL,)) -> tuple[str, float] | None:
        skip = set(exclude)
        best = None
        for n, p in self.scores.items():
            if n in skip:
                continue
            if best is None or p > best[1] or (p == best[1] and n < best[0]):
                best = (n, p)
        return best


@dataclass(frozen=True)
class GeneratedTarget:
    concept: Concept
    confidence: float
    rank: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1: {self.rank}")


def validate_targets(targets: Sequence[GeneratedTarget], beam: int, source: Concept) -> None:
    """Contract checks shared by all generator backends."""
    if len(targets) > beam:
        raise BackendError(f"generator returned {len(targets)} targets for beam {beam}")
    for i, t in enumerate(targets):
        if t.rank != i + 1:
            raise BackendError(f"target ranks must be 1..k gapless, got {t.rank} at position {i}")
        if i and targets[i - 1].confidence < t.confidence:
            raise BackendError("target confidences must be non-increasing")
        if t.concept.normalized == source.normalized:
            raise BackendError("generator returned its own source concept")


class ClassifierBackend(Protocol):
    @property
    def labels(self) -> tuple[str, ...]: ...

    def classify(self, pair: ConceptPair) -> RelationDistribution: ...


class GeneratorBackend(Protocol):
    @property
    def relations(self) -> tuple[RelationType, ...]: ...

    def generate(self, source: Concept, relation: RelationType, beam: int) -> list[GeneratedTarget]: ...


class KGOracleClassifier:
    """Exact-lookup classifier over a fixture graph.

    A relation scores 1.0 iff the triple is in the graph (multi-label);
    Random scores 1.0 iff no relation holds.
    """

    def __init__(self, graph: KnowledgeGraph):
        self._graph = graph
        self._labels = tuple(graph.inventory.names) + (RANDOM_LABEL,)

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    def classify(self, pair: ConceptPair) -> RelationDistribution:
        scores = {}
        hit = False
        for name in self._graph.inventory.names:
            present = self._graph.has_triple(pair.c_s, name, pair.c_t)
            scores[name] = 1.0 if present else 0.0
            hit = hit or present
        scores[RANDOM_LABEL] = 0.0 if hit else 1.0
        return RelationDistribution(scores)


class KGOracleGenerator:
    """Graph-neighbor generator. Inverted relations query the backward index.

    Confidence is the edge weight normalized by the best weight in the
    returned beam, so the top target always scores 1.0.
    """

    def __init__(self, graph: KnowledgeGraph):
        self._graph = graph
        self._relations = graph.inventory.relations()

    @property
    def relations(self) -> tuple[RelationType, ...]:
        return self._relations

    def generate(self, source: Concept, relation: RelationType, beam: int) -> list[GeneratedTarget]:
        if beam < 1:
            raise BackendError(f"beam must be >= 1: {beam}")
        base = RelationType(relation.name)
        adjacent = neighbors(self._graph, source, base, backward=relation.inverted)
        top = adjacent[:beam]
        if not top:
            return []
        max_w = top[0][1]
        targets = [
            GeneratedTarget(concept=c, confidence=(w / max_w if max_w > 0 else 0.0), rank=i + 1)
            for i, (c, w) in enumerate(top)
        ]
        validate_targets(targets, beam, source)
        return targets


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str
    timeout_ms: int = 10_000
    max_retries: int = 2
    max_concurrent: int = 8
    relation_names: tuple[str, ...] = CORE_RELATION_NAMES

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0 or self.max_retries < 0 or self.max_concurrent < 1:
            raise ValueError("bad remote config")


class RemoteSession:
    """Shared HTTP plumbing: bounded concurrency, timeout, bounded retry.

    An explicit client can be injected (e.g. an ASGI-transport client in
    tests); otherwise one is created from the config. Responses are consumed
    strictly per request, never matched by arrival order.
    """

    def __init__(self, config: RemoteConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(
            base_url=config.base_url, timeout=config.timeout_ms / 1000.0
        )
        self._slots = threading.Semaphore(config.max_concurrent)

    def close(self) -> None:
        self._client.close()

    def post(self, path: str, payload: dict) -> dict:
        last_exc: Exception | None = None
        for _attempt in range(self.config.max_retries + 1):
            try:
                with self._slots:
                    resp = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                last_exc = RemoteTransportError(f"{path}: service error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise RemoteProtocolError(f"{path}: unexpected status {resp.status_code}")
            try:
                body = resp.json()
            except ValueError as exc:
                raise RemoteProtocolError(f"{path}: response is not JSON") from exc
            if not isinstance(body, dict):
                raise RemoteProtocolError(f"{path}: response must be a JSON object")
            return body
        raise RemoteTransportError(f"{path}: giving up after {self.config.max_retries + 1} attempts") from last_exc


class RemoteClassifier:
    """POST /classify {head, tail} -> {scores: {label: prob, ...}}."""

    def __init__(self, session: RemoteSession):
        self._session = session
        self._labels = tuple(session.config.relation_names) + (RANDOM_LABEL,)

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    def classify(self, pair: ConceptPair) -> RelationDistribution:
        body = self._session.post(
            "/classify", {"head": pair.c_s.normalized, "tail": pair.c_t.normalized}
        )
        scores = body.get("scores")
        if not isinstance(scores, dict):
            raise RemoteProtocolError("/classify: missing scores object")
        missing = [l for l in self._labels if l not in scores]
        if missing:
            raise RemoteProtocolError(f"/classify: labels missing from response: {missing}")
        try:
            dist = RelationDistribution({str(k): float(v) for k, v in scores.items()})
        except (TypeError, ValueError) as exc:
            raise RemoteProtocolError(f"/classify: bad score values: {exc}") from exc
        return dist


class RemoteGenerator:
    """POST /generate {source, relation, inverted, beam} -> {targets: [...]}."""

    def __init__(self, session: RemoteSession):
        self._session = session
        self._relations = tuple(RelationType(n) for n in session.config.relation_names)

    @property
    def relations(self) -> tuple[RelationType, ...]:
        return self._relations

    def generate(self, source: Concept, relation: RelationType, beam: int) -> list[GeneratedTarget]:
        if beam < 1:
            raise BackendError(f"beam must be >= 1: {beam}")
        body = self._session.post(
            "/generate",
            {
                "source": source.normalized,
                "relation": relation.name,
                "inverted": relation.inverted,
                "beam": beam,
            },
        )
        raw = body.get("targets")
        if not isinstance(raw, list):
            raise RemoteProtocolError("/generate: missing targets list")
        targets: list[GeneratedTarget] = []
        for i, item in enumerate(raw):
            try:
                concept = normalize_concept(str(item["concept"]))
                confidence = float(item["confidence"])
            except (KeyError, TypeError, ValueError) as exc:
                raise RemoteProtocolError(f"/generate: bad target at rank {i + 1}: {exc}") from exc
            try:
                targets.append(GeneratedTarget(concept=concept, confidence=confidence, rank=i + 1))
            except ValueError as exc:
                raise RemoteProtocolError(f"/generate: {exc}") from exc
        try:
            validate_targets(targets, beam, source)
        except BackendError as exc:
            raise RemoteProtocolError(f"/generate: {exc}") from exc
        return targets


# --------------------------------------------------------------------------
# Part-of-speech plausibility filtering


TAGS = ("NOUN", "VERB", "ADJ", "ADV")

# Minimal word list for words the suffix rules get wrong. Everything else:
# -ly -> ADV, -ing/-ed -> VERB, default NOUN.
_LEXICON: dict[str, str] = {}
_LEXICON.update(
    {
        w: "VERB"
        for w in (
            "bake buy build break bring carry catch clean climb close cook cut "
            "drink drive eat fall feed fight find fix fly follow forget get give "
            "go grow hear help hide hit hold hunt jump keep kick know learn leave "
            "lift listen live lose make meet move open paint pay plant play pull "
            "push put read recycle repair ride run say see sell send show sing "
            "sit sleep smell speak spend stand start stay stop swim take talk "
            "teach tell think throw touch train travel visit wait walk want wash "
            "watch wear win work write"
        ).split()
    }
)
_LEXICON.update(
    {
        w: "ADJ"
        for w in (
            "angry bad beautiful big bitter bright cheap clean cold cool dangerous "
            "dark dirty dry dull empty expensive fast fresh full good happy hard "
            "healthy heavy hot hungry important large light long loud narrow new "
            "old poor quiet rich rough sad safe sharp short sick slow small smooth "
            "soft sour strong sweet tall tasty thirsty tired ugly warm weak wet "
            "wide young"
        ).split()
    }
)

Tagger = Callable[[str], str]


def lexicon_tagger(word: str) -> str:
    """Word-list lookup, then suffix heuristics, then NOUN."""
    w = word.lower()
    tag = _LEXICON.get(w)
    if tag:
        return tag
    if len(w) > 3 and w.endswith("ly"):
        return "ADV"
    if len(w) > 4 and (w.endswith("ing") or w.endswith("ed")):
        return "VERB"
    return "NOUN"


def tag_concept(concept: Concept | str, tagger: Tagger = lexicon_tagger) -> tuple[str, ...]:
    text = concept.normalized if isinstance(concept, Concept) else concept
    return tuple(tagger(tok) for tok in text.split())


def _match_pattern(pattern_tokens: Sequence[str], tags: Sequence[str]) -> bool:
    """Tiny backtracking matcher. Pattern tokens: TAG, TAG+, ANY, ANY*."""
    if not pattern_tokens:
        return not tags
    head, rest = pattern_tokens[0], pattern_tokens[1:]
    if head == "ANY*":
        return any(_match_pattern(rest, tags[k:]) for k in range(len(tags) + 1))
    if head == "ANY":
        return bool(tags) and _match_pattern(rest, tags[1:])
    if head.endswith("+"):
        want = head[:-1]
        if not tags or tags[0] != want:
            return False
        # consume one or more
        return any(
            _match_pattern(rest, tags[k:])
            for k in range(1, len(tags) + 1)
            if all(t == want for t in tags[:k])
        )
    return bool(tags) and tags[0] == head and _match_pattern(rest, tags[1:])


@dataclass(frozen=True)
class PosPatternTable:
    """relation name -> allowed (head pattern, tail pattern) pairs."""

    patterns: Mapping[str, tuple[tuple[str, str], ...]]

    def pairs_for(self, relation: str) -> tuple[tuple[str, str], ...] | None:
        return self.patterns.get(relation)


def load_pos_table(lines: Iterable[str]) -> PosPatternTable:
    """Parse ``relation<TAB>head_pattern<TAB>tail_pattern`` rows (repeatable)."""
    table: dict[str, list[tuple[str, str]]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 tab-separated fields")
        rel, hp, tp = (p.strip() for p in parts)
        table.setdefault(rel, []).append((hp, tp))
    return PosPatternTable({k: tuple(v) for k, v in table.items()})


def load_pos_table_file(path: str | Path) -> PosPatternTable:
    with open(path, encoding="utf-8") as fh:
        return load_pos_table(fh)


def _default_pos_patterns() -> PosPatternTable:
    noun = ("NOUN+", "NOUN+")
    table: dict[str, tuple[tuple[str, str], ...]] = {}
    for rel in ("IsA", "AtLocation", "HasA", "Desires", "CapableOf"):
        table[rel] = (noun,)
    table["HasProperty"] = (noun, ("NOUN+", "ADJ"))
    verbish = (noun, ("VERB ANY*", "NOUN+"), ("NOUN+", "VERB ANY*"), ("VERB ANY*", "VERB ANY*"))
    for rel in (
        "HasPrerequisite",
        "HasSubevent",
        "MotivatedByGoal",
        "UsedFor",
        "Causes",
        "CausesDesire",
        "ReceivesAction",
    ):
        table[rel] = verbish
    return PosPatternTable(table)


DEFAULT_POS_TABLE = _default_pos_patterns()
assert all(DEFAULT_POS_TABLE.pairs_for(r) for r in CORE_RELATION_NAMES)


def pos_filter(
    prediction: tuple[Concept, RelationType, Concept],
    table: PosPatternTable = DEFAULT_POS_TABLE,
    tagger: Tagger = lexicon_tagger,
) -> bool:
    """True iff the (head, relation, tail) prediction is PoS-plausible.

    Relations absent from the table are kept. Vague relations are never
    filtered here; they are handled by relabeling instead.
    """
    head, relation, tail = prediction
    if relation.name in VAGUE_RELATION_NAMES:
        return True
    pairs = table.pairs_for(relation.name)
    if pairs is None:
        return True
    head_tags = tag_concept(head, tagger)
    tail_tags = tag_concept(tail, tagger)
    for hp, tp in pairs:
        if _match_pattern(hp.split(), head_tags) and _match_pattern(tp.split(), tail_tags):
            return True
    return False


@dataclass
class PosFilteredGenerator:
    """Generator decorator dropping PoS-implausible targets.

    Beams are not refilled after filtering, so fewer than ``beam`` targets may
    come back. Ranks are reassigned to stay gapless.
    """

    inner: GeneratorBackend
    table: PosPatternTable = field(default_factory=lambda: DEFAULT_POS_TABLE)
    tagger: Tagger = lexicon_tagger

    @property
    def relations(self) -> tuple[RelationType, ...]:
        return self.inner.relations

    def generate(self, source: Concept, relation: RelationType, beam: int) -> list[GeneratedTarget]:
        kept = []
        for t in self.inner.generate(source, relation, beam):
            head, tail = (t.concept, source) if relation.inverted else (source, t.concept)
            if pos_filter((head, RelationType(relation.name), tail), self.table, self.tagger):
                kept.append(t)
        return [GeneratedTarget(t.concept, t.confidence, i + 1) for i, t in enumerate(kept)]
