"""Triple store for ConceptNet-style commonsense graphs.

Loads tab-separated ``relation<TAB>head<TAB>tail[<TAB>weight]`` dumps into an
immutable, doubly indexed graph. Concept surface forms are normalized once at
load time; all queries run over normalized text.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

# The 13 most frequent ConceptNet relations, the working inventory of the
# relation classifier and the target generator.
CORE_RELATION_NAMES: tuple[str, ...] = (
    "AtLocation",
    "Causes",
    "CapableOf",
    "IsA",
    "HasPrerequisite",
    "HasProperty",
    "HasSubevent",
    "UsedFor",
    "CausesDesire",
    "Desires",
    "HasA",
    "MotivatedByGoal",
    "ReceivesAction",
)

# Vague catch-all relations. Kept out of the core inventory; admitted only in
# graphs loaded for the static baseline, where they get relabeled later.
VAGUE_RELATION_NAMES: tuple[str, ...] = ("RelatedTo", "HasContext")

# Classifier label for "no relation holds". Never a graph edge label.
RANDOM_LABEL = "Random"


class GraphLoadError(ValueError):
    """A graph dump line could not be parsed or names an unknown relation."""


class InverseClosureError(ValueError):
    """close_under_inverses was applied to an already closed graph."""


@dataclass(frozen=True)
class RelationType:
    """A relation label plus its traversal direction.

    ``inverted=True`` means the edge is read tail-to-head (r with swapped
    arguments). The Random label is a classifier-only construct and never
    carries an inverted flag.
    """

    name: str
    inverted: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("relation name must be non-empty")
        if self.name == RANDOM_LABEL and self.inverted:
            raise ValueError("Random cannot be inverted")

    @property
    def inverse(self) -> "RelationType":
        return RelationType(self.name, not self.inverted)

    def __str__(self) -> str:
        return self.name + ("⁻¹" if self.inverted else "")


_WS_RE = re.compile(r"\s+")
# Punctuation stripped from the edges of a concept string. Internal hyphens
# and apostrophes survive (x-ray, o'clock).
_EDGE_PUNCT = ".,;:!?\"'`()[]{}<>|/\\*+^&%$#@~="


def normalize_concept_text(text: str) -> str:
    """Lowercase, underscores to spaces, collapse whitespace, strip edge punctuation.

    Idempotent: normalizing a normalized string is a no-op.
    """
    s = text.replace("_", " ").lower()
    s = _WS_RE.sub(" ", s).strip()
    s = s.strip(_EDGE_PUNCT)
    # stripping punctuation can expose inner whitespace at the edges
    s = _WS_RE.sub(" ", s).strip()
    return s


@dataclass(frozen=True)
class Concept:
    """A graph node. Identity (hash/eq) is the normalized form only."""

    normalized: str
    original: str = field(default="", compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.normalized:
            raise ValueError("empty concept")
        if not self.original:
            object.__setattr__(self, "original", self.normalized)

    def __str__(self) -> str:
        return self.normalized


def normalize_concept(text: str) -> Concept:
    """Normalize a surface form into a Concept. Raises ValueError if nothing is left."""
    norm = normalize_concept_text(text)
    if not norm:
        raise ValueError(f"concept normalizes to empty string: {text!r}")
    return Concept(norm, text)


@dataclass(frozen=True)
class Triple:
    head: Concept
    relation: RelationType
    tail: Concept
    weight: float = 1.0

    def __post_init__(self) -> None:
        if self.head.normalized == self.tail.normalized:
            raise ValueError(f"self-loop triple: {self.head.normalized}")
        if self.weight < 0:
            raise ValueError("triple weight must be non-negative")

    @property
    def key(self) -> tuple[str, str, bool, str]:
        return (self.head.normalized, self.relation.name, self.relation.inverted, self.tail.normalized)


@dataclass(frozen=True)
class RelationInventory:
    """Ordered set of admissible relation names for a graph."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.names:
            raise ValueError("empty relation inventory")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate relation names in inventory")

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __iter__(self):
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def relations(self) -> tuple[RelationType, ...]:
        return tuple(RelationType(n) for n in self.names)

    @classmethod
    def core(cls) -> "RelationInventory":
        return cls(CORE_RELATION_NAMES)

    @classmethod
    def baseline(cls) -> "RelationInventory":
        return cls(CORE_RELATION_NAMES + VAGUE_RELATION_NAMES)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "RelationInventory":
        names = []
        for line in lines:
            name = line.strip()
            if not name or name.startswith("#"):
                continue
            names.append(name)
        return cls(tuple(names))

    @classmethod
    def from_file(cls, path: str | Path) -> "RelationInventory":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)


# index key: (normalized concept, relation name, inverted flag)
_IndexKey = tuple[str, str, bool]


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable triple store with forward and backward neighbor indices."""

    triples: frozenset[Triple]
    inventory: RelationInventory
    fwd: Mapping[_IndexKey, tuple[tuple[Concept, float], ...]]
    bwd: Mapping[_IndexKey, tuple[tuple[Concept, float], ...]]
    concepts: Mapping[str, Concept]
    triple_keys: frozenset[tuple[str, str, bool, str]]
    self_loops_dropped: int = 0

    def __len__(self) -> int:
        return len(self.triples)

    @property
    def vocab(self) -> Mapping[str, Concept]:
        return self.concepts

    def has_triple(self, head: Concept | str, relation: RelationType | str, tail: Concept | str) -> bool:
        h = head.normalized if isinstance(head, Concept) else normalize_concept_text(head)
        t = tail.normalized if isinstance(tail, Concept) else normalize_concept_text(tail)
        if isinstance(relation, RelationType):
            r, inv = relation.name, relation.inverted
        else:
            r, inv = relation, False
        return (h, r, inv, t) in self.triple_keys

    def relation_names(self) -> tuple[str, ...]:
        return self.inventory.names


def _sorted_neighbors(entries: list[tuple[Concept, float]]) -> tuple[tuple[Concept, float], ...]:
    # weight descending, then lexicographic on the normalized concept
    return tuple(sorted(entries, key=lambda cw: (-cw[1], cw[0].normalized)))


def build_graph(
    triples: Iterable[Triple],
    inventory: RelationInventory,
    self_loops_dropped: int = 0,
) -> KnowledgeGraph:
    """Index a collection of triples. Duplicate (head, relation, tail) keep max weight."""
    best: dict[tuple[str, str, bool, str], Triple] = {}
    for t in triples:
        prev = best.get(t.key)
        if prev is None or t.weight > prev.weight:
            best[t.key] = t

    fwd: dict[_IndexKey, list[tuple[Concept, float]]] = {}
    bwd: dict[_IndexKey, list[tuple[Concept, float]]] = {}
    concepts: dict[str, Concept] = {}
    for t in best.values():
        rkey = (t.relation.name, t.relation.inverted)
        fwd.setdefault((t.head.normalized, *rkey), []).append((t.tail, t.weight))
        bwd.setdefault((t.tail.normalized, *rkey), []).append((t.head, t.weight))
        concepts.setdefault(t.head.normalized, t.head)
        concepts.setdefault(t.tail.normalized, t.tail)

    return KnowledgeGraph(
        triples=frozenset(best.values()),
        inventory=inventory,
        fwd={k: _sorted_neighbors(v) for k, v in fwd.items()},
        bwd={k: _sorted_neighbors(v) for k, v in bwd.items()},
        concepts=concepts,
        triple_keys=frozenset(best.keys()),
        self_loops_dropped=self_loops_dropped,
    )


def load_graph(lines: Iterable[str], inventory: RelationInventory) -> KnowledgeGraph:
    """Parse a TSV triple dump.

    Each non-empty line is ``relation<TAB>head<TAB>tail`` with an optional
    fourth weight column (default 1.0). Malformed lines and relations outside
    the inventory raise GraphLoadError with the line number. Self-loops after
    normalization are dropped and counted.
    """
    triples: list[Triple] = []
    dropped = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise GraphLoadError(f"line {lineno}: expected 3 or 4 tab-separated fields, got {len(parts)}")
        rel_name, head_text, tail_text = parts[0].strip(), parts[1], parts[2]
        if rel_name not in inventory:
            raise GraphLoadError(f"line {lineno}: unknown relation {rel_name!r}")
        weight = 1.0
        if len(parts) == 4:
            try:
                weight = float(parts[3])
            except ValueError as exc:
                raise GraphLoadError(f"line {lineno}: bad weight {parts[3]!r}") from exc
            if weight < 0:
                raise GraphLoadError(f"line {lineno}: negative weight {weight}")
        try:
            head = normalize_concept(head_text)
            tail = normalize_concept(tail_text)
        except ValueError as exc:
            raise GraphLoadError(f"line {lineno}: {exc}") from exc
        if head.normalized == tail.normalized:
            dropped += 1
            continue
        triples.append(Triple(head, RelationType(rel_name), tail, weight))
    if dropped:
        logger.warning("dropped %d self-loop triple(s) at load", dropped)
    return build_graph(triples, inventory, self_loops_dropped=dropped)


def load_graph_file(path: str | Path, inventory: RelationInventory) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return load_graph(fh, inventory)


def neighbors(
    g: KnowledgeGraph,
    concept: Concept | str,
    relation: RelationType,
    backward: bool = False,
) -> list[tuple[Concept, float]]:
    """Adjacent concepts under one relation, ordered weight desc then lexicographic.

    ``backward=True`` lists heads of triples whose tail is ``concept``.
    """
    norm = concept.normalized if isinstance(concept, Concept) else normalize_concept_text(concept)
    index = g.bwd if backward else g.fwd
    return list(index.get((norm, relation.name, relation.inverted), ()))


def close_under_inverses(g: KnowledgeGraph) -> KnowledgeGraph:
    """Return a new graph where every triple also appears with its inverted relation.

    Exactly doubles the triple count. Applying it twice is an error.
    """
    for t in g.triples:
        if t.relation.inverted:
            raise InverseClosureError("graph already contains inverted relations")
    doubled: list[Triple] = []
    for t in g.triples:
        doubled.append(t)
        doubled.append(Triple(t.tail, t.relation.inverse, t.head, t.weight))
    return build_graph(doubled, g.inventory, self_loops_dropped=g.self_loops_dropped)
