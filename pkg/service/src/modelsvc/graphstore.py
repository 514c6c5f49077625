"""Tab-separated triple files, indexed for lookups and neighbor queries.

The stub backends answer straight out of one of these tables. The file format
is the same ``relation<TAB>head<TAB>tail[<TAB>weight]`` dump the pipeline
tools consume: concepts are lowercased with underscores read as spaces,
self-loops are dropped, duplicate triples keep their maximum weight, and
neighbor lists come back weight-descending with ties broken alphabetically.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

logger = logging.getLogger(__name__)

# Classifier label for "no relation holds". Never an edge label.
RANDOM_LABEL = "Random"

# Default relation inventory: the 13 relations behind the wire protocol's
# 14-label classify response. A relations file replaces this set.
CORE_RELATIONS: tuple[str, ...] = (
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


class GraphFormatError(ValueError):
    """A triple or relations file could not be parsed."""


_WS = re.compile(r"\s+")
# Punctuation stripped from the edges of a concept string. Internal hyphens
# and apostrophes survive (x-ray, o'clock).
_EDGE_PUNCT = ".,;:!?\"'`()[]{}<>|/\\*+^&%$#@~="


def normalize(text: str) -> str:
    """Lowercase, underscores to spaces, collapse whitespace, strip edge punctuation.

    Idempotent: normalizing a normalized string is a no-op.
    """
    s = text.replace("_", " ").lower()
    s = _WS.sub(" ", s).strip()
    s = s.strip(_EDGE_PUNCT)
    # stripping punctuation can expose inner whitespace at the edges
    s = _WS.sub(" ", s).strip()
    return s


def load_relations(lines: Iterable[str]) -> tuple[str, ...]:
    """One relation name per line; blank lines and # comments are skipped."""
    names: list[str] = []
    for line in lines:
        name = line.strip()
        if not name or name.startswith("#"):
            continue
        names.append(name)
    if not names:
        raise GraphFormatError("relations file names no relations")
    if len(set(names)) != len(names):
        raise GraphFormatError("duplicate relation names")
    if RANDOM_LABEL in names:
        raise GraphFormatError(f"{RANDOM_LABEL!r} is reserved for the classifier")
    return tuple(names)


def load_relations_file(path: str | Path) -> tuple[str, ...]:
    with open(path, encoding="utf-8") as fh:
        return load_relations(fh)


@dataclass(frozen=True)
class TripleTable:
    """Immutable triple store with forward and backward neighbor indices."""

    relations: tuple[str, ...]
    keys: frozenset[tuple[str, str, str]]
    fwd: Mapping[tuple[str, str], tuple[tuple[str, float], ...]]
    bwd: Mapping[tuple[str, str], tuple[tuple[str, float], ...]]
    nodes: frozenset[str]
    self_loops_dropped: int = 0

    def has(self, head: str, relation: str, tail: str) -> bool:
        return (normalize(head), relation, normalize(tail)) in self.keys

    def neighbors(self, source: str, relation: str, inverted: bool) -> tuple[tuple[str, float], ...]:
        """Adjacent concepts under one relation; inverted walks edges tail-to-head."""
        index = self.bwd if inverted else self.fwd
        return index.get((normalize(source), relation), ())


def load_triples(lines: Iterable[str], relations: tuple[str, ...]) -> TripleTable:
    """Parse a TSV triple dump into an indexed table.

    Malformed lines and relations outside the inventory raise GraphFormatError
    with the line number.
    """
    best: dict[tuple[str, str, str], float] = {}
    dropped = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise GraphFormatError(f"line {lineno}: expected 3 or 4 tab-separated fields, got {len(parts)}")
        rel = parts[0].strip()
        if rel not in relations:
            raise GraphFormatError(f"line {lineno}: unknown relation {rel!r}")
        weight = 1.0
        if len(parts) == 4:
            try:
                weight = float(parts[3])
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[3]!r}") from exc
            if weight < 0:
                raise GraphFormatError(f"line {lineno}: negative weight {weight}")
        head, tail = normalize(parts[1]), normalize(parts[2])
        if not head or not tail:
            raise GraphFormatError(f"line {lineno}: concept normalizes to nothing")
        if head == tail:
            dropped += 1
            continue
        key = (head, rel, tail)
        if weight > best.get(key, -1.0):
            best[key] = weight
    if dropped:
        logger.warning("dropped %d self-loop triple(s) at load", dropped)

    fwd: dict[tuple[str, str], list[tuple[str, float]]] = {}
    bwd: dict[tuple[str, str], list[tuple[str, float]]] = {}
    nodes: set[str] = set()
    for (head, rel, tail), weight in best.items():
        fwd.setdefault((head, rel), []).append((tail, weight))
        bwd.setdefault((tail, rel), []).append((head, weight))
        nodes.update((head, tail))

    def ranked(entries: list[tuple[str, float]]) -> tuple[tuple[str, float], ...]:
        return tuple(sorted(entries, key=lambda cw: (-cw[1], cw[0])))

    return TripleTable(
        relations=tuple(relations),
        keys=frozenset(best),
        fwd={k: ranked(v) for k, v in fwd.items()},
        bwd={k: ranked(v) for k, v in bwd.items()},
        nodes=frozenset(nodes),
        self_loops_dropped=dropped,
    )


def load_triples_file(path: str | Path, relations: tuple[str, ...]) -> TripleTable:
    with open(path, encoding="utf-8") as fh:
        return load_triples(fh, relations)
