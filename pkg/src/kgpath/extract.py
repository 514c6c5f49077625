"""Concept extraction: ground sentence pairs in the graph vocabulary.

Gazetteer-style matching of token n-grams (up to 4) against the graph's
concept set, with light plural stripping as a lemma fallback. Also reads the
corpus JSONL format and pre-extracted concept files.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .embeddings import DEFAULT_STOPWORDS
from .graph import Concept, KnowledgeGraph, normalize_concept_text

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\S+")


class CorpusError(ValueError):
    """A corpus or pre-extracted record is malformed."""


@dataclass(frozen=True)
class SentencePair:
    id: str
    s1: str
    s2: str
    gold_implicit: str | None = None
    gold_path: tuple[tuple[str, str, str], ...] | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("sentence pair needs an id")
        if not self.s1.strip() or not self.s2.strip():
            raise ValueError(f"sentence pair {self.id}: empty sentence")


@dataclass(frozen=True)
class ConceptMention:
    """A vocabulary concept found in a sentence. span is (start, end) character
    offsets into the sentence, or None for pre-extracted mentions."""

    surface: str
    node: Concept
    span: tuple[int, int] | None = None


@dataclass(frozen=True)
class ConceptPair:
    c_s: Concept
    c_t: Concept

    def __post_init__(self) -> None:
        if self.c_s.normalized == self.c_t.normalized:
            raise ValueError(f"degenerate concept pair: {self.c_s.normalized}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.c_s.normalized, self.c_t.normalized)


def load_corpus(lines: Iterable[str]) -> list[SentencePair]:
    """Parse corpus JSONL: {id, s1, s2, gold_implicit?, gold_path?}.

    gold_path entries are [head, relation, tail] arrays.
    """
    pairs: list[SentencePair] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: invalid JSON") from exc
        try:
            pid = str(rec["id"])
            s1, s2 = rec["s1"], rec["s2"]
        except KeyError as exc:
            raise CorpusError(f"line {lineno}: missing field {exc}") from exc
        if pid in seen:
            raise CorpusError(f"line {lineno}: duplicate id {pid!r}")
        seen.add(pid)
        gold_path = None
        if rec.get("gold_path") is not None:
            try:
                gold_path = tuple((str(h), str(r), str(t)) for h, r, t in rec["gold_path"])
            except (TypeError, ValueError) as exc:
                raise CorpusError(f"line {lineno}: gold_path entries must be [head, relation, tail]") from exc
        pairs.append(
            SentencePair(
                id=pid,
                s1=str(s1),
                s2=str(s2),
                gold_implicit=rec.get("gold_implicit"),
                gold_path=gold_path,
            )
        )
    return pairs


def load_corpus_file(path: str | Path) -> list[SentencePair]:
    with open(path, encoding="utf-8") as fh:
        return load_corpus(fh)


def _vocab_map(vocab: KnowledgeGraph | Mapping[str, Concept] | Iterable[Concept]) -> Mapping[str, Concept]:
    if isinstance(vocab, KnowledgeGraph):
        return vocab.concepts
    if isinstance(vocab, Mapping):
        return vocab
    return {c.normalized: c for c in vocab}


def _lemma_variants(phrase: str) -> list[str]:
    """The phrase itself, then light plural stripping on its last token."""
    variants = [phrase]
    words = phrase.split()
    last = words[-1]
    if len(last) > 3 and last.endswith("es"):
        variants.append(" ".join(words[:-1] + [last[:-2]]))
    if len(last) > 2 and last.endswith("s") and not last.endswith("ss"):
        variants.append(" ".join(words[:-1] + [last[:-1]]))
    return variants


def extract_concepts(
    sentence: str,
    vocab: KnowledgeGraph | Mapping[str, Concept] | Iterable[Concept],
    max_ngram: int = 4,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> list[ConceptMention]:
    """Match token n-grams against the vocabulary.

    Overlaps are resolved longest-first, ties leftmost. N-grams made of
    stopwords only never match. Returned mentions are ordered by position.
    """
    table = _vocab_map(vocab)
    raw_tokens = [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(sentence)]
    tokens: list[tuple[str, int, int]] = []
    for text, start, end in raw_tokens:
        norm = normalize_concept_text(text)
        if norm:
            tokens.append((norm, start, end))

    matches: list[tuple[int, int, Concept]] = []  # (n, token index, node)
    for i in range(len(tokens)):
        for n in range(min(max_ngram, len(tokens) - i), 0, -1):
            gram = [tokens[i + k][0] for k in range(n)]
            if all(w in stopwords for w in gram):
                continue
            for candidate in _lemma_variants(" ".join(gram)):
                node = table.get(candidate)
                if node is not None:
                    matches.append((n, i, node))
                    break

    matches.sort(key=lambda m: (-m[0], m[1]))
    taken: set[int] = set()
    chosen: list[tuple[int, int, Concept]] = []
    for n, i, node in matches:
        span = range(i, i + n)
        if any(k in taken for k in span):
            continue
        taken.update(span)
        chosen.append((n, i, node))

    chosen.sort(key=lambda m: m[1])
    mentions = []
    for n, i, node in chosen:
        start = tokens[i][1]
        end = tokens[i + n - 1][2]
        mentions.append(ConceptMention(surface=sentence[start:end], node=node, span=(start, end)))
    return mentions


def pair_concepts(
    mentions_s1: Iterable[ConceptMention],
    mentions_s2: Iterable[ConceptMention],
) -> list[ConceptPair]:
    """Cross product of mention concepts, minus identity pairs, deduplicated.

    Input order is preserved: s1 mentions outer, s2 mentions inner.
    """
    pairs: list[ConceptPair] = []
    seen: set[tuple[str, str]] = set()
    for a in mentions_s1:
        for b in mentions_s2:
            if a.node.normalized == b.node.normalized:
                continue
            key = (a.node.normalized, b.node.normalized)
            if key in seen:
                continue
            seen.add(key)
            pairs.append(ConceptPair(a.node, b.node))
    return pairs


def load_pre_extracted(
    lines: Iterable[str],
    corpus: Iterable[SentencePair],
    vocab: KnowledgeGraph | Mapping[str, Concept] | Iterable[Concept],
) -> tuple[dict[str, tuple[list[ConceptMention], list[ConceptMention]]], int]:
    """Read pre-extracted concepts: {id, s1_concepts, s2_concepts} JSONL.

    Concepts missing from the vocabulary are dropped (count returned).
    Records for unknown sentence ids are an error.
    """
    table = _vocab_map(vocab)
    known_ids = {p.id for p in corpus}
    out: dict[str, tuple[list[ConceptMention], list[ConceptMention]]] = {}
    dropped = 0

    def to_mentions(values: list, pid: str) -> list[ConceptMention]:
        nonlocal dropped
        mentions: list[ConceptMention] = []
        seen: set[str] = set()
        for value in values:
            norm = normalize_concept_text(str(value))
            node = None
            if norm:
                for candidate in _lemma_variants(norm):
                    node = table.get(candidate)
                    if node is not None:
                        break
            if node is None:
                dropped += 1
                logger.warning("pre-extracted concept %r (pair %s) not in vocabulary, dropped", value, pid)
                continue
            if node.normalized in seen:
                continue
            seen.add(node.normalized)
            mentions.append(ConceptMention(surface=str(value), node=node, span=None))
        return mentions

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            pid = str(rec["id"])
            s1_concepts = rec["s1_concepts"]
            s2_concepts = rec["s2_concepts"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise CorpusError(f"line {lineno}: bad pre-extracted record: {exc}") from exc
        if pid not in known_ids:
            raise CorpusError(f"line {lineno}: unknown sentence pair id {pid!r}")
        out[pid] = (to_mentions(s1_concepts, pid), to_mentions(s2_concepts, pid))
    return out, dropped
