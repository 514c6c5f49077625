"""Static word embeddings and phrase encoding.

Reads text-format embedding tables (ConceptNet Numberbatch style: a
``count dim`` header followed by one ``word v1 .. vdim`` line each). Phrases
are encoded as the mean of their non-stopword token vectors.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .graph import Concept, normalize_concept_text

logger = logging.getLogger(__name__)


class EmbeddingLoadError(ValueError):
    """The embedding file header or a vector line is malformed."""


# Small English stopword list used for phrase encoding and concept extraction.
# Function words only; content-bearing words stay out so concept tokens are
# never dropped. Overridable via a one-word-per-line file.
DEFAULT_STOPWORDS: frozenset[str] = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by cannot could did do does doing
    down during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more
    most my myself no nor not now of off on once only or other ought our ours
    ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too
    under until up very was we were what when where which while who whom why
    will with would you your yours yourself yourselves shall may might must
    can upon onto among amongst toward towards within without also ever else
    yet since per via
    """.split()
)


def load_stopwords(path: str | Path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip().lower()
            if w and not w.startswith("#"):
                words.add(w)
    return frozenset(words)


@dataclass(frozen=True)
class EmbeddingStore:
    dim: int
    table: Mapping[str, np.ndarray]
    stopwords: frozenset[str] = DEFAULT_STOPWORDS

    def __len__(self) -> int:
        return len(self.table)

    def __contains__(self, word: object) -> bool:
        return word in self.table

    def vector(self, word: str) -> np.ndarray | None:
        return self.table.get(word)

    @classmethod
    def from_vectors(
        cls,
        vectors: Mapping[str, Iterable[float]],
        stopwords: frozenset[str] = DEFAULT_STOPWORDS,
    ) -> "EmbeddingStore":
        table: dict[str, np.ndarray] = {}
        dim = None
        for word, vals in vectors.items():
            arr = np.asarray(list(vals), dtype=np.float64)
            if dim is None:
                dim = arr.shape[0]
            elif arr.shape[0] != dim:
                raise EmbeddingLoadError(f"vector for {word!r} has dim {arr.shape[0]}, expected {dim}")
            arr.setflags(write=False)
            table[word] = arr
        if dim is None:
            raise EmbeddingLoadError("no vectors given")
        return cls(dim=dim, table=table, stopwords=stopwords)


@dataclass(frozen=True)
class PhraseVector:
    """Mean vector of the phrase's known content tokens.

    ``coverage`` is the fraction of non-stopword tokens found in the table;
    0.0 coverage comes with an all-zero vector.
    """

    vector: np.ndarray
    coverage: float


def load_embeddings(
    lines: Iterable[str],
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> EmbeddingStore:
    """Parse a text embedding table. Duplicate words: the last occurrence wins."""
    it = iter(lines)
    try:
        header = next(it)
    except StopIteration:
        raise EmbeddingLoadError("empty embedding file") from None
    parts = header.split()
    if len(parts) != 2:
        raise EmbeddingLoadError(f"header must be 'count dim', got {header.strip()!r}")
    try:
        count, dim = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise EmbeddingLoadError(f"header must be 'count dim', got {header.strip()!r}") from exc
    if count < 0 or dim <= 0:
        raise EmbeddingLoadError(f"bad header values: count={count} dim={dim}")

    table: dict[str, np.ndarray] = {}
    seen_lines = 0
    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line:
            continue
        seen_lines += 1
        fields = line.split()
        if len(fields) != dim + 1:
            raise EmbeddingLoadError(f"line {lineno}: expected {dim} components, got {len(fields) - 1}")
        word = fields[0]
        try:
            vec = np.array([float(x) for x in fields[1:]], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingLoadError(f"line {lineno}: bad float") from exc
        if word in table:
            logger.warning("duplicate embedding for %r, keeping the later entry", word)
        vec.setflags(write=False)
        table[word] = vec
    if seen_lines != count:
        raise EmbeddingLoadError(f"header promised {count} entries, file has {seen_lines}")
    return EmbeddingStore(dim=dim, table=table, stopwords=stopwords)


def load_embeddings_file(path: str | Path, stopwords: frozenset[str] = DEFAULT_STOPWORDS) -> EmbeddingStore:
    with open(path, encoding="utf-8") as fh:
        return load_embeddings(fh, stopwords)


def encode_phrase(store: EmbeddingStore, phrase: Concept | str) -> PhraseVector:
    """Mean of non-stopword token vectors; coverage = found / non-stopword tokens."""
    text = phrase.normalized if isinstance(phrase, Concept) else normalize_concept_text(phrase)
    tokens = [t for t in text.split() if t not in store.stopwords]
    found = [store.table[t] for t in tokens if t in store.table]
    if not tokens or not found:
        return PhraseVector(np.zeros(store.dim), 0.0)
    vec = np.mean(np.vstack(found), axis=0)
    vec.setflags(write=False)
    return PhraseVector(vec, len(found) / len(tokens))


def cosine(u: PhraseVector | np.ndarray, v: PhraseVector | np.ndarray) -> float:
    """Cosine similarity; either argument zero gives 0.0. Clamped to [-1, 1]."""
    a = u.vector if isinstance(u, PhraseVector) else np.asarray(u, dtype=np.float64)
    b = v.vector if isinstance(v, PhraseVector) else np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    val = float(np.dot(a, b)) / (na * nb)
    return max(-1.0, min(1.0, val))
