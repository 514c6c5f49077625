"""Scoring and dataset utilities: NL templating, reference encodings, cosine
and token-matching F1, classifier/generator metrics, Random-class sampling,
annotation agreement, corpus statistics.
"""
from __future__ import annotations

import csv
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .backends import ClassifierBackend
from .embeddings import EmbeddingStore, cosine, encode_phrase
from .extract import ConceptPair, SentencePair, extract_concepts
from .graph import (
    CORE_RELATION_NAMES,
    RANDOM_LABEL,
    VAGUE_RELATION_NAMES,
    Concept,
    KnowledgeGraph,
    RelationType,
    Triple,
    normalize_concept,
    normalize_concept_text,
)
from .pathfind import ConnectResult, DirectLink, KnowledgePath, Verdict, direct_link_as_path

logger = logging.getLogger(__name__)

# Declared surface forms, not ground truth: only the Causes phrasing is fixed
# by convention, the rest are plain-English defaults. Article-agnostic on
# purpose ("dog is a animal").
REL_TEMPLATES: dict[str, str] = {
    "AtLocation": "{head} is found in {tail}",
    "Causes": "The effect of {head} is {tail}",
    "CapableOf": "{head} can {tail}",
    "IsA": "{head} is a {tail}",
    "HasPrerequisite": "{head} requires {tail}",
    "HasProperty": "{head} is {tail}",
    "HasSubevent": "{head} includes {tail}",
    "UsedFor": "{head} is used for {tail}",
    "CausesDesire": "{head} makes you want {tail}",
    "Desires": "{head} wants {tail}",
    "HasA": "{head} has {tail}",
    "MotivatedByGoal": "{head} is motivated by {tail}",
    "ReceivesAction": "{head} can be {tail}",
    "RelatedTo": "{head} is related to {tail}",
    "HasContext": "{head} is used in the context of {tail}",
    "PartOf": "{head} is part of {tail}",
}
assert all(name in REL_TEMPLATES for name in CORE_RELATION_NAMES)
assert all(name in REL_TEMPLATES for name in VAGUE_RELATION_NAMES)

SETTINGS = ("a", "b", "c")


class TemplateError(ValueError):
    """A hop uses a relation with no entry in the template table."""


class EvaluationInputError(ValueError):
    """The corpus lacks the reference data a setting needs."""


class AnnotationError(ValueError):
    """Malformed annotation file."""


class RandomClassError(RuntimeError):
    """The graph cannot supply enough distinct Random-class pairs."""


TripleLike = Triple | tuple


def _as_hop_triples(item) -> list[tuple[str, RelationType, str]]:
    """Normalize a path, a direct link, or a triple sequence to hop tuples."""
    if isinstance(item, KnowledgePath):
        return [(h.source.normalized, h.relation, h.target.normalized) for h in item.hops]
    if isinstance(item, DirectLink):
        return _as_hop_triples(direct_link_as_path(item))
    out = []
    for entry in item:
        if isinstance(entry, Triple):
            out.append((entry.head.normalized, entry.relation, entry.tail.normalized))
            continue
        head, rel, tail = entry
        if not isinstance(rel, RelationType):
            rel = RelationType(str(rel))
        head = head.normalized if isinstance(head, Concept) else normalize_concept_text(str(head))
        tail = tail.normalized if isinstance(tail, Concept) else normalize_concept_text(str(tail))
        out.append((head, rel, tail))
    return out


def templatize(item: KnowledgePath | DirectLink | Iterable[TripleLike]) -> str:
    """Render hops through the template table, joined by ". ".

    Inverted relations swap their arguments into the base template:
    (baking, UsedFor⁻¹, oven) renders as "oven is used for baking".
    """
    parts = []
    for head, rel, tail in _as_hop_triples(item):
        template = REL_TEMPLATES.get(rel.name)
        if template is None:
            raise TemplateError(f"no template for relation {rel.name!r}")
        if rel.inverted:
            head, tail = tail, head
        parts.append(template.format(head=head, tail=tail))
    return ". ".join(parts)


def linearize_triples(item: KnowledgePath | DirectLink | Iterable[TripleLike]) -> str:
    """Plain "head Relation tail" rendering, hops joined by ". ".

    Inverted hops are de-inverted first so the surface form is always a
    base-relation triple.
    """
    parts = []
    for head, rel, tail in _as_hop_triples(item):
        if rel.inverted:
            head, tail = tail, head
        parts.append(f"{head} {rel.name} {tail}")
    return ". ".join(parts)


def best_generation(result: ConnectResult) -> KnowledgePath | None:
    """The single generation a result stands behind: the top direct link as a
    one-hop path, the top multihop path, or None for Unconnected."""
    if result.verdict is Verdict.DIRECT:
        return direct_link_as_path(result.links[0])
    if result.verdict is Verdict.MULTIHOP:
        return result.paths[0]
    return None


def build_silver_paths(
    gold_sentence: str,
    vocab,
    clf: ClassifierBackend,
    threshold: float = 0.9,
) -> list[Triple]:
    """Relational encoding of a gold sentence: extract its concepts, classify
    every ordered concept pair, keep relations at or above the threshold,
    concatenated in sentence order."""
    mentions = extract_concepts(gold_sentence, vocab)
    concepts: list[Concept] = []
    seen: set[str] = set()
    for m in mentions:
        if m.node.normalized not in seen:
            seen.add(m.node.normalized)
            concepts.append(m.node)
    if len(concepts) < 2:
        logger.warning("silver path: %d concept(s) in %r, nothing to classify", len(concepts), gold_sentence)
        return []
    triples: list[Triple] = []
    for i, a in enumerate(concepts):
        for j, b in enumerate(concepts):
            if i == j:
                continue
            dist = clf.classify(ConceptPair(a, b))
            for name, prob in dist.above(threshold):
                triples.append(Triple(head=a, relation=RelationType(name), tail=b, weight=prob))
    return triples


def _clean_tokens(text: str) -> list[str]:
    out: list[str] = []
    for raw in text.split():
        norm = normalize_concept_text(raw)
        if norm:
            out.extend(norm.split())
    return out


def encode_and_cosim(generated: str, reference: str, emb: EmbeddingStore) -> float:
    """Cosine between the phrase encodings of two linearized strings."""
    g = encode_phrase(emb, " ".join(_clean_tokens(generated)))
    r = encode_phrase(emb, " ".join(_clean_tokens(reference)))
    return cosine(g, r)


@dataclass(frozen=True)
class TokenF1:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def token_match_f1(candidate: str, reference: str, emb: EmbeddingStore) -> TokenF1:
    """Greedy maximum-similarity token matching over static embeddings.

    Stopwords are retained. Identical tokens match at 1.0 even out of
    vocabulary; otherwise similarity is the embedding cosine (0 when either
    side is unknown). Empty token lists flag the result degenerate.
    """
    cand = _clean_tokens(candidate)
    ref = _clean_tokens(reference)
    if not cand or not ref:
        return TokenF1(0.0, 0.0, 0.0, degenerate=True)

    def sim(a: str, b: str) -> float:
        if a == b:
            return 1.0
        va = emb.table.get(a)
        vb = emb.table.get(b)
        if va is None or vb is None:
            return 0.0
        return cosine(va, vb)

    precision = sum(max(sim(c, r) for r in ref) for c in cand) / len(cand)
    recall = sum(max(sim(r, c) for c in cand) for r in ref) / len(ref)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return TokenF1(precision, recall, f1)


@dataclass(frozen=True)
class PrfReport:
    precision: float
    recall: float
    f1: float
    per_label: Mapping[str, tuple[float, float, float]]
    support: Mapping[str, int]


def _as_label_set(item) -> frozenset[str]:
    if isinstance(item, str):
        return frozenset((item,))
    return frozenset(item)


def weighted_prf(predictions: Sequence, gold: Sequence) -> PrfReport:
    """Per-label P/R/F1 aggregated with gold-support weights. Multi-label:
    each element may be a single label or a set of labels."""
    if len(predictions) != len(gold):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(gold)} gold")
    if not gold:
        raise ValueError("empty input")
    pred_sets = [_as_label_set(p) for p in predictions]
    gold_sets = [_as_label_set(g) for g in gold]
    labels = sorted(set().union(*pred_sets, *gold_sets))
    per_label: dict[str, tuple[float, float, float]] = {}
    support: dict[str, int] = {}
    for label in labels:
        tp = sum(1 for p, g in zip(pred_sets, gold_sets) if label in p and label in g)
        fp = sum(1 for p, g in zip(pred_sets, gold_sets) if label in p and label not in g)
        fn = sum(1 for p, g in zip(pred_sets, gold_sets) if label not in p and label in g)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        per_label[label] = (p, r, f1)
        support[label] = tp + fn
    total = sum(support.values())
    if total == 0:
        raise ValueError("gold labels are empty everywhere")
    wp = sum(per_label[l][0] * support[l] for l in labels) / total
    wr = sum(per_label[l][1] * support[l] for l in labels) / total
    wf = sum(per_label[l][2] * support[l] for l in labels) / total
    return PrfReport(precision=wp, recall=wr, f1=wf, per_label=per_label, support=support)


def hits_at_k(beams: Sequence[Sequence], gold: Sequence, k: int) -> float:
    """Fraction of instances whose gold target is in the top-k of its beam."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not gold:
        raise ValueError("empty input")
    if len(beams) != len(gold):
        raise ValueError(f"length mismatch: {len(beams)} beams vs {len(gold)} gold")

    def norm(x) -> str:
        return x.normalized if isinstance(x, Concept) else normalize_concept_text(str(x))

    hits = 0
    for beam, target in zip(beams, gold):
        wanted = norm(target)
        if any(norm(c) == wanted for c in list(beam)[:k]):
            hits += 1
    return hits / len(gold)


@dataclass(frozen=True)
class RandomPair:
    """A negative classification example: either an order-swapped positive
    ("opposite") or a positive with one side replaced ("corrupt")."""

    pair: ConceptPair
    kind: str
    label: str = RANDOM_LABEL

    def __post_init__(self) -> None:
        if self.kind not in ("opposite", "corrupt"):
            raise ValueError(f"unknown Random-pair kind {self.kind!r}")


def build_random_class(g: KnowledgeGraph, n: int, seed: int) -> list[RandomPair]:
    """n/2 opposite + n/2 corrupt pairs, seeded, without duplicates and with
    no overlap with the positive triple set (under any relation)."""
    if n < 0 or n % 2:
        raise ValueError(f"n must be even and non-negative, got {n}")
    if n == 0:
        return []
    triples = sorted(g.triples, key=lambda t: t.key)
    if not triples:
        raise RandomClassError("empty graph")
    positives = {(t.head.normalized, t.tail.normalized) for t in triples}
    by_relation: dict[str, tuple[list[Concept], list[Concept]]] = {}
    seen_h: dict[str, set[str]] = {}
    seen_t: dict[str, set[str]] = {}
    for t in triples:
        heads, tails = by_relation.setdefault(t.relation.name, ([], []))
        if t.head.normalized not in seen_h.setdefault(t.relation.name, set()):
            seen_h[t.relation.name].add(t.head.normalized)
            heads.append(t.head)
        if t.tail.normalized not in seen_t.setdefault(t.relation.name, set()):
            seen_t[t.relation.name].add(t.tail.normalized)
            tails.append(t.tail)

    rng = random.Random(seed)
    chosen: set[tuple[str, str]] = set()
    out: list[RandomPair] = []
    budget = 1000 * n + 1000

    def take(kind: str, c_s: Concept, c_t: Concept) -> bool:
        key = (c_s.normalized, c_t.normalized)
        if key[0] == key[1] or key in positives or key in chosen:
            return False
        chosen.add(key)
        out.append(RandomPair(pair=ConceptPair(c_s, c_t), kind=kind))
        return True

    for kind, quota in (("opposite", n // 2), ("corrupt", n // 2)):
        made = 0
        while made < quota:
            budget -= 1
            if budget <= 0:
                raise RandomClassError(
                    f"graph too small to build {n} distinct Random pairs (stuck on {kind})"
                )
            tri = rng.choice(triples)
            if kind == "opposite":
                if take("opposite", tri.tail, tri.head):
                    made += 1
                continue
            heads, tails = by_relation[tri.relation.name]
            if rng.random() < 0.5:
                repl = rng.choice(heads)
                ok = take("corrupt", repl, tri.tail)
            else:
                repl = rng.choice(tails)
                ok = take("corrupt", tri.head, repl)
            if ok:
                made += 1
    return out


def cohens_kappa(a1: Sequence[str], a2: Sequence[str]) -> float:
    """κ = (p_o − p_e)/(1 − p_e); 1.0 in the single-label degenerate case."""
    if len(a1) != len(a2):
        raise ValueError(f"length mismatch: {len(a1)} vs {len(a2)}")
    if not a1:
        raise ValueError("empty label lists")
    n = len(a1)
    p_o = sum(1 for x, y in zip(a1, a2) if x == y) / n
    labels = set(a1) | set(a2)
    p_e = sum((list(a1).count(l) / n) * (list(a2).count(l) / n) for l in labels)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's judgement of one generated item."""

    item_id: str
    relevance: int
    implicit: str
    best_model: str
    annotator: str

    def __post_init__(self) -> None:
        if self.relevance not in (-2, -1, 0, 1, 2):
            raise ValueError(f"relevance must be in -2..2, got {self.relevance}")
        if self.implicit not in ("yes", "no"):
            raise ValueError(f"implicit must be yes|no, got {self.implicit!r}")
        if not self.item_id or not self.annotator:
            raise ValueError("item_id and annotator must be non-empty")


_ANNOTATION_FIELDS = ("item_id", "relevance", "implicit", "best_model", "annotator")


def load_annotations(lines: Iterable[str]) -> list[AnnotationRecord]:
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise AnnotationError("empty annotation file")
    missing = [f for f in _ANNOTATION_FIELDS if f not in reader.fieldnames]
    if missing:
        raise AnnotationError(f"missing columns: {', '.join(missing)}")
    records: list[AnnotationRecord] = []
    seen: set[tuple[str, str]] = set()
    for i, row in enumerate(reader, start=2):
        try:
            rec = AnnotationRecord(
                item_id=row["item_id"].strip(),
                relevance=int(row["relevance"]),
                implicit=row["implicit"].strip().lower(),
                best_model=row["best_model"].strip(),
                annotator=row["annotator"].strip(),
            )
        except ValueError as exc:
            raise AnnotationError(f"line {i}: {exc}") from exc
        key = (rec.item_id, rec.annotator)
        if key in seen:
            raise AnnotationError(f"line {i}: duplicate record for item {rec.item_id!r} by {rec.annotator!r}")
        seen.add(key)
        records.append(rec)
    return records


def load_annotations_file(path) -> list[AnnotationRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_annotations(fh)


def annotation_agreement(records: Sequence[AnnotationRecord], question: str) -> float:
    """Cohen's kappa between exactly two annotators on one question."""
    if question not in ("relevance", "implicit", "best_model"):
        raise ValueError(f"unknown question {question!r}")
    annotators = sorted({r.annotator for r in records})
    if len(annotators) != 2:
        raise AnnotationError(f"need exactly 2 annotators, got {len(annotators)}")
    a, b = annotators
    by_item: dict[str, dict[str, str]] = {}
    for r in records:
        by_item.setdefault(r.item_id, {})[r.annotator] = str(getattr(r, question))
    shared = sorted(item for item, who in by_item.items() if a in who and b in who)
    if not shared:
        raise AnnotationError("no items annotated by both annotators")
    return cohens_kappa([by_item[i][a] for i in shared], [by_item[i][b] for i in shared])


@dataclass(frozen=True)
class MetricReport:
    """Mean scores for one method under one evaluation setting."""

    setting: str
    cosim: float | None
    token_precision: float | None
    token_recall: float | None
    token_f1: float | None
    pairs_scored: int
    pairs_skipped: int


def score_results(
    results: Sequence[tuple[str, str, ConnectResult]],
    corpus: Mapping[str, SentencePair],
    setting: str,
    emb: EmbeddingStore,
    vocab=None,
    clf: ClassifierBackend | None = None,
    threshold: float = 0.9,
) -> MetricReport:
    """Score generations against references.

    Setting "a" linearizes generated paths against silver paths built from the
    gold implicit sentence, "b" templatizes generations against the gold
    sentence as free text, "c" linearizes against the gold reference path.
    Unconnected results produce nothing to score and are counted as skipped.
    """
    if setting not in SETTINGS:
        raise ValueError(f"setting must be one of {SETTINGS}, got {setting!r}")
    if setting == "a" and (vocab is None or clf is None):
        raise ValueError("setting 'a' needs a vocabulary and a classifier to build silver paths")
    cosims: list[float] = []
    f1s: list[TokenF1] = []
    skipped = 0
    for pair_id, sentence_id, result in results:
        sp = corpus.get(sentence_id)
        if sp is None:
            raise EvaluationInputError(f"result {pair_id!r} references unknown sentence pair {sentence_id!r}")
        generated = best_generation(result)
        if generated is None:
            skipped += 1
            continue
        if setting in ("a", "b"):
            if sp.gold_implicit is None:
                raise EvaluationInputError(f"sentence pair {sentence_id!r} has no gold implicit sentence")
        if setting == "c" and sp.gold_path is None:
            raise EvaluationInputError(f"sentence pair {sentence_id!r} has no gold reference path")
        if setting == "a":
            silver = build_silver_paths(sp.gold_implicit, vocab, clf, threshold)
            gen_text = linearize_triples(generated)
            ref_text = linearize_triples(silver)
        elif setting == "b":
            gen_text = templatize(generated)
            ref_text = sp.gold_implicit
        else:
            gen_text = linearize_triples(generated)
            ref_text = linearize_triples(list(sp.gold_path))
        cosims.append(encode_and_cosim(gen_text, ref_text, emb))
        f1s.append(token_match_f1(gen_text, ref_text, emb))
    if not cosims:
        return MetricReport(setting, None, None, None, None, 0, skipped)
    k = len(cosims)
    return MetricReport(
        setting=setting,
        cosim=sum(cosims) / k,
        token_precision=sum(t.precision for t in f1s) / k,
        token_recall=sum(t.recall for t in f1s) / k,
        token_f1=sum(t.f1 for t in f1s) / k,
        pairs_scored=k,
        pairs_skipped=skipped,
    )


@dataclass(frozen=True)
class CorpusStats:
    """Connectivity statistics over one or more result sets."""

    total_pairs: Mapping[str, int]
    linked_pairs: Mapping[str, int]
    avg_hops: Mapping[str, float | None]
    relation_histogram: Mapping[str, float] = field(default_factory=dict)


def corpus_stats(results_by_method: Mapping[str, Sequence[ConnectResult]]) -> CorpusStats:
    """Linked-pair counts and hop averages per method; Direct counts as one
    hop, Multihop as the hop count of its best path. The relation histogram
    pools the base relation names of all emitted links and hops."""
    total: dict[str, int] = {}
    linked: dict[str, int] = {}
    avg: dict[str, float | None] = {}
    counts: dict[str, int] = {}
    for method, results in results_by_method.items():
        total[method] = len(results)
        hops: list[int] = []
        for r in results:
            if r.verdict is Verdict.DIRECT:
                hops.append(1)
                for link in r.links:
                    counts[link.relation.name] = counts.get(link.relation.name, 0) + 1
            elif r.verdict is Verdict.MULTIHOP:
                hops.append(len(r.paths[0].hops))
                for path in r.paths:
                    for hop in path.hops:
                        counts[hop.relation.name] = counts.get(hop.relation.name, 0) + 1
        linked[method] = len(hops)
        avg[method] = sum(hops) / len(hops) if hops else None
    grand = sum(counts.values())
    histogram = {name: counts[name] / grand for name in sorted(counts)} if grand else {}
    return CorpusStats(
        total_pairs=total,
        linked_pairs=linked,
        avg_hops=avg,
        relation_histogram=histogram,
    )
