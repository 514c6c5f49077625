"""The models behind the endpoints: graph-backed stubs and checkpoint adapters.

Stub mode is the fully supported path — bit-deterministic, no neural stack
imported. The checkpoint adapters load whatever compatible externally-trained
weights the deployment provides, lazily, on the first request that needs
them, so stub deployments never pay for the import.
"""
from __future__ import annotations

import logging
import math
import threading
from collections import Counter

from .graphstore import RANDOM_LABEL, TripleTable, normalize

logger = logging.getLogger(__name__)


class ModelError(Exception):
    """Inference-side failure; the HTTP layer maps it to 503."""


class StubClassifier:
    """Exact-lookup classifier over a triple table.

    A relation scores 1.0 iff the (head, relation, tail) triple is in the
    table (multi-label); Random scores 1.0 iff nothing else does.
    """

    def __init__(self, table: TripleTable):
        self._table = table
        self.labels = tuple(table.relations) + (RANDOM_LABEL,)

    def classify(self, head: str, tail: str) -> dict[str, float]:
        scores: dict[str, float] = {}
        hit = False
        for name in self._table.relations:
            present = self._table.has(head, name, tail)
            scores[name] = 1.0 if present else 0.0
            hit = hit or present
        scores[RANDOM_LABEL] = 0.0 if hit else 1.0
        return scores


class StubGenerator:
    """Graph-neighbor generator.

    Confidence is the edge weight normalized by the best weight in the
    returned beam, so the top target always scores 1.0. Relations the table
    has never seen simply have no neighbors.
    """

    def __init__(self, table: TripleTable):
        self._table = table

    def generate(self, source: str, relation: str, inverted: bool, beam: int) -> list[dict]:
        top = self._table.neighbors(source, relation, inverted)[:beam]
        if not top:
            return []
        max_w = top[0][1]
        return [
            {"concept": c, "confidence": (w / max_w if max_w > 0 else 0.0)}
            for c, w in top
        ]


def _tokens(text: str) -> list[str]:
    # normalize chunk-wise so "bone." matches "bone"; an underscore compound
    # splits into its words
    return [t for chunk in text.split() for t in normalize(chunk).split()]


def token_match_scores(candidate: str, reference: str) -> tuple[float, float, float]:
    """Greedy exact-token matching precision/recall/F1.

    Deterministic; identical strings score exactly 1.0. Raises ValueError
    when either side has no scoreable tokens.
    """
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand:
        raise ValueError("candidate has no scoreable tokens")
    if not ref:
        raise ValueError("reference has no scoreable tokens")
    matched = sum((Counter(cand) & Counter(ref)).values())
    precision = matched / len(cand)
    recall = matched / len(ref)
    f1 = 0.0 if matched == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def _neural_stack():
    try:
        import torch
        from transformers import (
            AutoModelForCausalLM,
            AutoModelForSequenceClassification,
            AutoTokenizer,
        )
    except ImportError as exc:
        raise ModelError("checkpoint mode needs the [models] extra (torch + transformers)") from exc
    return torch, AutoTokenizer, AutoModelForSequenceClassification, AutoModelForCausalLM


class CheckpointClassifier:
    """Sequence-pair classifier loaded from an externally trained checkpoint.

    Expects a sequence-classification model whose id2label covers the relation
    inventory plus Random; per-label scores are independent sigmoids. Loading
    happens on the first request and is retried after failures, so a bad path
    degrades to 503 responses instead of refusing to boot.
    """

    def __init__(self, path: str, labels: tuple[str, ...]):
        self._path = path
        self.labels = labels
        self._lock = threading.Lock()
        self._loaded = None

    def _load(self):
        with self._lock:
            if self._loaded is None:
                torch, auto_tokenizer, auto_classifier, _ = _neural_stack()
                try:
                    tokenizer = auto_tokenizer.from_pretrained(self._path)
                    model = auto_classifier.from_pretrained(self._path)
                except Exception as exc:
                    raise ModelError(f"classifier checkpoint failed to load: {exc}") from exc
                model.eval()
                id2label = {int(i): l for i, l in model.config.id2label.items()}
                missing = sorted(set(self.labels) - set(id2label.values()))
                if missing:
                    raise ModelError(f"checkpoint does not score labels: {missing}")
                logger.info("loaded classifier checkpoint %s", self._path)
                self._loaded = (torch, tokenizer, model, id2label)
            return self._loaded

    def classify(self, head: str, tail: str) -> dict[str, float]:
        torch, tokenizer, model, id2label = self._load()
        try:
            with torch.no_grad():
                enc = tokenizer(head, tail, return_tensors="pt", truncation=True)
                probs = torch.sigmoid(model(**enc).logits[0]).tolist()
        except Exception as exc:
            raise ModelError(f"classifier inference failed: {exc}") from exc
        by_label = {id2label[i]: float(p) for i, p in enumerate(probs) if i in id2label}
        return {l: min(1.0, max(0.0, by_label[l])) for l in self.labels}


class CheckpointGenerator:
    """Beam-search target generator loaded from an externally trained checkpoint.

    Prompts follow the ``{source} {Relation} [GEN]`` convention; inverted
    queries append ⁻¹ to the relation token, which only helps with checkpoints
    trained on inverse pairs. Confidences are beam log-scores rescaled so the
    best surviving sequence gets 1.0.
    """

    def __init__(self, path: str):
        self._path = path
        self._lock = threading.Lock()
        self._loaded = None

    def _load(self):
        with self._lock:
            if self._loaded is None:
                torch, auto_tokenizer, _, auto_lm = _neural_stack()
                try:
                    tokenizer = auto_tokenizer.from_pretrained(self._path)
                    model = auto_lm.from_pretrained(self._path)
                except Exception as exc:
                    raise ModelError(f"generator checkpoint failed to load: {exc}") from exc
                model.eval()
                logger.info("loaded generator checkpoint %s", self._path)
                self._loaded = (torch, tokenizer, model)
            return self._loaded

    def generate(self, source: str, relation: str, inverted: bool, beam: int) -> list[dict]:
        torch, tokenizer, model = self._load()
        marker = relation + ("⁻¹" if inverted else "")
        try:
            with torch.no_grad():
                enc = tokenizer(f"{source} {marker} [GEN]", return_tensors="pt")
                out = model.generate(
                    **enc,
                    num_beams=beam,
                    num_return_sequences=beam,
                    max_new_tokens=16,
                    output_scores=True,
                    return_dict_in_generate=True,
                    early_stopping=True,
                )
        except Exception as exc:
            raise ModelError(f"generator inference failed: {exc}") from exc
        prompt_len = enc["input_ids"].shape[1]
        scored = sorted(
            zip(out.sequences, out.sequences_scores.tolist()), key=lambda pair: -pair[1]
        )
        src = normalize(source)
        best: float | None = None
        targets: list[dict] = []
        seen: set[str] = set()
        for seq, score in scored:
            concept = normalize(tokenizer.decode(seq[prompt_len:], skip_special_tokens=True))
            if not concept or concept == src or concept in seen:
                continue
            seen.add(concept)
            if best is None:
                best = score
            targets.append({"concept": concept, "confidence": math.exp(score - best)})
        return targets[:beam]
