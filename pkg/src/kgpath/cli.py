"""Command-line pipeline: connect, baseline, evaluate, stats, random-class.

Configuration comes from a plain key=value file overridable by flags (flags
win). Work is spread over a thread pool per sentence pair; output records are
assembled in input order, so runs are byte-identical for any worker count.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .backends import (
    BackendError,
    ClassifierBackend,
    GeneratorBackend,
    KGOracleClassifier,
    KGOracleGenerator,
    RemoteClassifier,
    RemoteConfig,
    RemoteGenerator,
    RemoteSession,
)
from .baseline import SubgraphError, build_subgraph, rank_paths, replace_vague, score_nodes
from .embeddings import (
    DEFAULT_STOPWORDS,
    EmbeddingLoadError,
    EmbeddingStore,
    load_embeddings_file,
    load_stopwords,
)
from .evaluate import (
    AnnotationError,
    EvaluationInputError,
    RandomClassError,
    TemplateError,
    build_random_class,
    corpus_stats,
    score_results,
)
from .extract import (
    ConceptMention,
    ConceptPair,
    CorpusError,
    SentencePair,
    extract_concepts,
    load_corpus_file,
    load_pre_extracted,
    pair_concepts,
)
from .graph import (
    GraphLoadError,
    InverseClosureError,
    KnowledgeGraph,
    RelationInventory,
    load_graph_file,
)
from .pathfind import (
    ChainParams,
    ConnectResult,
    PairBackendError,
    Verdict,
    chain,
    combine,
    link_direct,
    result_from_record,
    result_to_record,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Bad or missing run configuration."""


@dataclass
class RunConfig:
    """Resolved settings for one command invocation."""

    graph: str | None = None
    embeddings: str | None = None
    corpus: str | None = None
    relations: str | None = None
    stopwords: str | None = None
    pre_extracted: str | None = None
    backend: str = "oracle"
    remote_url: str | None = None
    threshold: float = 0.9
    beam: int = 10
    sim_gate: float = 0.7
    terminate: float = 0.95
    max_hops: int = 3
    top_k: int = 1
    replace_vague: bool = False
    seed: int = 0
    workers: int = 1
    out: str | None = None

    def validate(self, required: Sequence[str] = ()) -> None:
        for name in required:
            if getattr(self, name) is None:
                flag = "--" + name.replace("_", "-")
                raise ConfigError(f"{flag} is required")
        for name in ("graph", "embeddings", "corpus", "relations", "stopwords", "pre_extracted"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name} file not found: {value}")
        if not (0.0 < self.threshold <= 1.0):
            raise ConfigError(f"threshold out of (0,1]: {self.threshold}")
        if self.backend not in ("oracle", "remote"):
            raise ConfigError(f"backend must be oracle or remote, got {self.backend!r}")
        if self.backend == "remote" and not self.remote_url:
            raise ConfigError("--remote-url is required with --backend remote")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.top_k < 1:
            raise ConfigError(f"top-k must be >= 1, got {self.top_k}")


_BOOL_VALUES = {"true": True, "yes": True, "1": True, "on": True,
                "false": False, "no": False, "0": False, "off": False}

_CONFIG_TYPES: dict[str, Callable] = {
    "threshold": float,
    "sim_gate": float,
    "terminate": float,
    "beam": int,
    "max_hops": int,
    "top_k": int,
    "seed": int,
    "workers": int,
    "replace_vague": lambda s: _BOOL_VALUES[s.strip().lower()],
}


def load_config_lines(lines: Iterable[str]) -> dict:
    """Parse key=value lines; # starts a comment."""
    out: dict = {}
    fields = {f for f in RunConfig.__dataclass_fields__}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in fields:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        convert = _CONFIG_TYPES.get(key, str)
        try:
            out[key] = convert(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {value!r}") from exc
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Hard defaults, then the config file, then explicit flags."""
    cfg = RunConfig()
    config_path = getattr(args, "config", None)
    if config_path:
        if not Path(config_path).exists():
            raise ConfigError(f"config file not found: {config_path}")
        with open(config_path, encoding="utf-8") as fh:
            for key, value in load_config_lines(fh).items():
                setattr(cfg, key, value)
    for name in RunConfig.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def _load_inventory(cfg: RunConfig) -> RelationInventory:
    if cfg.relations:
        return RelationInventory.from_file(cfg.relations)
    # superset default so CN-style graphs with vague relations load everywhere
    return RelationInventory.baseline()


def _load_graph(cfg: RunConfig) -> KnowledgeGraph:
    return load_graph_file(cfg.graph, _load_inventory(cfg))


def _load_embeddings(cfg: RunConfig) -> EmbeddingStore:
    stop = load_stopwords(cfg.stopwords) if cfg.stopwords else DEFAULT_STOPWORDS
    return load_embeddings_file(cfg.embeddings, stopwords=stop)


def _make_backends(cfg: RunConfig, g: KnowledgeGraph) -> tuple[ClassifierBackend, GeneratorBackend]:
    if cfg.backend == "oracle":
        return KGOracleClassifier(g), KGOracleGenerator(g)
    remote = RemoteConfig(
        base_url=cfg.remote_url,
        max_concurrent=max(cfg.workers, 1),
        relation_names=tuple(g.inventory.names),
    )
    session = RemoteSession(remote)
    return RemoteClassifier(session), RemoteGenerator(session)


def _mentions_for(
    cfg: RunConfig, corpus: Sequence[SentencePair], g: KnowledgeGraph
) -> dict[str, tuple[list[ConceptMention], list[ConceptMention]]]:
    if cfg.pre_extracted:
        with open(cfg.pre_extracted, encoding="utf-8") as fh:
            table, dropped = load_pre_extracted(fh, corpus, g)
        if dropped:
            logger.warning("%d pre-extracted concept(s) not in the graph vocabulary", dropped)
        missing = [p.id for p in corpus if p.id not in table]
        if missing:
            raise CorpusError(f"pre-extracted file lacks entries for: {', '.join(missing[:5])}")
        return table
    return {
        p.id: (extract_concepts(p.s1, g), extract_concepts(p.s2, g))
        for p in corpus
    }


def _pair_ids(sp: SentencePair, pairs: Sequence[ConceptPair]) -> list[str]:
    return [f"{sp.id}#{i}" for i in range(len(pairs))]


def _write_results(
    cfg: RunConfig,
    method: str,
    rows: Sequence[tuple[str, str, ConnectResult]],
    failures: Sequence[dict],
) -> int:
    out = Path(cfg.out)
    with open(out, "w", encoding="utf-8") as fh:
        for pair_id, sentence_id, result in rows:
            fh.write(json.dumps(result_to_record(result, pair_id, sentence_id), sort_keys=True))
            fh.write("\n")
    stats = corpus_stats({method: [r for _pid, _sid, r in rows]})
    with open(f"{out}.stats.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(stats), fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info("wrote %d result(s) to %s", len(rows), out)
    if failures:
        with open(f"{out}.failures.json", "w", encoding="utf-8") as fh:
            json.dump(list(failures), fh, indent=2, sort_keys=True)
            fh.write("\n")
        logger.error("%d pair(s) failed; see %s.failures.json", len(failures), out)
        return 1
    return 0


def cmd_connect(args: argparse.Namespace) -> int:
    """End-to-end run: extract, link directly, chain, combine, write JSONL."""
    cfg = resolve_config(args)
    cfg.validate(required=("graph", "embeddings", "corpus", "out"))
    g = _load_graph(cfg)
    emb = _load_embeddings(cfg)
    corpus = load_corpus_file(cfg.corpus)
    clf, gen = _make_backends(cfg, g)
    params = ChainParams(
        beam=cfg.beam,
        sim_gate=cfg.sim_gate,
        terminate=cfg.terminate,
        max_hops=cfg.max_hops,
    )
    mentions = _mentions_for(cfg, corpus, g)

    def process(sp: SentencePair) -> tuple[list[tuple[str, str, ConnectResult]], list[dict]]:
        m1, m2 = mentions[sp.id]
        pairs = pair_concepts(m1, m2)
        rows: list[tuple[str, str, ConnectResult]] = []
        failures: list[dict] = []
        for pair_id, pair in zip(_pair_ids(sp, pairs), pairs):
            try:
                direct = link_direct([pair], clf, cfg.threshold)[pair]
                paths = chain(pair, gen, emb, params)
                result = combine(pair, direct, paths, top_k=cfg.top_k)
            except PairBackendError as exc:
                failures.append(
                    {
                        "pair_id": pair_id,
                        "sentence_id": sp.id,
                        "c_s": pair.c_s.normalized,
                        "c_t": pair.c_t.normalized,
                        "error": str(exc),
                    }
                )
                continue
            rows.append((pair_id, sp.id, result))
        return rows, failures

    all_rows: list[tuple[str, str, ConnectResult]] = []
    all_failures: list[dict] = []
    if cfg.workers == 1:
        chunks = [process(sp) for sp in corpus]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(process, corpus))
    for rows, failures in chunks:
        all_rows.extend(rows)
        all_failures.extend(failures)
    return _write_results(cfg, "connect", all_rows, all_failures)


def cmd_baseline(args: argparse.Namespace) -> int:
    """Static shortest-path baseline over the graph, same output schema."""
    cfg = resolve_config(args)
    cfg.validate(required=("graph", "corpus", "out"))
    g = _load_graph(cfg)
    corpus = load_corpus_file(cfg.corpus)
    clf = None
    if cfg.replace_vague:
        clf, _gen = _make_backends(cfg, g)
    mentions = _mentions_for(cfg, corpus, g)

    def process(sp: SentencePair) -> tuple[list[tuple[str, str, ConnectResult]], list[dict]]:
        m1, m2 = mentions[sp.id]
        pairs = pair_concepts(m1, m2)
        ids = _pair_ids(sp, pairs)
        rows: list[tuple[str, str, ConnectResult]] = []
        failures: list[dict] = []
        seeds: list = []
        seen: set[str] = set()
        for m in list(m1) + list(m2):
            if m.node.normalized not in seen:
                seen.add(m.node.normalized)
                seeds.append(m.node)
        sub = scores = None
        if seeds:
            try:
                sub = build_subgraph(g, seeds)
                scores = score_nodes(sub)
            except SubgraphError as exc:
                logger.warning("pair %s: %s; reporting Unconnected", sp.id, exc)
        for pair_id, pair in zip(ids, pairs):
            paths = []
            if sub is not None:
                try:
                    paths = rank_paths(sub, pair, scores, max_hops=cfg.max_hops, top_k=cfg.top_k)
                except SubgraphError as exc:
                    logger.warning("pair %s: %s; reporting Unconnected", pair_id, exc)
            if paths and cfg.replace_vague:
                try:
                    paths = replace_vague(paths, clf, cfg.threshold)
                except BackendError as exc:
                    failures.append(
                        {
                            "pair_id": pair_id,
                            "sentence_id": sp.id,
                            "c_s": pair.c_s.normalized,
                            "c_t": pair.c_t.normalized,
                            "error": str(exc),
                        }
                    )
                    continue
            rows.append((pair_id, sp.id, combine(pair, [], paths, top_k=cfg.top_k)))
        return rows, failures

    all_rows: list[tuple[str, str, ConnectResult]] = []
    all_failures: list[dict] = []
    if cfg.workers == 1:
        chunks = [process(sp) for sp in corpus]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(process, corpus))
    for rows, failures in chunks:
        all_rows.extend(rows)
        all_failures.extend(failures)
    return _write_results(cfg, "baseline", all_rows, all_failures)


def _load_results_arg(values: Sequence[str]) -> dict[str, list[tuple[str, str, ConnectResult]]]:
    out: dict[str, list[tuple[str, str, ConnectResult]]] = {}
    for value in values:
        if "=" not in value:
            raise ConfigError(f"--results expects NAME=PATH, got {value!r}")
        name, path = value.split("=", 1)
        if not name or not path:
            raise ConfigError(f"--results expects NAME=PATH, got {value!r}")
        if name in out:
            raise ConfigError(f"duplicate results name {name!r}")
        if not Path(path).exists():
            raise ConfigError(f"results file not found: {path}")
        rows: list[tuple[str, str, ConnectResult]] = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rows.append(result_from_record(json.loads(line)))
                except (json.JSONDecodeError, KeyError, ValueError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad result record: {exc}") from exc
        out[name] = rows
    return out


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Score result files against a reference encoding (setting a, b, or c)."""
    cfg = resolve_config(args)
    cfg.validate(required=("embeddings", "corpus"))
    results = _load_results_arg(args.results)
    corpus = {p.id: p for p in load_corpus_file(cfg.corpus)}
    emb = _load_embeddings(cfg)
    vocab = clf = None
    if args.setting == "a":
        cfg.validate(required=("graph",))
        vocab = _load_graph(cfg)
        clf, _gen = _make_backends(cfg, vocab)
    report = {"setting": args.setting, "methods": {}}
    for name, rows in results.items():
        metrics = score_results(
            rows, corpus, args.setting, emb, vocab=vocab, clf=clf, threshold=cfg.threshold
        )
        report["methods"][name] = asdict(metrics)
    text = json.dumps(report, indent=2, sort_keys=True)
    if cfg.out:
        Path(cfg.out).write_text(text + "\n", encoding="utf-8")
        logger.info("wrote report to %s", cfg.out)
    else:
        print(text)
    return 0


def _stats_table(stats_dict: dict) -> str:
    methods = sorted(stats_dict["total_pairs"])
    rows = [
        ("total pairs", lambda m: str(stats_dict["total_pairs"][m])),
        ("linked pairs", lambda m: str(stats_dict["linked_pairs"][m])),
        (
            "avg hops",
            lambda m: "-"
            if stats_dict["avg_hops"][m] is None
            else f"{stats_dict['avg_hops'][m]:.2f}",
        ),
    ]
    label_w = max(len(r[0]) for r in rows)
    col_w = {m: max(len(m), 8) for m in methods}
    lines = [" " * label_w + "  " + "  ".join(m.rjust(col_w[m]) for m in methods)]
    for label, cell in rows:
        lines.append(label.ljust(label_w) + "  " + "  ".join(cell(m).rjust(col_w[m]) for m in methods))
    hist = stats_dict["relation_histogram"]
    if hist:
        lines.append("")
        lines.append("relation distribution")
        name_w = max(len(n) for n in hist)
        for name in sorted(hist, key=lambda n: (-hist[n], n)):
            lines.append(f"  {name.ljust(name_w)}  {hist[name] * 100:5.1f}%")
    return "\n".join(lines) + "\n"


def cmd_stats(args: argparse.Namespace) -> int:
    """Connectivity statistics over one or more result files."""
    cfg = resolve_config(args)
    results = _load_results_arg(args.results)
    stats = corpus_stats({name: [r for _p, _s, r in rows] for name, rows in results.items()})
    stats_dict = asdict(stats)
    table = _stats_table(stats_dict)
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(stats_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        Path(cfg.out + ".txt").write_text(table, encoding="utf-8")
        logger.info("wrote stats to %s and %s.txt", cfg.out, cfg.out)
    sys.stdout.write(table)
    return 0


def cmd_random_class(args: argparse.Namespace) -> int:
    """Sample a Random-class dataset from the graph's positive triples."""
    cfg = resolve_config(args)
    cfg.validate(required=("graph", "out"))
    if args.n is None:
        raise ConfigError("--n is required")
    g = _load_graph(cfg)
    pairs = build_random_class(g, args.n, cfg.seed)
    with open(cfg.out, "w", encoding="utf-8") as fh:
        for rp in pairs:
            record = {
                "head": rp.pair.c_s.normalized,
                "tail": rp.pair.c_t.normalized,
                "label": rp.label,
                "kind": rp.kind,
            }
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")
    logger.info("wrote %d Random pair(s) to %s", len(pairs), cfg.out)
    return 0


def _add_io_flags(p: argparse.ArgumentParser, *, corpus: bool = True) -> None:
    p.add_argument("--config", help="key=value defaults file; explicit flags win")
    p.add_argument("--graph", help="knowledge graph TSV: relation<TAB>head<TAB>tail[<TAB>weight]")
    p.add_argument("--embeddings", help="word vectors, text format with 'count dim' header")
    p.add_argument("--relations", help="relation inventory file, one name per line")
    p.add_argument("--stopwords", help="stopword list, one word per line")
    if corpus:
        p.add_argument("--corpus", help="sentence-pair corpus JSONL")
    p.add_argument("--out", help="output path")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("oracle", "remote"), help="model backend (default oracle)")
    p.add_argument("--remote-url", dest="remote_url", help="base URL of the model service")
    p.add_argument("--threshold", type=float, help="direct-link probability threshold (default 0.9)")
    p.add_argument("--workers", type=int, help="worker threads over sentence pairs (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgpath",
        description="Connect sentence pairs through knowledge-graph relation paths.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("connect", help="classifier + generator pipeline over a corpus")
    _add_io_flags(p)
    _add_backend_flags(p)
    p.add_argument("--beam", type=int, help="generator beam width (default 10)")
    p.add_argument("--sim-gate", dest="sim_gate", type=float, help="frontier similarity gate (default 0.7)")
    p.add_argument("--terminate", type=float, help="termination similarity (default 0.95)")
    p.add_argument("--max-hops", dest="max_hops", type=int, help="path length cap (default 3)")
    p.add_argument("--top-k", dest="top_k", type=int, help="paths kept per pair (default 1)")
    p.add_argument("--pre-extracted", dest="pre_extracted", help="pre-extracted concepts JSONL")
    p.set_defaults(func=cmd_connect)

    p = sub.add_parser("baseline", help="static shortest-path baseline")
    _add_io_flags(p)
    _add_backend_flags(p)
    p.add_argument("--max-hops", dest="max_hops", type=int, help="path length cap (default 3)")
    p.add_argument("--top-k", dest="top_k", type=int, help="paths kept per pair (default 1)")
    p.add_argument("--pre-extracted", dest="pre_extracted", help="pre-extracted concepts JSONL")
    p.add_argument(
        "--replace-vague",
        dest="replace_vague",
        action="store_const",
        const=True,
        help="relabel RelatedTo/HasContext hops with the classifier",
    )
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="score result files against references")
    _add_io_flags(p)
    _add_backend_flags(p)
    p.add_argument("--setting", choices=("a", "b", "c"), required=True,
                   help="a: vs silver paths, b: NL vs gold sentence, c: vs gold paths")
    p.add_argument("--results", action="append", required=True, metavar="NAME=PATH",
                   help="result JSONL to score; repeatable")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="corpus connectivity statistics")
    p.add_argument("--config", help="key=value defaults file; explicit flags win")
    p.add_argument("--results", action="append", required=True, metavar="NAME=PATH",
                   help="result JSONL to aggregate; repeatable")
    p.add_argument("--out", help="stats JSON path (table goes to stdout and OUT.txt)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("random-class", help="sample Random-class negative pairs")
    _add_io_flags(p, corpus=False)
    p.add_argument("--n", type=int, help="number of pairs (even)")
    p.set_defaults(func=cmd_random_class)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EvaluationInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (
        ConfigError,
        GraphLoadError,
        InverseClosureError,
        EmbeddingLoadError,
        CorpusError,
        AnnotationError,
        RandomClassError,
        TemplateError,
        SubgraphError,
        BackendError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
