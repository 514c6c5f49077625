"""Generate a synthetic graph + embeddings + corpus for pipeline experiments.

The graph is random over the core relation inventory; embeddings are noisy
one-hot cluster vectors, so some concept pairs are genuinely similar and
forward chaining has something to find. Sentences mention two sampled
concepts each, giving the extractor real work.

Usage:
    python scripts/make_synthetic_data.py --out-dir data/ --nodes 80 --triples 400
"""
import argparse
import json
import random
from pathlib import Path

from kgpath.graph import CORE_RELATION_NAMES

DIM = 16
CLUSTERS = 4

SENTENCE_SHAPES = [
    ("Everyone kept talking about the {a}.", "Nobody expected the {b} to matter."),
    ("The {a} sat in the corner all week.", "A {b} would have changed everything."),
    ("She wrote a long note about the {a}.", "He answered with a story about the {b}."),
]


def write_graph(path: Path, rng: random.Random, names: list[str], n_triples: int) -> set[tuple[str, str]]:
    seen: set[tuple[str, str, str]] = set()
    mentioned: set[tuple[str, str]] = set()
    with open(path, "w", encoding="utf-8") as fh:
        while len(seen) < n_triples:
            head, tail = rng.sample(names, 2)
            rel = rng.choice(CORE_RELATION_NAMES)
            key = (rel, head, tail)
            if key in seen:
                continue
            seen.add(key)
            mentioned.add((head, tail))
            weight = round(rng.uniform(0.5, 2.0), 3)
            fh.write(f"{rel}\t{head}\t{tail}\t{weight}\n")
    return mentioned


def write_embeddings(path: Path, rng: random.Random, names: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(names)} {DIM}\n")
        for name in names:
            center = [0.0] * DIM
            center[rng.randrange(CLUSTERS)] = 1.0
            # keep some words tightly clustered so chains can actually
            # terminate (cosine above 0.95 needs near-identical vectors)
            sigma = rng.uniform(0.02, 0.25)
            vec = [c + rng.gauss(0.0, sigma) for c in center]
            fh.write(name + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


def write_corpus(
    path: Path, rng: random.Random, names: list[str], pairs: list[tuple[str, str]], n: int
) -> None:
    # half the sentence pairs sit on a graph edge, half are arbitrary, so a
    # run produces a mix of Direct, Multihop and Unconnected verdicts
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n):
            if rng.random() < 0.5:
                a, b = pairs[rng.randrange(len(pairs))]
            else:
                a, b = rng.sample(names, 2)
            s1_shape, s2_shape = rng.choice(SENTENCE_SHAPES)
            row = {"id": f"p{i}", "s1": s1_shape.format(a=a), "s2": s2_shape.format(b=b)}
            fh.write(json.dumps(row) + "\n")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, required=True)
    ap.add_argument("--nodes", type=int, default=80)
    ap.add_argument("--triples", type=int, default=400)
    ap.add_argument("--sentences", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.nodes < 2 or args.triples < 1:
        ap.error("need at least 2 nodes and 1 triple")
    if args.triples > args.nodes * (args.nodes - 1):
        ap.error("more triples requested than distinct ordered node pairs")

    rng = random.Random(args.seed)
    names = [f"thing{i}" for i in range(args.nodes)]
    args.out_dir.mkdir(parents=True, exist_ok=True)

    mentioned = write_graph(args.out_dir / "graph.tsv", rng, names, args.triples)
    write_embeddings(args.out_dir / "embeddings.txt", rng, names)
    write_corpus(args.out_dir / "corpus.jsonl", rng, names, sorted(mentioned), args.sentences)

    print(f"wrote graph.tsv ({args.triples} triples), embeddings.txt ({args.nodes} x {DIM}), "
          f"corpus.jsonl ({args.sentences} pairs) to {args.out_dir}")


if __name__ == "__main__":
    main()
