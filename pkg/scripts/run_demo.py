"""End-to-end demo on a four-triple toy graph.

Writes the bundled fixture data to a temp directory, runs the connect
pipeline, the static baseline, corpus stats, and one evaluation setting,
and prints everything. No arguments, no external data.
"""
import json
import sys
import tempfile
from pathlib import Path

from kgpath.cli import main

GRAPH = """\
HasA\tcar\tengine
UsedFor\toven\tbaking
ReceivesAction\twaste\trecycle
PartOf\trecycle\tenvironmental protection
"""

RELATIONS = """\
AtLocation
Causes
CapableOf
IsA
HasPrerequisite
HasProperty
HasSubevent
UsedFor
CausesDesire
Desires
HasA
MotivatedByGoal
ReceivesAction
PartOf
"""

# one-hot words; "recycle" leans toward the "environmental protection" centroid
EMBEDDINGS = """\
8 8
car 1 0 0 0 0 0 0 0
engine 0 1 0 0 0 0 0 0
oven 0 0 1 0 0 0 0 0
baking 0 0 0 1 0 0 0 0
waste 0 0 0 0 1 0 0 0
environmental 0 0 0 0 0 1 0 0
protection 0 0 0 0 0 0 1 0
recycle 0 0 0 0 0 0.565685424949238 0.565685424949238 0.6
"""

CORPUS_ROWS = [
    {
        "id": "p1",
        "s1": "The car was quite old.",
        "s2": "Its engine finally broke down.",
        "gold_implicit": "the car has an engine",
        "gold_path": [["car", "HasA", "engine"]],
    },
    {
        "id": "p2",
        "s1": "Baking bread takes patience.",
        "s2": "The oven was still cold.",
        "gold_implicit": "an oven is used for baking",
        "gold_path": [["oven", "UsedFor", "baking"]],
    },
    {
        "id": "p3",
        "s1": "The city produces too much waste.",
        "s2": "Environmental protection matters to everyone.",
        "gold_implicit": "waste can be recycled",
        "gold_path": [
            ["waste", "ReceivesAction", "recycle"],
            ["recycle", "PartOf", "environmental protection"],
        ],
    },
]


def run(argv):
    code = main(argv)
    if code != 0:
        sys.exit(code)


def show(title, path):
    print(f"\n== {title} ==")
    print(Path(path).read_text(encoding="utf-8"), end="")


def demo() -> None:
    with tempfile.TemporaryDirectory(prefix="kgpath-demo-") as tmp:
        root = Path(tmp)
        (root / "graph.tsv").write_text(GRAPH, encoding="utf-8")
        (root / "relations.txt").write_text(RELATIONS, encoding="utf-8")
        (root / "embeddings.txt").write_text(EMBEDDINGS, encoding="utf-8")
        with open(root / "corpus.jsonl", "w", encoding="utf-8") as fh:
            for row in CORPUS_ROWS:
                fh.write(json.dumps(row) + "\n")

        data = [
            "--graph", str(root / "graph.tsv"),
            "--relations", str(root / "relations.txt"),
            "--embeddings", str(root / "embeddings.txt"),
            "--corpus", str(root / "corpus.jsonl"),
        ]

        run(["connect", *data, "--out", str(root / "connect.jsonl")])
        show("connect results (JSONL)", root / "connect.jsonl")

        run(["baseline", *data, "--out", str(root / "static.jsonl")])
        show("static baseline results (JSONL)", root / "static.jsonl")

        print("\n== corpus statistics ==")
        run([
            "stats",
            "--results", f"chainer={root / 'connect.jsonl'}",
            "--results", f"static={root / 'static.jsonl'}",
        ])

        run([
            "evaluate", *data,
            "--setting", "b",
            "--results", f"chainer={root / 'connect.jsonl'}",
            "--results", f"static={root / 'static.jsonl'}",
            "--out", str(root / "report.json"),
        ])
        show("evaluation, setting b (generation vs gold sentence)", root / "report.json")


if __name__ == "__main__":
    demo()
