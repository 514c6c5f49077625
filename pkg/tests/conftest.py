import sys
from pathlib import Path

import pytest

# make tests/oracles.py and tests/synth.py importable as plain modules
sys.path.insert(0, str(Path(__file__).parent))

from kgpath.embeddings import load_embeddings_file
from kgpath.extract import load_corpus_file
from kgpath.graph import RelationInventory, load_graph_file

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def demo_inventory():
    return RelationInventory.from_file(FIXTURES / "demo_relations.txt")


@pytest.fixture(scope="session")
def demo_graph(demo_inventory):
    return load_graph_file(FIXTURES / "demo_graph.tsv", demo_inventory)


@pytest.fixture(scope="session")
def demo_emb():
    return load_embeddings_file(FIXTURES / "demo_embeddings.txt")


@pytest.fixture(scope="session")
def demo_corpus():
    return load_corpus_file(FIXTURES / "demo_corpus.jsonl")
