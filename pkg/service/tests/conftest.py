import random

import pytest
from fastapi.testclient import TestClient

from modelsvc.app import create_app
from modelsvc.config import ServiceConfig
from modelsvc.graphstore import CORE_RELATIONS

DEMO_ROWS = (
    "HasA\tcar\tengine\t2.0",
    "HasA\tcar\twheel",
    "ReceivesAction\twaste\trecycle\t1.5",
    "UsedFor\toven\tbaking",
    "AtLocation\toven\tkitchen\t0.5",
)


@pytest.fixture(scope="session")
def demo_graph(tmp_path_factory):
    path = tmp_path_factory.mktemp("demo") / "graph.tsv"
    path.write_text("\n".join(DEMO_ROWS) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def demo_client(demo_graph):
    app = create_app(ServiceConfig(stub_graph=demo_graph))
    with TestClient(app) as client:
        yield client


def random_rows(rng: random.Random, n_nodes: int = 30, n_triples: int = 150) -> list[str]:
    rows: list[str] = []
    seen: set[tuple[str, int, int]] = set()
    while len(rows) < n_triples:
        rel = rng.choice(CORE_RELATIONS)
        head, tail = rng.sample(range(n_nodes), 2)
        if (rel, head, tail) in seen:
            continue
        seen.add((rel, head, tail))
        rows.append(f"{rel}\tthing{head}\tthing{tail}\t{round(rng.uniform(0.1, 3.0), 3)}")
    return rows


@pytest.fixture(scope="session")
def random_world(tmp_path_factory):
    """A seeded 150-triple stub service plus the rows it was built from."""
    rows = random_rows(random.Random(0))
    path = tmp_path_factory.mktemp("random") / "graph.tsv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    app = create_app(ServiceConfig(stub_graph=path, max_beam=25))
    with TestClient(app) as client:
        yield rows, client
