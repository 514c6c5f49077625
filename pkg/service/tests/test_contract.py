"""Wire-contract tests against the stub service over an in-process client."""

import random

import pytest

from fastapi.testclient import TestClient

from modelsvc.app import create_app
from modelsvc.config import ServiceConfig
from modelsvc.graphstore import CORE_RELATIONS


def test_health_reports_mode(demo_client):
    resp = demo_client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["mode"] == "stub"
    assert body["max_beam"] == 50


def test_classify_known_triple(demo_client):
    resp = demo_client.post("/classify", json={"head": "car", "tail": "engine"})
    assert resp.status_code == 200
    scores = resp.json()["scores"]
    assert len(scores) == 14  # 13 relations + Random
    assert scores["HasA"] == 1.0
    assert all(v == 0.0 for name, v in scores.items() if name != "HasA")


def test_classify_unknown_pair_is_random(demo_client):
    scores = demo_client.post("/classify", json={"head": "car", "tail": "zeppelin"}).json()["scores"]
    assert scores["Random"] == 1.0
    assert all(v == 0.0 for name, v in scores.items() if name != "Random")


def test_classify_normalizes_surface_forms(demo_client):
    scores = demo_client.post("/classify", json={"head": " Car", "tail": "ENGINE."}).json()["scores"]
    assert scores["HasA"] == 1.0


def test_classify_rejects_malformed_bodies(demo_client):
    assert demo_client.post("/classify", json={"head": "car"}).status_code == 400
    assert demo_client.post("/classify", json={"head": "car", "tail": 3}).status_code == 400
    resp = demo_client.post(
        "/classify", content=b"not json", headers={"content-type": "application/json"}
    )
    assert resp.status_code == 400


def test_generate_lists_graph_neighbors(demo_client):
    resp = demo_client.post(
        "/generate",
        json={"source": "waste", "relation": "ReceivesAction", "inverted": False, "beam": 10},
    )
    assert resp.status_code == 200
    targets = resp.json()["targets"]
    assert [t["concept"] for t in targets] == ["recycle"]
    assert targets[0]["confidence"] == 1.0


def test_generate_orders_by_weight_then_name(demo_client):
    targets = demo_client.post(
        "/generate", json={"source": "car", "relation": "HasA", "inverted": False, "beam": 10}
    ).json()["targets"]
    assert [(t["concept"], t["confidence"]) for t in targets] == [("engine", 1.0), ("wheel", 0.5)]


def test_generate_inverted_walks_backward(demo_client):
    targets = demo_client.post(
        "/generate", json={"source": "baking", "relation": "UsedFor", "inverted": True, "beam": 5}
    ).json()["targets"]
    assert targets == [{"concept": "oven", "confidence": 1.0}]


def test_generate_without_neighbors_is_empty(demo_client):
    for body in (
        {"source": "kitchen", "relation": "AtLocation", "inverted": False, "beam": 10},
        {"source": "car", "relation": "IsA", "inverted": False, "beam": 10},
        {"source": "nowhere", "relation": "HasA", "inverted": False, "beam": 10},
    ):
        assert demo_client.post("/generate", json=body).json()["targets"] == []


def test_generate_beam_limits(demo_client):
    over = {"source": "car", "relation": "HasA", "inverted": False, "beam": 51}
    assert demo_client.post("/generate", json=over).status_code == 422
    assert demo_client.post("/generate", json={**over, "beam": 0}).status_code == 422
    missing = {"source": "car", "relation": "HasA", "inverted": False}
    assert demo_client.post("/generate", json=missing).status_code == 400
    assert demo_client.post("/generate", json={**over, "beam": 10, "inverted": "maybe"}).status_code == 400


WORDS = "the a dog cat bone oven bakes warm bread waste recycling plant cars engines turn wheels".split()


def test_bertscore_identity_randomized(demo_client):
    rng = random.Random(11)
    for _ in range(50):
        s = " ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 12)))
        body = demo_client.post("/bertscore", json={"candidate": s, "reference": s}).json()
        for key in ("precision", "recall", "f1"):
            assert abs(body[key] - 1.0) <= 1e-6
    print("[PASS] bertscore(s, s) = 1.0 +- 1e-6 on 50 randomized strings")


def test_bertscore_frozen_pair_and_determinism(demo_client):
    payload = {"candidate": "The dog buried a bone", "reference": "a dog buried the bone now"}
    body = demo_client.post("/bertscore", json=payload).json()
    assert body["precision"] == pytest.approx(1.0)
    assert body["recall"] == pytest.approx(5 / 6)
    assert body["f1"] == pytest.approx(10 / 11)
    assert demo_client.post("/bertscore", json=payload).json() == body


def test_bertscore_rejects_empty_sides(demo_client):
    assert demo_client.post("/bertscore", json={"candidate": "", "reference": "x"}).status_code == 400
    assert demo_client.post("/bertscore", json={"candidate": "...", "reference": "x"}).status_code == 400
    assert demo_client.post("/bertscore", json={"candidate": "x", "reference": ""}).status_code == 400


def test_relations_file_extends_label_set(tmp_path):
    (tmp_path / "relations.txt").write_text("HasA\nPartOf\n", encoding="utf-8")
    (tmp_path / "graph.tsv").write_text("PartOf\twheel\tcar\n", encoding="utf-8")
    app = create_app(
        ServiceConfig(stub_graph=tmp_path / "graph.tsv", relations=tmp_path / "relations.txt")
    )
    with TestClient(app) as client:
        scores = client.post("/classify", json={"head": "wheel", "tail": "car"}).json()["scores"]
        assert set(scores) == {"HasA", "PartOf", "Random"}
        assert scores["PartOf"] == 1.0


def test_randomized_requests_keep_backend_shape(random_world):
    """1000 seeded random requests: responses always satisfy the client-side
    contract (full label set, probabilities in [0,1], beam-bounded targets
    with non-increasing confidence, no source echo) and agree with the rows
    the graph was built from."""
    rows, client = random_world
    truth: set[tuple[str, str, str]] = set()
    nodes: set[str] = set()
    for row in rows:
        rel, head, tail, _w = row.split("\t")
        truth.add((head, rel, tail))
        nodes.update((head, tail))
    names = sorted(nodes) + ["unseen", "thing999"]
    labels = set(CORE_RELATIONS) | {"Random"}

    rng = random.Random(23)
    for i in range(1000):
        if i % 2 == 0:
            head, tail = rng.choice(names), rng.choice(names)
            resp = client.post("/classify", json={"head": head, "tail": tail})
            assert resp.status_code == 200
            scores = resp.json()["scores"]
            assert set(scores) == labels
            assert all(0.0 <= v <= 1.0 for v in scores.values())
            hits = {r for r in CORE_RELATIONS if scores[r] == 1.0}
            assert hits == {r for r in CORE_RELATIONS if (head, r, tail) in truth}
            assert scores["Random"] == (0.0 if hits else 1.0)
        else:
            source = rng.choice(names)
            relation = rng.choice(CORE_RELATIONS)
            inverted = rng.random() < 0.5
            beam = rng.randint(1, 25)
            resp = client.post(
                "/generate",
                json={"source": source, "relation": relation, "inverted": inverted, "beam": beam},
            )
            assert resp.status_code == 200
            targets = resp.json()["targets"]
            assert len(targets) <= beam
            confs = [t["confidence"] for t in targets]
            assert all(0.0 <= c <= 1.0 for c in confs)
            assert confs == sorted(confs, reverse=True)
            if targets:
                assert confs[0] == 1.0
            got = [t["concept"] for t in targets]
            assert len(set(got)) == len(got)
            assert source not in got
            adjacent = {
                (h if inverted else t)
                for h, r, t in truth
                if r == relation and (t if inverted else h) == source
            }
            assert set(got) <= adjacent
            assert len(got) == min(beam, len(adjacent))
    print("[PASS] 1000 randomized stub responses keep the classify/generate response shape")
