from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from factorcode import annotator as A
from factorcode.server import create_app
from factorcode.workflow import Store

TEXTS = {
    ("r1", 0): "the team worked together on the escalation",
    ("r1", 1): "documentation of the call was incomplete",
    ("r2", 0): "covid restrictions delayed the appointment",
    ("r2", 1): "a risk assessment was not completed",
}


@pytest.fixture()
def client(tmp_path, taxonomy):
    examples = [
        A.TrainingExample(doc, idx, text, frozenset({code}))
        for (doc, idx), text, code in zip(
            TEXTS.keys(), TEXTS.values(), ["3.3", "3.5", "1.4", "4.5"])
    ]
    model = A.train(examples, taxonomy, batch_id="b1")
    store = Store(tmp_path / "store", taxonomy,
                  doc_groups={"r1": "Asian", "r2": "White British"},
                  batches={"b1": ["r1", "r2"]})
    store.register_model(model, ["b1"])
    preds = [A.predict(model, text, sid) for sid, text in TEXTS.items()]
    store.enqueue_predictions(preds, TEXTS)
    return TestClient(create_app(store))


def _drain_one(client, annotator="alice", decide="correct", added=None):
    task = client.get("/api/tasks/next", params={"annotator": annotator}).json()
    payload = {
        "annotator_id": annotator,
        "decisions": {c["code"]: decide for c in task["predicted"]},
        "added_concepts": added or [],
    }
    response = client.post(f"/api/tasks/{task['task_id']}/verdict", json=payload)
    return task, response


class TestTaxonomyEndpoint:
    def test_tree(self, client):
        data = client.get("/api/taxonomy").json()
        assert [r["code"] for r in data["roots"]] == ["1", "2", "3", "4", "5", "6"]
        assert data["roots"][0]["name"] == "External Environment"


class TestTaskEndpoints:
    def test_next_task_carries_labels_and_queue(self, client):
        task = client.get("/api/tasks/next", params={"annotator": "alice"}).json()
        assert task["status"] == "pending"
        assert all("label" in chip for chip in task["predicted"])
        assert task["queue"]["pending"] == 4

    def test_verdict_roundtrip(self, client):
        task, response = _drain_one(client)
        assert response.status_code == 201
        body = response.json()
        assert body["status"] == "done"
        assert body["queue"]["done"] == 1

    def test_missing_decision_is_422(self, client):
        task = client.get("/api/tasks/next", params={"annotator": "alice"}).json()
        response = client.post(
            f"/api/tasks/{task['task_id']}/verdict",
            json={"annotator_id": "alice", "decisions": {}, "added_concepts": []})
        assert response.status_code == 422
        assert response.json()["code"] == "IncompleteDecisions"

    def test_unknown_task_is_404(self, client):
        response = client.post(
            "/api/tasks/zzz/verdict",
            json={"annotator_id": "alice", "decisions": {}, "added_concepts": []})
        assert response.status_code == 404
        assert response.json()["code"] == "UnknownTask"

    def test_queue_drains_to_204(self, client):
        for _ in range(4):
            _drain_one(client)
        response = client.get("/api/tasks/next", params={"annotator": "alice"})
        assert response.status_code == 204


class TestRetrainEndpoint:
    def test_retrain_after_verdicts(self, client):
        for _ in range(4):
            _drain_one(client)
        response = client.post("/api/retrain")
        assert response.status_code == 200
        assert response.json()["version"] == 2

    def test_retrain_without_verdicts_is_409(self, client):
        response = client.post("/api/retrain")
        assert response.status_code == 409
        assert response.json()["code"] == "NoNewVerdicts"


class TestMetricsEndpoints:
    def test_metrics_snapshot(self, client):
        for _ in range(4):
            _drain_one(client, added=None)
        response = client.get("/api/metrics/1/b1")
        assert response.status_code == 200
        snap = response.json()
        assert snap["coverage"] == 1.0
        assert len(snap["per_group"]["rows"]) == 2

    def test_metrics_unknown_batch_404(self, client):
        response = client.get("/api/metrics/1/zzz")
        assert response.status_code == 404

    def test_fairness_endpoint(self, client):
        while True:
            r = client.get("/api/tasks/next", params={"annotator": "a"})
            if r.status_code == 204:
                break
            task = r.json()
            decisions = {c["code"]: "correct" for c in task["predicted"]}
            added = [] if "3.3" in decisions else ["3.3"]
            client.post(f"/api/tasks/{task['task_id']}/verdict",
                        json={"annotator_id": "a", "decisions": decisions,
                              "added_concepts": added})
        response = client.get("/api/fairness/1/b1",
                              params={"a": "Asian", "b": "White British"})
        assert response.status_code == 200
        body = response.json()
        assert body["group_a"] == "Asian"
        assert "w_rounded" in body["result"]
        assert 0.0 <= body["result"]["p_value"] <= 1.0

    def test_error_shape(self, client):
        response = client.get("/api/metrics/9/b1")
        assert response.status_code == 404
        assert set(response.json()) == {"code", "message"}


class TestStaticAssets:
    def test_built_ui_served_alongside_api(self, tmp_path, taxonomy):
        from pathlib import Path

        dist = Path(__file__).resolve().parents[1] / "frontend" / "dist"
        if not (dist / "index.html").exists():
            pytest.skip("review UI not built; API remains fully usable without it")
        store = Store(tmp_path / "store", taxonomy)
        ui_client = TestClient(create_app(store, static_dir=dist))
        assert ui_client.get("/").status_code == 200
        assert "annotation review" in ui_client.get("/").text
        assert ui_client.get("/api/tasks/next",
                             params={"annotator": "x"}).status_code == 204
