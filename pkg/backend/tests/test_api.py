import pytest
from fastapi.testclient import TestClient

from main import create_app
from services.retrieval import build_index
from services.synthgen import generate_route
from services.system_logger import system_logger
from strategies.fixed_rate import select_fixed_rate


@pytest.fixture(scope="module")
def route():
    return generate_route(40, dim=8, step=0.1, turn=0.1, seed=12)


@pytest.fixture
def client(route):
    system_logger.clear_logs()
    index = build_index(route.db, select_fixed_rate(route.db, 8))
    return TestClient(create_app(index))


class TestHealth:
    def test_reports_loaded_index(self, client):
        response = client.get("/api/health")
        assert response.status_code == 200
        assert response.json() == {"status": "healthy", "index_loaded": True}

    def test_without_index(self):
        client = TestClient(create_app())
        assert client.get("/api/health").json()["index_loaded"] is False
        assert client.get("/api/index").status_code == 503
        assert client.post("/api/query/im2im", json={"vector": [1.0, 0.0]}).status_code == 503


class TestIndexInfo:
    def test_region_statistics(self, client):
        info = client.get("/api/index").json()
        assert info["frames"] == 40
        assert info["dim"] == 8
        assert info["strategy"] == "fixed_rate"
        assert info["keyframes"] == 8
        assert info["ratio"] == pytest.approx(0.2)
        assert info["ams"] is None
        assert info["covers_all_frames"] is True


class TestQueries:
    def test_im2im_finds_the_frame(self, client, route):
        vector = (route.db.frame(17) * 3.0).tolist()
        response = client.post("/api/query/im2im", json={"vector": vector, "query": 17})
        assert response.status_code == 200
        body = response.json()
        assert body["query"] == 17
        assert body["best"] == 17
        assert body["sim"] == pytest.approx(1.0)
        assert body["comparisons"] > 8

    def test_seq2seq_reports_the_center(self, client, route):
        vectors = route.db.features[20:23].tolist()
        response = client.post("/api/query/seq2seq", json={"vectors": vectors})
        assert response.status_code == 200
        assert response.json()["best"] == 21
        assert response.json()["sim"] == pytest.approx(3.0)

    def test_zero_vector_is_rejected(self, client):
        response = client.post("/api/query/im2im", json={"vector": [0.0] * 8})
        assert response.status_code == 400
        errors = system_logger.get_logs(category="system_error")
        assert errors and "zero norm" in errors[0]["message"]

    def test_wrong_dimension_is_rejected(self, client):
        assert client.post("/api/query/im2im", json={"vector": [1.0, 0.0, 0.0]}).status_code == 400

    def test_ragged_sequence_is_rejected(self, client):
        response = client.post("/api/query/seq2seq", json={"vectors": [[1.0] * 8, [1.0] * 7]})
        assert response.status_code == 400

    def test_empty_vector_fails_validation(self, client):
        assert client.post("/api/query/im2im", json={"vector": []}).status_code == 422


class TestLogs:
    def test_queries_are_logged(self, client, route):
        client.post("/api/query/im2im", json={"vector": route.db.frame(3).tolist()})
        body = client.get("/api/logs/", params={"category": "query"}).json()
        assert body["total"] == 1
        assert body["logs"][0]["details"]["task"] == "im2im"

    def test_categories(self, client, route):
        client.post("/api/query/im2im", json={"vector": route.db.frame(3).tolist()})
        body = client.get("/api/logs/categories").json()
        assert "clustering" in body["categories"]
        assert body["levels"] == ["INFO", "WARNING", "ERROR"]
        assert body["counts"]["query"] == 1
        assert body["counts"]["clustering"] == 0

    def test_clear(self, client, route):
        client.post("/api/query/im2im", json={"vector": route.db.frame(3).tolist()})
        assert client.delete("/api/logs/").json() == {"message": "Logs cleared"}
        assert client.get("/api/logs/").json()["total"] == 0
