"""In-process contract tests using the ASGI test client."""

import threading

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embedsvc.app import create_app
from embedsvc.config import ServiceConfig, from_env
from embedsvc.encoders import HashedNgramEncoder


def embed(client, texts, **extra):
    resp = client.post("/embed", json={"texts": texts, **extra})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestEmbedContract:
    def test_one_vector_per_text_in_order(self, client):
        texts = ["fiebre", "dolor abdominal", "tos seca persistente"]
        body = embed(client, texts)
        assert body["dim"] == 64
        assert len(body["vectors"]) == 3
        forward = np.asarray(body["vectors"])
        backward = np.asarray(embed(client, texts[::-1])["vectors"])
        assert np.array_equal(forward, backward[::-1])

    def test_vectors_are_unit_norm(self, client):
        body = embed(client, ["fiebre", "a", "dolor torácico agudo"])
        norms = np.linalg.norm(np.asarray(body["vectors"]), axis=1)
        assert np.allclose(norms, 1.0, atol=1e-9)

    def test_repeat_requests_are_identical(self, client):
        first = embed(client, ["mialgia generalizada"])
        second = embed(client, ["mialgia generalizada"])
        assert first["vectors"] == second["vectors"]

    def test_dim_and_model_match_info(self, client):
        info = client.get("/info").json()
        body = embed(client, ["cefalea"])
        assert body["dim"] == info["dim"]
        assert body["model"] == info["model"]
        assert body["model"]
        assert len(body["vectors"][0]) == info["dim"]

    def test_unicode_normalization_is_stable(self, client):
        composed = "torácico"  # U+00E1
        decomposed = "torácico"  # a + combining acute
        assert composed != decomposed
        body = embed(client, [composed, decomposed])
        assert body["vectors"][0] == body["vectors"][1]

    def test_batch_hint_is_accepted(self, client):
        body = embed(client, ["fiebre", "tos"], batch_size=1)
        assert len(body["vectors"]) == 2

    def test_two_instances_agree(self, small_config, wait_ready):
        with TestClient(create_app(small_config)) as a, \
                TestClient(create_app(small_config)) as b:
            wait_ready(a)
            wait_ready(b)
            texts = ["exantema", "astenia marcada"]
            assert embed(a, texts)["vectors"] == embed(b, texts)["vectors"]


class TestRejections:
    def test_empty_list(self, client):
        resp = client.post("/embed", json={"texts": []})
        assert resp.status_code == 400
        assert "non-empty" in resp.json()["detail"]

    def test_blank_text(self, client):
        resp = client.post("/embed", json={"texts": ["fiebre", "   "]})
        assert resp.status_code == 400
        assert "text 1" in resp.json()["detail"]

    def test_oversized_batch(self, client):
        ok = client.post("/embed", json={"texts": ["x"] * 8})
        assert ok.status_code == 200
        resp = client.post("/embed", json={"texts": ["x"] * 9})
        assert resp.status_code == 400
        assert "max_batch" in resp.json()["detail"]

    def test_oversized_text(self, client):
        resp = client.post("/embed", json={"texts": ["x" * 121]})
        assert resp.status_code == 400
        assert "121" in resp.json()["detail"]

    def test_malformed_body_is_schema_error(self, client):
        assert client.post("/embed", json={"text": ["fiebre"]}).status_code == 422
        assert client.post("/embed", json={"texts": "fiebre"}).status_code == 422
        assert client.post("/embed", json={"texts": [1, 2]}).status_code == 422


class TestLoading:
    def test_503_until_model_ready(self, small_config, wait_ready):
        gate = threading.Event()

        def factory():
            gate.wait(timeout=10)
            return HashedNgramEncoder(64, "cls", 6)

        with TestClient(create_app(small_config, encoder_factory=factory)) as c:
            info = c.get("/info")
            assert info.status_code == 503
            assert info.headers["retry-after"] == "1"
            assert "loading" in info.json()["detail"]
            post = c.post("/embed", json={"texts": ["fiebre"]})
            assert post.status_code == 503
            gate.set()
            wait_ready(c)
            assert c.post("/embed", json={"texts": ["fiebre"]}).status_code == 200

    def test_failed_load_reports_cause(self, small_config):
        def factory():
            raise RuntimeError("weights not found")

        with TestClient(create_app(small_config, encoder_factory=factory)) as c:
            for _ in range(500):
                resp = c.get("/info")
                if "weights not found" in resp.json()["detail"]:
                    break
            assert resp.status_code == 503
            assert "weights not found" in resp.json()["detail"]


class TestInfo:
    def test_static_fields_are_stable(self, client):
        first = client.get("/info").json()
        second = client.get("/info").json()
        first.pop("stats")
        second.pop("stats")
        assert first == second
        assert first["max_tokens"] == 6
        assert first["pooling"] == "cls"
        assert first["max_batch"] == 8
        assert first["max_chars"] == 120

    def test_stats_accumulate(self, client):
        before = client.get("/info").json()["stats"]
        embed(client, ["fiebre", "tos"])
        embed(client, ["uno dos tres cuatro cinco seis siete"])  # 7 words, limit 6
        after = client.get("/info").json()["stats"]
        assert after["requests"] == before["requests"] + 2
        assert after["texts"] == before["texts"] + 3
        assert after["truncated_texts"] == before["truncated_texts"] + 1

    def test_truncation_keeps_the_leading_tokens(self, client):
        kept = embed(client, ["uno dos tres cuatro cinco seis"])
        cut = embed(client, ["uno dos tres cuatro cinco seis siete"])
        assert kept["vectors"] == cut["vectors"]


class TestPooling:
    def test_modes_differ_on_multiword_text(self, wait_ready):
        cls_cfg = ServiceConfig(dim=64, pooling="cls")
        mean_cfg = ServiceConfig(dim=64, pooling="mean")
        with TestClient(create_app(cls_cfg)) as a, TestClient(create_app(mean_cfg)) as b:
            wait_ready(a)
            wait_ready(b)
            multi = embed(a, ["fiebre alta"]), embed(b, ["fiebre alta"])
            single = embed(a, ["fiebre"]), embed(b, ["fiebre"])
        assert multi[0]["vectors"] != multi[1]["vectors"]
        assert single[0]["vectors"] == single[1]["vectors"]
        assert multi[0]["model"].endswith("cls")
        assert multi[1]["model"].endswith("mean")


class TestConfig:
    def test_from_env_reads_prefixed_vars(self):
        cfg = from_env({"EMBEDSVC_DIM": "128", "EMBEDSVC_POOLING": "mean",
                        "EMBEDSVC_PORT": "9100"})
        assert (cfg.dim, cfg.pooling, cfg.port) == (128, "mean", 9100)
        assert cfg.model == "hashed-ngram"

    def test_bad_values_are_rejected(self):
        with pytest.raises(ValueError, match="EMBEDSVC_DIM"):
            from_env({"EMBEDSVC_DIM": "many"})
        with pytest.raises(ValueError, match="pooling"):
            ServiceConfig(pooling="max")
        with pytest.raises(ValueError, match="dim"):
            ServiceConfig(dim=8)
        with pytest.raises(ValueError, match="max_batch"):
            ServiceConfig(max_batch=0)
