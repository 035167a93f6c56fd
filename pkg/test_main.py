#!/usr/bin/env python3
"""
Tests for the HTTP service
"""

import pytest
from fastapi.testclient import TestClient

from main import app

SMALL = {"path_length": 3, "nielsen_edges": 6, "nielsen_period": 1}


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


def test_health(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_status(client):
    data = client.get("/api/status").json()
    assert data["service"] == "ttconvex"
    assert "f6" in data["fixtures"]
    assert "convexity" in data["commands"]
    assert data["limits"]["max_iterations"] > 0


def test_orbit(client):
    response = client.post("/api/orbit", json={"fixture": "f6", "word": "d", "N": 4})
    assert response.status_code == 200
    assert response.json()["lengths"] == [1, 2, 5, 10, 17]


def test_orbit_from_inline_automorphism(client):
    text = "[automorphism]\ngenerators = a b\na -> a\nb -> b a\n"
    response = client.post("/api/orbit", json={"automorphism": text, "word": "b", "N": 3})
    assert response.json()["lengths"] == [1, 2, 3, 4]


def test_orbit_errors(client):
    response = client.post("/api/orbit", json={"fixture": "nope", "word": "a"})
    assert response.status_code == 400
    assert response.json()["detail"].startswith("ConfigError")
    response = client.post("/api/orbit", json={"word": "a"})
    assert response.status_code == 400
    response = client.post("/api/orbit", json={"fixture": "f6", "word": "z"})
    assert response.status_code == 400
    assert response.json()["detail"].startswith("AlphabetError")


def test_convexity(client):
    response = client.post("/api/convexity", json={"fixture": "identity", "corpus": "ball(2)", "N_max": 4})
    assert response.status_code == 200
    data = response.json()
    assert data["empirical_K"] == 0.5
    assert data["corpus_size"] == 17
    assert "orbits" not in data


def test_convexity_rejects_hallway_fixture(client):
    response = client.post("/api/convexity", json={"fixture": "f6", "corpus": "fixture(bulgeex)"})
    assert response.status_code == 400


def test_validate(client):
    response = client.post("/api/validate", json={"fixture": "bad_rtt", "bounds": SMALL})
    assert response.status_code == 200
    data = response.json()
    assert data["ok"] is False
    assert "rtt(1)" in data["failures"]


def test_ledger(client):
    response = client.post("/api/ledger", json={"q": 2, "K_nonlin": 2, "M": 3, "C": 2})
    assert response.status_code == 200
    assert response.json()["K_word"] == 12.0
    response = client.post("/api/ledger", json={"q": 2})
    assert response.status_code == 400
    assert response.json()["detail"].startswith("MissingInput")
    assert client.post("/api/ledger", json={"q": 0}).status_code == 422
