import pytest

from app import app


@pytest.fixture
def client():
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client


def test_plugins_grouped(client):
    response = client.get("/api/plugins")
    assert response.status_code == 200
    categories = response.get_json()
    assert {p["key"] for p in categories["formula"]} == {"fano", "improved-constant", "lipschitz"}


def test_plugin_details(client):
    assert client.get("/api/plugin/verify-exact").get_json()["category"] == "exact"
    assert client.get("/api/plugin/unknown").status_code == 404


def test_validate(client):
    ok = client.post("/api/validate/fano", json={"cmi": 0.1, "n": 4})
    assert ok.get_json()["params"]["k"] == 2
    bad = client.post("/api/validate/fano", json={"cmi": 0.1, "n": 0})
    assert bad.status_code == 400
    assert bad.get_json()["status"] == "invalid"


def test_run(client):
    response = client.post("/api/run/fano", json={"cmi": 0.0, "n": 4})
    assert response.status_code == 200
    body = response.get_json()
    assert body["error"] is None
    assert body["output"]["fano_lower"] == pytest.approx(0.75)


def test_run_exact(client):
    body = client.post("/api/run/verify-exact", json={}).get_json()
    assert body["output"]["report"]["cmi"] == pytest.approx(0.346574, abs=1e-6)


def test_run_error(client):
    response = client.post("/api/run/improved-constant", json={"cmi": 0.2, "n": 5, "k": 2})
    assert response.status_code == 400
    assert response.get_json()["error"].startswith("Parameter error")
