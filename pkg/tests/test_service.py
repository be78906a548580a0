import pytest
from fastapi.testclient import TestClient

from swingopt.service.app import app

client = TestClient(app)

FAST_CONFIG = """\
[run]
example = custom
seed = 5
retain_times = 0 0.5

[model]
factors = 1
x0 = 40
speed1 = 0.014
level1 = 40
vol1 = 2.36

[contract]
volume_cap = 0.5
rate_cap = 1
horizon = 1
discount = 0.01

[scheme]
x1_min = 18.7
x1_max = 61.3
x1_nodes = 41
t_steps = 120
z_steps = 60
cluster_center = 40
"""


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["presets"] == ["ex1", "ex2", "ex3"]


def test_parse_roundtrip_and_exclusivity():
    resp = client.post("/config/parse", json={"config_text": FAST_CONFIG})
    assert resp.status_code == 200
    assert resp.json()["valid"] is True
    assert "[scheme]" in resp.json()["echo"]

    assert client.post("/config/parse", json={}).status_code == 422
    assert (
        client.post(
            "/config/parse", json={"config_text": FAST_CONFIG, "preset": "ex1"}
        ).status_code
        == 422
    )


def test_parse_invalid_config_422():
    resp = client.post("/config/parse", json={"config_text": "[run]\nexample = custom\n"})
    assert resp.status_code == 422
    assert "missing required configuration" in resp.json()["detail"]


def test_unknown_subcommand_404():
    resp = client.post("/run/frobnicate", json={"preset": "ex1"})
    assert resp.status_code == 404


def test_run_cfl_preset():
    resp = client.post("/run/cfl", json={"preset": "ex1"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["stable"] is True
    assert 0.9 < body["summary"]["cfl"] <= 1.0
    assert "config_echo.ini" in body["artifacts"]


def test_run_solve_custom_config():
    resp = client.post("/run/solve", json={"config_text": FAST_CONFIG})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["value_t0"] > 0.0
    names = set(body["artifacts"])
    assert "surface_t0p0000.csv" in names
    assert "surface_t0p0000.gp" in names
    assert "surface_t0p5000.csv" in names


def test_run_trigger_custom_config():
    resp = client.post("/run/trigger", json={"config_text": FAST_CONFIG, "time": 0.5})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["time"] == pytest.approx(0.5)
    assert "trigger_z.csv" in body["artifacts"]


def test_run_mc_check_appends_ledger():
    cfg = FAST_CONFIG.replace("[model]", "mc_paths = 400\nmc_steps = 30\n\n[model]")
    resp = client.post("/run/mc-check", json={"config_text": cfg})
    assert resp.status_code == 200
    body = resp.json()
    assert "mc_ledger.csv" in body["appends"]
    header, row = body["appends"]["mc_ledger.csv"]
    assert header.startswith("config_hash,")
    assert row.split(",")[1] == "custom"
    assert body["summary"]["n_paths"] == 400


def test_seed_override_changes_mc_row():
    cfg = FAST_CONFIG.replace("[model]", "mc_paths = 400\nmc_steps = 30\n\n[model]")
    a = client.post("/run/mc-check", json={"config_text": cfg, "seed": 1}).json()
    b = client.post("/run/mc-check", json={"config_text": cfg, "seed": 1}).json()
    c = client.post("/run/mc-check", json={"config_text": cfg, "seed": 2}).json()
    assert a["summary"]["mc_mean"] == b["summary"]["mc_mean"]
    assert a["summary"]["mc_mean"] != c["summary"]["mc_mean"]


def test_run_boundary_check():
    resp = client.post("/run/boundary-check", json={"config_text": FAST_CONFIG})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["worst_ratio"] < 1e-2
    assert "boundary_check.csv" in body["artifacts"]
