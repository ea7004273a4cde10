import numpy as np
import pytest
from fastapi.testclient import TestClient

from specrisk.instance_io import instance_to_payload, payload_to_instance
from specrisk.lp_bridge import parse_lp_dimensions
from specrisk.scenario_lab import RandomInstanceSpec, generate_random_instance
from specrisk.service.app import app
from specrisk.solver import SolverConfig, solve


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def _instance_payload(**kw):
    args = dict(n=4, N=20, m=2, d=2, seed=0)
    args.update(kw)
    return instance_to_payload(generate_random_instance(RandomInstanceSpec(**args)))


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_gen_matches_library(client):
    r = client.post("/gen", json={"n": 4, "N": 20, "m": 2, "d": 2, "seed": 7})
    assert r.status_code == 200
    payload = r.json()["instance"]
    served = payload_to_instance(payload)
    local = generate_random_instance(RandomInstanceSpec(n=4, N=20, m=2, d=2, seed=7))
    assert np.array_equal(served.mu, local.mu)
    for a, b in zip(served.constraints, local.constraints):
        assert np.array_equal(a.losses.entries, b.losses.entries)
        assert a.budget == b.budget


def test_gen_validation(client):
    r = client.post("/gen", json={"n": 0, "N": 20, "m": 1, "d": 1})
    assert r.status_code == 422


def test_solve_round_trip_matches_direct_call(client):
    payload = _instance_payload(seed=3)
    r = client.post("/solve", json={"instance": payload, "config": {"max_outer": 50}})
    assert r.status_code == 200
    report = r.json()["report"]
    direct = solve(
        payload_to_instance(payload), SolverConfig(max_outer=50)
    )
    assert report["status"] == direct.status
    assert report["x"] == pytest.approx(direct.x.tolist())
    assert report["inner_iters_total"] == direct.inner_iters_total


def test_solve_rejects_bad_payload(client):
    r = client.post("/solve", json={"instance": {"schema": "nope/1"}})
    assert r.status_code == 422


def test_solve_rejects_bad_config(client):
    payload = _instance_payload()
    r = client.post(
        "/solve", json={"instance": payload, "config": {"c_eta": 2.0}}
    )
    assert r.status_code == 422


def test_export_lp(client):
    payload = _instance_payload(seed=1)
    r = client.post("/export-lp", json={"instance": payload, "name": "inst"})
    assert r.status_code == 200
    body = r.json()
    dims = parse_lp_dimensions(body["lp"])
    assert dims.to_dict() == body["dims"]
    assert "ENDATA" in body["mps"]


def test_bench_perturb(client):
    payload = _instance_payload(n=5, N=30, m=1, d=1, seed=2)
    r = client.post(
        "/bench/perturb",
        json={"instance": payload, "t": 0.05, "S": 4, "base_seed": 1},
    )
    assert r.status_code == 200
    body = r.json()
    assert len(body["inner_iter_counts"]) == 4
    counts = np.array(body["inner_iter_counts"], dtype=float)
    assert body["mu_S"] == pytest.approx(counts.mean())
    assert body["sigma_S"] == pytest.approx(counts.std(ddof=1))
    assert body["cv"] == pytest.approx(counts.std(ddof=1) / counts.mean())


def test_bench_perturb_parallel_matches_serial(client):
    payload = _instance_payload(n=5, N=30, m=1, d=1, seed=2)
    req = {"instance": payload, "t": 0.05, "S": 4, "base_seed": 1}
    serial = client.post("/bench/perturb", json=req).json()
    req["parallelism"] = 4
    parallel = client.post("/bench/perturb", json=req).json()
    assert serial["inner_iter_counts"] == parallel["inner_iter_counts"]


def test_bench_scale(client):
    r = client.post(
        "/bench/scale",
        json={"cases": [{"n": 5, "N": 30, "m": 1, "d": 1, "seed": 0},
                        {"n": 8, "N": 40, "m": 1, "d": 1, "seed": 0}]},
    )
    assert r.status_code == 200
    results = r.json()["results"]
    assert [(row["n"], row["N"]) for row in results] == [(5, 30), (8, 40)]
    for row in results:
        assert row["status"] == "converged"
        assert row["wall_time"] > 0


def test_hedge_endpoint_small(client):
    r = client.post(
        "/hedge",
        json={
            "mode": "nominal",
            "samples": 300,
            "seed": 0,
            "omega1_grid": [0.0, 1.0],
            "omega2_grid": [0.0],
            "config": {"max_outer": 200},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["lam"] == 0.0
    assert len(body["grid"]) == 2
    assert all(row["mode"] == "nominal" for row in body["grid"])
    assert len(body["weights"]) == 84
