"""HTTP service tests: endpoints, error mapping, parity with handlers."""

import pytest
from fastapi.testclient import TestClient

import pkgcsim
from pkgcsim.reports import canonical_dumps
from pkgcsim.service import create_app
from pkgcsim.service import handlers
from pkgcsim.trace import TRACE_HEADER

SMALL_SIM = {"n_cores": 4, "policy": "pc1a", "duration_ns": 10_000_000}

HEADER_LINE = ",".join(TRACE_HEADER)

IDLE_TRACE = (
    HEADER_LINE
    + "\n"
    + "0,0,CC0\n"
    + "0,1,CC1\n"
    + "1000,0,CC1\n"
    + "5000,0,CC0\n"
    + "9000,0,CC1\n"
)


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


class TestMeta:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body == {"status": "ok", "version": pkgcsim.__version__}

    def test_default_profile_document(self, client):
        body = client.get("/profiles/default").json()
        assert set(body) == {"power_profile", "latency_profile"}
        assert body["power_profile"]["p_pc1a_soc"] == 27.5
        assert body["latency_profile"]["v_nominal_mv"] == 800


class TestSimulate:
    def test_idle_agile_run(self, client):
        resp = client.post("/simulate", json={"config": SMALL_SIM})
        assert resp.status_code == 200
        body = resp.json()
        assert body["config"]["n_cores"] == 4
        assert abs(body["result"]["avg_power_w"] - 29.1) < 0.3
        assert body["result"]["package_residency"]["PC1A"] >= 0.99
        assert "trace_csv" not in body

    def test_trace_attachment(self, client):
        resp = client.post(
            "/simulate", json={"config": SMALL_SIM, "include_trace_csv": True}
        )
        assert resp.json()["trace_csv"].startswith(HEADER_LINE)

    def test_seed_override_echoes(self, client):
        resp = client.post(
            "/simulate", json={"config": SMALL_SIM, "seed_override": 99}
        )
        assert resp.json()["config"]["seed"] == 99

    def test_unknown_config_field_maps_to_422(self, client):
        resp = client.post("/simulate", json={"config": {"warp_factor": 9}})
        assert resp.status_code == 422
        body = resp.json()
        assert body["error"] == "InvalidConfig"
        assert "warp_factor" in body["detail"]


class TestSweep:
    def test_two_point_sweep(self, client):
        resp = client.post(
            "/sweep",
            json={
                "config": {**SMALL_SIM, "duration_ns": 50_000_000},
                "rates": [0.0, 50_000.0],
            },
        )
        points = resp.json()["points"]
        assert [p["rate_per_s"] for p in points] == [0.0, 50_000.0]
        savings = [p["result"]["savings_vs_baseline"] for p in points]
        assert savings[0] >= savings[1]

    def test_missing_rates_is_schema_error(self, client):
        resp = client.post("/sweep", json={"config": SMALL_SIM})
        assert resp.status_code == 422
        assert "error" not in resp.json()  # pydantic body, not a domain error


class TestAnalyzeTrace:
    def test_intervals_and_floor(self, client):
        resp = client.post("/analyze-trace", json={"trace_csv": IDLE_TRACE})
        body = resp.json()
        assert body["intervals"] == [[1000, 5000], [9000, 9001]]
        floored = client.post(
            "/analyze-trace", json={"trace_csv": IDLE_TRACE, "floor_ns": 2_000}
        ).json()
        assert floored["intervals"] == [[1000, 5000]]
        assert floored["floor_ns"] == 2_000

    def test_bad_gate(self, client):
        resp = client.post(
            "/analyze-trace", json={"trace_csv": IDLE_TRACE, "gate": "CC9"}
        )
        assert resp.status_code == 422
        assert resp.json()["error"] == "UnknownState"

    def test_malformed_trace(self, client):
        resp = client.post("/analyze-trace", json={"trace_csv": "not,a,trace\n"})
        assert resp.status_code == 422
        assert resp.json()["error"] == "MalformedRow"


class TestPowerAndBudget:
    def test_estimate_power_full_idle(self, client):
        resp = client.post("/estimate-power", json={"r_pc1a": 1.0})
        body = resp.json()
        assert body["savings_percent"] == 41.2
        assert abs(body["pc1a_state_power_w"]["soc_composed_w"] - 27.556) < 1e-9

    def test_estimate_power_bad_profile(self, client):
        resp = client.post(
            "/estimate-power",
            json={"r_pc1a": 0.5, "power_profile": {"p_flux": 1.21}},
        )
        assert resp.status_code == 422
        assert resp.json()["error"] == "MalformedProfile"

    def test_transition_budget(self, client):
        body = client.post("/transition-budget", json={}).json()
        assert body["agile"]["total_ns"] == 168
        assert body["deep"]["total_ns"] == 57_000
        assert abs(body["deep_to_agile_ratio"] - 57_000 / 168) < 1e-9


class TestExplainFlow:
    def test_agile_scenario(self, client):
        body = client.post(
            "/explain-flow", json={"scenario": "pc1a-entry-exit"}
        ).json()
        assert body["cumulative_latency_ns"] == 58

    def test_unknown_scenario(self, client):
        resp = client.post("/explain-flow", json={"scenario": "warp-entry"})
        assert resp.status_code == 422
        assert "warp-entry" in resp.json()["detail"]


class TestReport:
    def test_collation_produces_files(self, client):
        sweep = handlers.handle_sweep(
            {**SMALL_SIM, "duration_ns": 20_000_000}, [0.0, 40_000.0]
        )
        body = client.post("/report", json={"documents": [sweep]}).json()
        files = body["files"]
        assert "table1.csv" in files
        assert "load-curve-0.csv" in files
        assert files["load-curve-0.csv"].count("\n") == 3  # header + 2 points


class TestParityWithHandlers:
    # The HTTP body and the handler dict must serialize byte-identically;
    # the CLI's local mode depends on it.
    def test_simulate_parity(self, client):
        local = handlers.handle_simulate(SMALL_SIM, None, False)
        remote = client.post("/simulate", json={"config": SMALL_SIM}).json()
        assert canonical_dumps(remote) == canonical_dumps(local)

    def test_analyze_parity(self, client):
        local = handlers.handle_analyze_trace(IDLE_TRACE, "CC1", 0, None)
        remote = client.post(
            "/analyze-trace", json={"trace_csv": IDLE_TRACE}
        ).json()
        assert canonical_dumps(remote) == canonical_dumps(local)
