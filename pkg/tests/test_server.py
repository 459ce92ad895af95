from unittest.mock import MagicMock

import pytest
from fastapi.testclient import TestClient

from mcfrac import server
from mcfrac.config import resolve_settings
from mcfrac.errors import EnclosuresTooWide
from mcfrac.server import JobResult, app, purge_jobs_locked, record_job_result, tail_job_logs


@pytest.fixture(autouse=True)
def isolated_server(monkeypatch, tmp_path):
    for key in ("MCFRAC_PRECISION", "MCFRAC_FORMAT", "MCFRAC_WORKERS", "MCFRAC_ACTION_LOG"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setenv("MCFRAC_CACHE_DIR", str(tmp_path / "cache"))
    resolve_settings.cache_clear()
    # run submitted jobs inline
    executor = MagicMock()
    executor.submit.side_effect = lambda fn, *args: fn(*args)
    monkeypatch.setattr(server, "JOB_EXECUTOR", executor)
    server.JOBS.clear()
    server.JOB_CREATED_AT.clear()
    yield
    resolve_settings.cache_clear()


@pytest.fixture
def client():
    return TestClient(app)


def _job(client, response):
    assert response.status_code == 202
    job_id = response.json()["job_id"]
    status = client.get(f"/api/jobs/{job_id}")
    assert status.status_code == 200
    return status.json()


def test_index_lists_families(client):
    res = client.get("/")
    assert res.status_code == 200
    assert "Landau constants G(n)" in res.text
    assert "<table>" in res.text


def test_families_endpoint(client):
    res = client.get("/api/families")
    tags = [family["tag"] for family in res.json()]
    assert tags == ["landau", "lebesgue", "euler"]


def test_coefficients_endpoint(client, tmp_path):
    res = client.get("/api/coefficients/euler/1")
    assert res.status_code == 200
    doc = res.json()
    assert doc["terms"] == [{"num": "1/2", "den": "1/6"}]
    assert (tmp_path / "cache" / "coefficients.v1.euler.1.json").exists()


def test_coefficients_rejects_unknown_family_and_depth(client):
    assert client.get("/api/coefficients/zeta/1").status_code == 400
    res = client.get("/api/coefficients/lebesgue/4")
    assert res.status_code == 400
    assert "certified" in res.json()["detail"]


def test_derive_job(client):
    status = _job(client, client.post("/api/derive", json={"family": "euler", "depth": 2}))
    assert status["status"] == "done"
    result = status["results"][0]
    assert result["ok"] is True
    assert result["payload"]["cache_hit"] is False
    assert result["payload"]["document"]["limit_constant"] == "1/200"
    assert '"action": "derive"' in status["log_tail"]


def test_derive_job_validation(client):
    res = client.post("/api/derive", json={"family": "euler", "depth": -1})
    assert res.status_code == 422
    res = client.post("/api/derive", json={"family": "zeta", "depth": 1})
    assert res.status_code == 400


def test_verify_job(client):
    res = client.post("/api/verify", json={"theorem": "landau-monotone", "n_max": 3})
    status = _job(client, res)
    assert status["status"] == "done"
    payload = status["results"][0]["payload"]
    assert payload["overall"] == "certified-true"
    assert len(payload["verdicts"]) == 3


def test_verify_rejects_unknown_theorem(client):
    res = client.post("/api/verify", json={"theorem": "riemann", "n_max": 3})
    assert res.status_code == 422


def test_failed_job_carries_error_kind(client, monkeypatch):
    def too_wide(*args, **kwargs):
        raise EnclosuresTooWide("enclosures too wide at 192 bits for rate fit")

    monkeypatch.setattr(server, "rate_fit", too_wide)
    status = _job(client, client.post("/api/rate", json={"family": "euler", "depth": 1}))
    assert status["status"] == "error"
    assert status["results"][0]["error_kind"] == "enclosures_too_wide"


def test_unexpected_failure_is_internal(client, monkeypatch):
    monkeypatch.setattr(server, "run_theorem", MagicMock(side_effect=RuntimeError("boom")))
    res = client.post("/api/verify", json={"theorem": "landau-thm2", "n_max": 1})
    status = _job(client, res)
    assert status["results"][0]["error_kind"] == "internal"
    assert status["results"][0]["message"] == "boom"


def test_unknown_job_is_404(client):
    assert client.get("/api/jobs/does-not-exist").status_code == 404


def test_large_payload_is_truncated():
    server.JOBS["job"] = server.JobState(job_id="job", status="running")
    result = JobResult(
        ok=True,
        action="verify",
        payload={"blob": "x" * (server.MAX_OUTPUT_CHARS + 10)},
        ts="2026-01-01T00:00:00+00:00",
        correlation_id="cid",
    )
    record_job_result("job", result)
    stored = server.JOBS["job"].results[0]
    assert stored.payload["truncated"] is True
    assert len(stored.payload["preview"]) == server.MAX_OUTPUT_CHARS


def test_purge_keeps_newest_jobs(monkeypatch):
    monkeypatch.setattr(server, "JOB_MAX_ENTRIES", 2)
    for index, job_id in enumerate(["a", "b", "c"]):
        server.JOBS[job_id] = server.JobState(job_id=job_id, status="done")
        server.JOB_CREATED_AT[job_id] = 1e12 + index
    monkeypatch.setattr(server.time, "time", lambda: 1e12 + 10)
    purge_jobs_locked()
    assert sorted(server.JOBS) == ["b", "c"]


def test_tail_job_logs():
    assert tail_job_logs([]) == ""
    lines = [f"line {i}" for i in range(30)]
    tail = tail_job_logs(lines)
    assert tail.splitlines()[0] == "line 10"
    assert len(tail_job_logs(["y" * 5000])) == 4000
