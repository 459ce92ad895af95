from __future__ import annotations

import json
import threading
import time
import uuid
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Literal

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.templating import Jinja2Templates
from pydantic import BaseModel, Field
from starlette.requests import Request

from .cache import derive_cached, to_document
from .config import Settings, resolve_cors_origins, resolve_settings
from .errors import ConfigError, DerivationError, McfracError, UnknownFamily
from .families import Family, all_families, family_by_tag
from .logging import log_action, new_correlation_id, now_iso
from .render import inequality_payload, rate_payload
from .verify import rate_fit, run_theorem

app = FastAPI(title="mcfrac")

cors_origins = resolve_cors_origins()
if cors_origins:
    allow_creds = "*" not in cors_origins
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins if allow_creds else ["*"],
        allow_credentials=allow_creds,
        allow_methods=["*"],
        allow_headers=["*"],
    )

BASE_DIR = Path(__file__).resolve().parent
TEMPLATES = Jinja2Templates(directory=str(BASE_DIR / "templates"))
JOB_EXECUTOR = ThreadPoolExecutor(max_workers=2)
JOB_LOCK = threading.Lock()
JOBS: dict[str, JobState] = {}
JOB_CREATED_AT: dict[str, float] = {}
JOB_MAX_AGE_SECONDS = 24 * 60 * 60
JOB_MAX_ENTRIES = 200
MAX_JOB_LOG_LINES = 1000
MAX_LOG_LINE_CHARS = 4000
MAX_OUTPUT_CHARS = 50000

Theorem = Literal["landau-thm2", "lebesgue-thm4", "landau-monotone", "lebesgue-monotone"]


class JobResult(BaseModel):
    ok: bool
    action: str
    error_kind: str | None = None
    message: str | None = None
    payload: dict[str, Any] | None = None
    ts: str
    duration_ms: int | None = None
    correlation_id: str


class JobState(BaseModel):
    job_id: str
    status: str
    results: list[JobResult] = Field(default_factory=list)
    log_lines: list[str] = Field(default_factory=list)


class DeriveReq(BaseModel):
    family: str
    depth: int = Field(ge=0)
    uncertified: bool = False


class VerifyReq(BaseModel):
    theorem: Theorem
    n_max: int = Field(ge=0)
    bits: int | None = Field(default=None, ge=64)


class RateReq(BaseModel):
    family: str
    depth: int = Field(ge=0)
    schedule: list[int] | None = None
    bits: int | None = Field(default=None, ge=64)


class JobResponse(BaseModel):
    job_id: str
    correlation_id: str


class JobStatusResponse(BaseModel):
    status: str
    results: list[JobResult]
    log_tail: str


@app.get("/", response_class=HTMLResponse)
def index(request: Request) -> HTMLResponse:
    return TEMPLATES.TemplateResponse(request, "index.html.j2", {"families": all_families()})


@app.get("/api/families", response_class=JSONResponse)
def api_families() -> JSONResponse:
    families = [
        {
            "tag": family.tag,
            "display": family.display,
            "template": family.template,
            "certified_depth": family.certified_depth,
            "mc0": family.mc0,
        }
        for family in all_families()
    ]
    return JSONResponse(families)


@app.get("/api/coefficients/{family}/{depth}", response_class=JSONResponse)
def api_coefficients(family: str, depth: int) -> JSONResponse:
    target = get_family(family)
    settings = get_settings()
    try:
        report, hit = derive_cached(target, depth, settings.cache_dir, bits=settings.precision)
    except DerivationError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    log_action({"action": "coefficients", "family": target.tag, "depth": depth, "cache_hit": hit})
    return JSONResponse(to_document(report, settings.precision).model_dump(mode="json"))


@app.post("/api/derive", response_class=JSONResponse)
def api_derive(req: DeriveReq) -> JSONResponse:
    target = get_family(req.family)
    settings = get_settings()

    def work() -> dict[str, Any]:
        report, hit = derive_cached(
            target,
            req.depth,
            settings.cache_dir,
            uncertified=req.uncertified,
            bits=settings.precision,
        )
        document = to_document(report, settings.precision)
        return {"cache_hit": hit, "document": document.model_dump(mode="json")}

    return submit_job("derive", work)


@app.post("/api/verify", response_class=JSONResponse)
def api_verify(req: VerifyReq) -> JSONResponse:
    settings = get_settings()
    bits = req.bits or settings.precision

    def work() -> dict[str, Any]:
        report = run_theorem(
            req.theorem,
            req.n_max,
            bits,
            workers=settings.workers,
            max_escalations=settings.max_escalations,
        )
        return inequality_payload(report)

    return submit_job("verify", work)


@app.post("/api/rate", response_class=JSONResponse)
def api_rate(req: RateReq) -> JSONResponse:
    target = get_family(req.family)
    settings = get_settings()
    bits = req.bits or settings.precision

    def work() -> dict[str, Any]:
        report, _ = derive_cached(target, req.depth, settings.cache_dir)
        fit = rate_fit(
            target,
            req.depth,
            req.schedule,
            bits=bits,
            report=report,
            max_escalations=settings.max_escalations,
        )
        return rate_payload(fit)

    return submit_job("rate", work)


@app.get("/api/jobs/{job_id}", response_class=JSONResponse)
def api_job_status(job_id: str) -> JSONResponse:
    with JOB_LOCK:
        purge_jobs_locked()
        job_state = JOBS.get(job_id)
    if not job_state:
        raise HTTPException(status_code=404, detail="Unknown job id")
    payload = JobStatusResponse(
        status=job_state.status,
        results=job_state.results,
        log_tail=tail_job_logs(job_state.log_lines),
    )
    return JSONResponse(payload.model_dump())


# ------------------------------------------------------------------------------
# Job machinery
# ------------------------------------------------------------------------------


def submit_job(action: str, work: Callable[[], dict[str, Any]]) -> JSONResponse:
    correlation_id = new_correlation_id()
    job_id = str(uuid.uuid4())
    job_state = JobState(job_id=job_id, status="queued")
    with JOB_LOCK:
        purge_jobs_locked()
        JOBS[job_id] = job_state
        JOB_CREATED_AT[job_id] = time.time()
    JOB_EXECUTOR.submit(run_job, job_id, correlation_id, action, work)
    payload = JobResponse(job_id=job_id, correlation_id=correlation_id)
    return JSONResponse(payload.model_dump(), status_code=202)


def run_job(
    job_id: str, correlation_id: str, action: str, work: Callable[[], dict[str, Any]]
) -> None:
    set_job_status(job_id, "running")
    start = time.monotonic()
    try:
        payload = work()
    except McfracError as exc:
        result = JobResult(
            ok=False,
            action=action,
            error_kind=exc.error_kind,
            message=str(exc),
            ts=now_iso(),
            duration_ms=int((time.monotonic() - start) * 1000),
            correlation_id=correlation_id,
        )
    except Exception as exc:
        result = JobResult(
            ok=False,
            action=action,
            error_kind="internal",
            message=str(exc),
            ts=now_iso(),
            duration_ms=int((time.monotonic() - start) * 1000),
            correlation_id=correlation_id,
        )
    else:
        result = JobResult(
            ok=True,
            action=action,
            payload=payload,
            ts=now_iso(),
            duration_ms=int((time.monotonic() - start) * 1000),
            correlation_id=correlation_id,
        )
    record_job_result(job_id, result)
    set_job_status(job_id, "done" if result.ok else "error")


def record_job_result(job_id: str, result: JobResult) -> None:
    if result.payload is not None:
        text = json.dumps(result.payload, sort_keys=True, default=str)
        if len(text) > MAX_OUTPUT_CHARS:
            result = result.model_copy(
                update={"payload": {"truncated": True, "preview": text[:MAX_OUTPUT_CHARS]}}
            )

    line = json.dumps(result.model_dump(exclude={"payload"}), ensure_ascii=False)
    if len(line) > MAX_LOG_LINE_CHARS:
        line = line[:MAX_LOG_LINE_CHARS] + "... (truncated)"

    with JOB_LOCK:
        job_state = JOBS.get(job_id)
        if job_state:
            job_state.results.append(result)
            job_state.log_lines.append(line)
            if len(job_state.log_lines) > MAX_JOB_LOG_LINES:
                job_state.log_lines.pop(0)
    log_action(result.model_dump(exclude={"payload"}), job_id=job_id)


def set_job_status(job_id: str, status: str) -> None:
    with JOB_LOCK:
        job_state = JOBS.get(job_id)
        if job_state:
            job_state.status = status


def purge_jobs_locked() -> None:
    now_ts = time.time()
    expired = [
        job_id
        for job_id, created in JOB_CREATED_AT.items()
        if now_ts - created > JOB_MAX_AGE_SECONDS
    ]
    for job_id in expired:
        JOBS.pop(job_id, None)
        JOB_CREATED_AT.pop(job_id, None)
    if len(JOBS) <= JOB_MAX_ENTRIES:
        return
    ordered = sorted(JOB_CREATED_AT.items(), key=lambda item: item[1])
    while len(ordered) > JOB_MAX_ENTRIES:
        job_id, _ = ordered.pop(0)
        JOBS.pop(job_id, None)
        JOB_CREATED_AT.pop(job_id, None)


def tail_job_logs(lines: list[str], max_lines: int = 20, max_chars: int = 4000) -> str:
    if not lines:
        return ""
    tail = "\n".join(lines[-max_lines:])
    return tail if len(tail) <= max_chars else tail[-max_chars:]


def get_family(tag: str) -> Family:
    try:
        return family_by_tag(tag)
    except UnknownFamily as exc:
        raise HTTPException(status_code=400, detail=f"Family not allowed: {tag}") from exc


def get_settings() -> Settings:
    try:
        return resolve_settings()
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def main() -> None:
    import uvicorn

    uvicorn.run("mcfrac.server:app", host="127.0.0.1", port=8099, reload=False)


if __name__ == "__main__":
    main()
