"""HTTP front end: one engine, many sessions, polled iteration jobs.

Every response body is a projection of the session document that
`save_session` writes, so clients and files never disagree on field
names.  Mutations on one session are serialized by a per-session lock;
reads serve the latest committed snapshot without locking.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ._util import stable_digest
from .errors import EngineError, UnknownIdError, ValidationError, WrongStatusError
from .session import (
    SessionPolicy,
    SessionState,
    apply_feedback,
    approve_specification,
    create_session,
    edit_specification,
    ensure_can_iterate,
    load_session,
    run_iteration,
    save_session,
)

logger = logging.getLogger("coforge.service")


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    storage_dir: str = "sessions"
    backend_file: Optional[str] = None
    parallelism: int = 4
    log_level: str = "info"

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ValidationError(f"port {self.port} out of range")
        if self.parallelism < 1:
            raise ValidationError("parallelism must be at least 1")


@dataclass
class Job:
    job_id: str
    kind: str
    state: str = "pending"  # pending | running | done | failed
    error: Optional[dict] = None
    result: Optional[dict] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "state": self.state,
            "error": self.error,
            "result": self.result,
        }


@dataclass
class SessionHandle:
    state: SessionState
    path: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    doc: dict = field(default_factory=dict)
    jobs: dict[str, Job] = field(default_factory=dict)
    job_count: int = 0


class Registry:
    """All live sessions, mirrored to one file each under the storage dir."""

    def __init__(self, storage_dir: str):
        self.storage_dir = storage_dir
        self.sessions: dict[str, SessionHandle] = {}
        self.lock = threading.Lock()
        os.makedirs(storage_dir, exist_ok=True)
        for name in sorted(os.listdir(storage_dir)):
            if not name.endswith(".json"):
                continue
            path = os.path.join(storage_dir, name)
            try:
                state = load_session(path)
            except EngineError as err:
                logger.warning("skipping %s: %s", path, err.message)
                continue
            handle = SessionHandle(state=state, path=path, doc=state.to_document())
            self.sessions[state.session_id] = handle

    def add(self, state: SessionState) -> SessionHandle:
        path = os.path.join(self.storage_dir, f"{state.session_id}.json")
        handle = SessionHandle(state=state, path=path, doc=state.to_document())
        save_session(state, path)
        with self.lock:
            self.sessions[state.session_id] = handle
        return handle

    def get(self, session_id: str) -> SessionHandle:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownIdError(f"no session {session_id!r}") from None


def commit(handle: SessionHandle) -> dict:
    """Persist and snapshot after a mutation; caller holds the lock."""
    doc = handle.state.to_document()
    save_session(handle.state, handle.path)
    handle.doc = doc
    return doc


def check_freshness(handle: SessionHandle, body: dict) -> None:
    """Reject a mutation whose sender saw an older event log."""
    expected = body.get("expected_events")
    if expected is None:
        return
    actual = len(handle.state.event_log)
    if expected != actual:
        raise StaleView(
            f"stale view: session has {actual} events, caller saw {expected}"
        )


class StaleView(WrongStatusError):
    pass


def http_status(err: EngineError, feedback: bool = False) -> int:
    if isinstance(err, StaleView):
        return 412
    if isinstance(err, WrongStatusError):
        return 409
    if isinstance(err, UnknownIdError):
        return 409 if feedback else 404
    if err.code == "backend-failure":
        return 502
    return 400


def envelope_response(err: EngineError, feedback: bool = False) -> JSONResponse:
    return JSONResponse(status_code=http_status(err, feedback), content=err.envelope())


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    registry = Registry(config.storage_dir)
    app = FastAPI(title="coforge", version="0.1.0")
    app.state.registry = registry
    app.state.config = config

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, err: EngineError):
        feedback = request.url.path.endswith("/feedback")
        return envelope_response(err, feedback)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "sessions": len(registry.sessions)}

    @app.get("/sessions")
    def list_sessions():
        rows = []
        for handle in registry.sessions.values():
            doc = handle.doc
            rows.append(
                {
                    "session_id": doc["session"]["session_id"],
                    "status": doc["session"]["status"],
                    "problem_statement": doc["session"]["problem_statement"],
                    "events": len(doc["events"]),
                    "iterations": len(doc["iterations"]),
                }
            )
        rows.sort(key=lambda r: r["session_id"])
        return {"sessions": rows}

    @app.post("/sessions", status_code=201)
    async def post_session(request: Request):
        body = await _json_body(request)
        problem = body.get("problem_statement", "")
        policy_doc = body.get("policy")
        policy = SessionPolicy.from_dict(policy_doc) if policy_doc else SessionPolicy()
        seed = body.get("seed", 0)
        if not isinstance(seed, int):
            raise ValidationError("seed must be an integer")
        state = create_session(problem, policy, seed)
        handle = registry.add(state)
        return handle.doc

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return registry.get(session_id).doc

    @app.post("/sessions/{session_id}/spec")
    async def post_spec(session_id: str, request: Request):
        body = await _json_body(request)
        handle = registry.get(session_id)
        with handle.lock:
            check_freshness(handle, body)
            if body.get("approve"):
                approve_specification(handle.state)
            else:
                content = body.get("content")
                if not isinstance(content, str):
                    raise ValidationError("spec edit needs string 'content' or 'approve': true")
                edit_specification(handle.state, content)
            return commit(handle)

    @app.post("/sessions/{session_id}/iterations", status_code=202)
    async def post_iteration(session_id: str, request: Request):
        body = await _json_body(request)
        handle = registry.get(session_id)
        with handle.lock:
            check_freshness(handle, body)
            ensure_can_iterate(handle.state)
            handle.job_count += 1
            job = Job(
                job_id=f"j{handle.job_count}-{stable_digest(session_id, handle.job_count, length=6)}",
                kind="iteration",
            )
            handle.jobs[job.job_id] = job
        thread = threading.Thread(
            target=_run_iteration_job, args=(handle, job), daemon=True
        )
        thread.start()
        return {
            "job_id": job.job_id,
            "poll": f"/sessions/{session_id}/jobs/{job.job_id}",
        }

    @app.get("/sessions/{session_id}/jobs/{job_id}")
    def get_job(session_id: str, job_id: str):
        handle = registry.get(session_id)
        job = handle.jobs.get(job_id)
        if job is None:
            raise UnknownIdError(f"no job {job_id!r} in session {session_id!r}")
        return job.to_dict()

    @app.post("/sessions/{session_id}/feedback")
    async def post_feedback(session_id: str, request: Request):
        body = await _json_body(request)
        handle = registry.get(session_id)
        kind = body.get("kind")
        if not isinstance(kind, str):
            raise ValidationError("feedback needs a string 'kind'")
        payload = body.get("payload") or {}
        if not isinstance(payload, dict):
            raise ValidationError("feedback 'payload' must be an object")
        with handle.lock:
            check_freshness(handle, body)
            apply_feedback(handle.state, kind, payload)
            return commit(handle)

    @app.get("/sessions/{session_id}/artifacts/{artifact_id}")
    def get_artifact(session_id: str, artifact_id: str):
        handle = registry.get(session_id)
        graph = handle.state.graph
        artifact = graph.get(artifact_id)
        return {
            "artifact": artifact.to_dict(),
            "lineage": [graph.get(aid).to_dict() for aid in graph.lineage(artifact_id)],
        }

    @app.get("/sessions/{session_id}/utilities")
    def get_utilities(session_id: str):
        handle = registry.get(session_id)
        estimate = handle.state.utility_snapshot
        if estimate is None:
            return {"utilities": [], "record_count": len(handle.state.preference_log)}
        return {
            "utilities": [
                {"artifact_id": aid, "score": score}
                for aid, score in estimate.sorted_scores()
            ],
            "record_count": len(handle.state.preference_log),
            "regularization": estimate.regularization,
            "converged": estimate.converged,
            "iterations_used": estimate.iterations_used,
            "log_likelihood": estimate.log_likelihood,
        }

    return app


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ValidationError("request body must be JSON") from None
    if not isinstance(body, dict):
        raise ValidationError("request body must be a JSON object")
    return body


def _run_iteration_job(handle: SessionHandle, job: Job) -> None:
    job.state = "running"
    try:
        with handle.lock:
            run_iteration(handle.state)
            commit(handle)
            record = handle.state.iterations[-1]
        if record.error:
            job.result = {
                "iteration": record.index,
                "error": record.error,
                "status": handle.state.status,
            }
            job.state = "failed"
        else:
            job.result = {
                "iteration": record.index,
                "finalists": list(record.finalist_program_ids),
                "status": handle.state.status,
            }
            job.state = "done"
    except EngineError as err:
        job.error = err.envelope()
        job.state = "failed"
    except Exception as err:  # never leave a poller hanging
        job.error = {"code": "backend-failure", "message": str(err), "detail": None}
        job.state = "failed"


def serve(config: Optional[ServiceConfig] = None) -> None:
    import uvicorn

    config = config or ServiceConfig()
    port = int(os.environ.get("SERVICE_PORT", config.port))
    uvicorn.run(
        create_app(config),
        host=config.host,
        port=port,
        log_level=config.log_level,
    )
