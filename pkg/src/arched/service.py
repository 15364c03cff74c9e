"""HTTP/JSON service exposing sessions, generation, curation, analysis,
import, evaluation, and report download.

Handlers are thin adapters: validate the payload, take the per-session lock,
invoke exactly one domain operation, persist, and map domain errors to HTTP
through a closed code->status table. No domain logic lives here.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import uvicorn
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from . import session as ws
from .analysis import ObjectiveAnalyzer, render_report
from .assessments import AssessmentDrafter
from .canonical import canonical_json_bytes
from .errors import ArchedError, InvalidInputError, ServiceStartupError
from .evalstats import evaluate_corpus, evaluation_to_dict, load_corpus_csv
from .gateway import BackendConfig, LlmGateway, config_from_env
from .generation import ObjectiveGenerator
from .objectives import GenerationSpec, import_set, set_to_dict, spec_from_dict

logger = logging.getLogger("arched.service")

API_VERSION = "1"

# Closed mapping from stable error codes to HTTP statuses; every domain error
# code appears exactly once.
STATUS_BY_CODE: dict[str, int] = {
    "invalid-input": 422,
    "malformed-payload": 422,
    "unknown-objective": 422,
    "degenerate-marginals": 422,
    "unstable-estimate": 422,
    "invalid-transition": 409,
    "conflict": 409,
    "not-found": 404,
    "generation-empty": 502,
    "backend-error": 502,
    "backend-request": 502,
    "backend-protocol": 502,
    "structured-output": 502,
    "backend-timeout": 504,
    "internal": 500,
    "startup": 500,
}


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"  # loopback by default; no auth in v1
    port: int = 8772
    data_dir: str = "./arched-data"
    static_dir: str | None = None
    cors_origins: tuple[str, ...] = ()
    backend: BackendConfig = field(default_factory=config_from_env)


def load_service_config(
    path: str | None = None,
    env: Mapping[str, str] = os.environ,
    overrides: dict[str, Any] | None = None,
) -> ServiceConfig:
    """Merge config sources: CLI overrides > environment > config file > defaults."""
    values: dict[str, Any] = {}
    backend_values: dict[str, Any] = {}
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise InvalidInputError(f"cannot read config file: {e}") from None
        except ValueError as e:
            raise InvalidInputError(f"config file is not valid JSON: {e}") from None
        backend_values = dict(raw.pop("backend", {}) or {})
        values.update(raw)

    env_map = {
        "host": env.get("ARCHED_HOST"),
        "port": env.get("ARCHED_PORT"),
        "data_dir": env.get("ARCHED_DATA_DIR"),
        "static_dir": env.get("ARCHED_STATIC_DIR"),
        "cors_origins": env.get("ARCHED_CORS_ORIGINS"),
    }
    values.update({k: v for k, v in env_map.items() if v is not None})
    backend_env = {
        "kind": env.get("ARCHED_LLM_BACKEND"),
        "base_url": env.get("ARCHED_LLM_BASE_URL"),
        "api_key": env.get("ARCHED_LLM_API_KEY"),
        "model_default": env.get("ARCHED_LLM_MODEL"),
    }
    backend_values.update({k: v for k, v in backend_env.items() if v is not None})

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key.startswith("backend."):
            backend_values[key.split(".", 1)[1]] = value
        else:
            values[key] = value

    if isinstance(values.get("cors_origins"), str):
        values["cors_origins"] = tuple(
            o.strip() for o in values["cors_origins"].split(",") if o.strip()
        )
    if "port" in values:
        values["port"] = int(values["port"])
    known = {"host", "port", "data_dir", "static_dir", "cors_origins"}
    unknown = set(values) - known
    if unknown:
        raise InvalidInputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ServiceConfig(backend=BackendConfig(**backend_values), **values)


# --- request bodies ---------------------------------------------------------------

class SpecBody(BaseModel):
    grade_level: str
    subject: str
    topic: str
    target_levels: list[str]
    count_per_level: int
    extra_context: str | None = None

    def to_domain(self) -> GenerationSpec:
        return spec_from_dict(self.model_dump())


class CreateSessionBody(BaseModel):
    title: str
    spec: SpecBody


class CurateBody(BaseModel):
    decisions: dict[str, str]


class RegenerateBody(BaseModel):
    feedback: str = ""
    keep: list[str] = Field(default_factory=list)


class AssessBody(BaseModel):
    per_objective: int = 1


class ImportBody(BaseModel):
    format: str
    content: str
    session_id: str | None = None
    title: str | None = None


class EvalBody(BaseModel):
    csv: str
    resamples: int = 10_000
    seed: int = 42


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="arched", docs_url=None, redoc_url=None)

    gateway = LlmGateway(config.backend)
    store = ws.SessionStore(config.data_dir)
    generator = ObjectiveGenerator(gateway)
    analyzer = ObjectiveAnalyzer(gateway)
    drafter = AssessmentDrafter(gateway)

    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(session_id, threading.Lock())

    def mutate(session_id: str, op: Callable[[ws.Session], None]) -> dict:
        """Load-mutate-save under the per-session lock; failed ops persist nothing."""
        with session_lock(session_id):
            session = store.load(session_id)
            op(session)
            store.save(session)
            return ws.session_to_dict(session)

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.middleware("http")
    async def stamp_api_version(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Arched-Api"] = API_VERSION
        return response

    @app.exception_handler(ArchedError)
    async def domain_error(request: Request, exc: ArchedError):
        status = STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status,
            content={
                "status": status,
                "code": exc.code,
                "message": exc.message,
                "detail": exc.detail,
            },
        )

    @app.exception_handler(RequestValidationError)
    async def payload_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={
                "status": 422,
                "code": "malformed-payload",
                "message": "request payload failed validation",
                "detail": exc.errors(),
            },
        )

    @app.exception_handler(Exception)
    async def unexpected_error(request: Request, exc: Exception):
        incident = uuid.uuid4().hex[:12]
        logger.exception("unhandled error (incident %s)", incident)
        return JSONResponse(
            status_code=500,
            content={
                "status": 500,
                "code": "internal",
                "message": f"internal error (incident {incident})",
                "detail": None,
            },
        )

    @app.get("/api/health")
    def health():
        return {
            "status": "ok",
            "backend": config.backend.kind,
            "model": config.backend.model_default,
            "api": int(API_VERSION),
        }

    @app.post("/api/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = ws.create_session(body.title, body.spec.to_domain())
        with session_lock(session.id):
            store.save(session)
        return ws.session_to_dict(session)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return ws.session_to_dict(store.load(session_id))

    @app.get("/api/sessions")
    def list_sessions():
        return {"sessions": store.list_ids()}

    @app.patch("/api/sessions/{session_id}/spec")
    def patch_spec(session_id: str, body: SpecBody):
        return mutate(session_id, lambda s: ws.update_spec(s, body.to_domain()))

    @app.post("/api/sessions/{session_id}/generate")
    def generate(session_id: str):
        return mutate(session_id, lambda s: ws.run_generation(s, generator))

    @app.post("/api/sessions/{session_id}/regenerate")
    def regenerate(session_id: str, body: RegenerateBody):
        return mutate(
            session_id,
            lambda s: ws.run_regeneration(s, generator, body.feedback, set(body.keep)),
        )

    @app.post("/api/sessions/{session_id}/curate")
    def curate(session_id: str, body: CurateBody):
        return mutate(session_id, lambda s: ws.curate(s, dict(body.decisions)))

    @app.post("/api/sessions/{session_id}/analyze")
    def analyze(session_id: str):
        return mutate(session_id, lambda s: ws.run_analysis(s, analyzer))

    @app.post("/api/sessions/{session_id}/assessments")
    def assessments(session_id: str, body: AssessBody):
        return mutate(
            session_id, lambda s: ws.draft_assessments(s, drafter, body.per_objective)
        )

    @app.post("/api/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        return mutate(session_id, lambda s: ws.finalize(s))

    @app.get("/api/sessions/{session_id}/report")
    def report(session_id: str, format: str = Query(default="json")):
        session = store.load(session_id)
        rendered = render_report(ws.latest_report(session), format)
        media = "application/json" if format == "json" else "text/markdown; charset=utf-8"
        return Response(content=rendered, media_type=media)

    @app.post("/api/import", status_code=201)
    def import_objectives(body: ImportBody):
        objset = import_set(
            body.content.encode("utf-8"), body.format, source=body.title or "upload"
        )
        if body.session_id:
            return mutate(body.session_id, lambda s: ws.import_objectives(s, objset))
        return set_to_dict(objset)

    @app.post("/api/eval/corpus")
    def eval_corpus(body: EvalBody):
        corpus = load_corpus_csv(body.csv.encode("utf-8"))
        run = evaluate_corpus(corpus, resamples=body.resamples, seed=body.seed)
        return Response(
            content=canonical_json_bytes(evaluation_to_dict(run)),
            media_type="application/json",
        )

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted; shutdown drains in-flight requests."""
    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except OSError as e:
        raise ServiceStartupError(f"cannot bind {config.host}:{config.port}: {e}") from None
