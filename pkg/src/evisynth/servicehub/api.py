"""HTTP surface over the engine.

Every response body is produced by `canonical_json`, so a payload fetched
over HTTP is byte-identical to the same payload serialized from the
library. Nothing here does work of its own; handlers parse the request,
call one engine method and serialize the result.
"""

from __future__ import annotations

import json
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware

from ..errors import (
    BackendDown,
    BadConfig,
    BadWindowParams,
    DecisionConflict,
    DegenerateQuery,
    EmptyAbstract,
    EmptyPayload,
    EmptyQuery,
    EmptyTopic,
    EvisynthError,
    GraderUnavailable,
    NotInitialized,
    ProviderUnavailable,
    StorageFull,
    TooFewDocuments,
    UnknownEntity,
    UnknownFormat,
    UnknownModel,
)
from .engine import Engine

_STATUS_BY_ERROR = {
    EmptyQuery: 422,
    EmptyPayload: 422,
    EmptyAbstract: 422,
    UnknownFormat: 422,
    BadWindowParams: 422,
    TooFewDocuments: 422,
    DegenerateQuery: 422,
    BadConfig: 422,
    UnknownEntity: 404,
    UnknownModel: 404,
    EmptyTopic: 404,
    NotInitialized: 409,
    DecisionConflict: 409,
    BackendDown: 502,
    ProviderUnavailable: 502,
    GraderUnavailable: 502,
    StorageFull: 507,
}


def canonical_json(payload) -> bytes:
    """Stable byte encoding shared by the API, the CLI and the tests."""
    return json.dumps(
        payload, sort_keys=True, ensure_ascii=False, separators=(",", ":")
    ).encode("utf-8")


def _reply(payload, status: int = 200) -> Response:
    return Response(
        content=canonical_json(payload), status_code=status, media_type="application/json"
    )


def _error_reply(exc: Exception, status: int) -> Response:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    return _reply(payload, status)


async def _body(request: Request) -> dict:
    raw = await request.body()
    if not raw:
        raise EmptyPayload("request body is empty")
    try:
        parsed = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise EmptyPayload(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise EmptyPayload("request body must be a JSON object")
    return parsed


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="evisynth", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.engine = engine
    # Browser dashboards are served from a different origin than the API.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    async def _on_domain_error(request: Request, exc: Exception) -> Response:
        status = 400
        for cls in type(exc).__mro__:
            if cls in _STATUS_BY_ERROR:
                status = _STATUS_BY_ERROR[cls]
                break
        return _error_reply(exc, status)

    async def _on_value_error(request: Request, exc: Exception) -> Response:
        return _error_reply(exc, 422)

    app.add_exception_handler(EvisynthError, _on_domain_error)
    app.add_exception_handler(ValueError, _on_value_error)
    app.add_exception_handler(RequestValidationError, _on_value_error)

    @app.post("/ingest")
    async def ingest(request: Request) -> Response:
        body = await _body(request)
        report = engine.ingest(
            records=body.get("records"),
            payload=body.get("payload"),
            format=body.get("format", "jsonl"),
        )
        return _reply(report)

    @app.post("/update")
    async def update(request: Request) -> Response:
        body = await _body(request)
        report = engine.living_update(
            records=body.get("records"),
            payload=body.get("payload"),
            format=body.get("format", "jsonl"),
        )
        return _reply(report.as_dict())

    @app.post("/fit")
    async def fit(request: Request) -> Response:
        raw = await request.body()
        body = json.loads(raw) if raw else {}
        summary = engine.fit(seed=body.get("seed"), n_topics=body.get("n_topics"))
        return _reply(summary)

    @app.get("/records")
    async def records(limit: int = 50, offset: int = 0) -> Response:
        return _reply(engine.records_page(limit=limit, offset=offset))

    @app.get("/screening/{record_id}")
    async def screening(record_id: str) -> Response:
        return _reply(engine.screening_view(record_id))

    @app.post("/screening/{record_id}/decision")
    async def decision(record_id: str, request: Request) -> Response:
        body = await _body(request)
        return _reply(engine.submit_decision(record_id, body))

    @app.get("/topics")
    async def topics() -> Response:
        return _reply(engine.topics_view())

    @app.get("/topics/trends")
    async def topic_trends(
        start: Optional[int] = None, end: Optional[int] = None
    ) -> Response:
        return _reply(engine.trends_view(start=start, end=end))

    @app.get("/topics/{topic_id}/terms")
    async def topic_terms(topic_id: int, n: int = 10) -> Response:
        return _reply(engine.topic_terms(topic_id, n=n))

    @app.post("/query")
    async def query(request: Request) -> Response:
        body = await _body(request)
        question = body.get("question", "")
        return _reply(engine.query(question, k=body.get("k")))

    @app.post("/graph/query")
    async def graph_query(request: Request) -> Response:
        body = await _body(request)
        return _reply(engine.graph_query(body))

    @app.get("/metrics")
    async def metrics() -> Response:
        return _reply(engine.metrics_view())

    @app.get("/audit")
    async def audit(limit: Optional[int] = None, kind: Optional[str] = None) -> Response:
        return _reply(engine.audit_view(limit=limit, kind=kind))

    @app.get("/health")
    async def health() -> Response:
        return _reply(engine.health())

    return app
