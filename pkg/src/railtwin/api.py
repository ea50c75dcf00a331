"""JSON-over-HTTP gateway. The console and the CLI's service mode consume the
same surface; errors are serialized as ApiError payloads."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import EngineError
from .service import EngineService

logger = logging.getLogger(__name__)

_STATUS_BY_CODE = {
    "validation": 400,
    "not_found": 404,
    "transport": 503,
    "backend": 502,
    "internal": 500,
}


def _error_response(code: str, message: str, detail: Any = None) -> JSONResponse:
    return JSONResponse(
        status_code=_STATUS_BY_CODE.get(code, 500),
        content={"code": code, "message": message, "detail": detail},
    )


class InferRequest(BaseModel):
    text: Optional[str] = None
    image_refs: list[str] = Field(default_factory=list)
    video_ref: Optional[str] = None
    intent: str = "analyze"
    fps: float = 1.0


class FeedbackRequest(BaseModel):
    text: Optional[str] = None
    score: Optional[int] = None


class DatasetGenerateRequest(BaseModel):
    captions: list[dict[str, Any]]
    k_max: Optional[int] = None
    similarity_threshold: Optional[float] = None
    lambda_: Optional[float] = Field(default=None, alias="lambda")

    model_config = {"populate_by_name": True}


def create_app(service: EngineService, frontend_dist: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="railtwin gateway", version="0.1.0")

    @app.exception_handler(EngineError)
    async def engine_error_handler(_: Request, exc: EngineError) -> JSONResponse:
        return _error_response(exc.code, exc.message, exc.detail)

    @app.exception_handler(RequestValidationError)
    async def request_validation_handler(_: Request, exc: RequestValidationError) -> JSONResponse:
        return _error_response("validation", "request body failed validation", exc.errors())

    @app.post("/api/infer")
    def api_infer(
        body: InferRequest, x_request_id: Optional[str] = Header(default=None)
    ) -> dict[str, Any]:
        return service.infer(
            text=body.text,
            image_refs=tuple(body.image_refs),
            video_ref=body.video_ref,
            intent=body.intent,
            fps=body.fps,
            request_id=x_request_id,
        )

    @app.post("/api/feedback")
    def api_feedback(
        body: FeedbackRequest, x_request_id: Optional[str] = Header(default=None)
    ) -> dict[str, Any]:
        return service.feedback(text=body.text, score=body.score, request_id=x_request_id)

    @app.get("/api/loop/state")
    def api_loop_state() -> dict[str, Any]:
        return service.loop_state_snapshot()

    @app.get("/api/loop/report")
    def api_loop_report() -> dict[str, Any]:
        return service.loop_report()

    @app.post("/api/dataset/generate")
    def api_dataset_generate(
        body: DatasetGenerateRequest, x_request_id: Optional[str] = Header(default=None)
    ) -> dict[str, Any]:
        return service.dataset_generate(
            captions=body.captions,
            k_max=body.k_max,
            similarity_threshold=body.similarity_threshold,
            lambda_=body.lambda_,
            request_id=x_request_id,
        )

    @app.get("/api/dataset/{dataset_id}")
    def api_dataset(dataset_id: str) -> dict[str, Any]:
        return {"dataset_id": dataset_id, "entries": service.dataset_rows(dataset_id)}

    @app.get("/api/metrics/latency")
    def api_latency() -> dict[str, Any]:
        return {"groups": service.latency_rows()}

    @app.get("/api/finetune/jobs")
    def api_finetune_jobs() -> dict[str, Any]:
        return {"jobs": service.finetune_jobs()}

    media_dir = service.data_dir / "media"
    media_dir.mkdir(parents=True, exist_ok=True)
    app.mount("/media", StaticFiles(directory=media_dir), name="media")
    if frontend_dist is not None and Path(frontend_dist).exists():
        app.mount("/", StaticFiles(directory=frontend_dist, html=True), name="console")
    return app
