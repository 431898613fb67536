"""HTTP JSON API for collecting flower annotations.

Endpoints:
    GET  /api/tasks/next?annotator=<id> -> 200 {task_id, image_url, classes[7]} | 204
    GET  /api/images/<task_id>          -> PNG bytes
    POST /api/annotations               -> 201 | 404 | 409 | 422
    GET  /api/progress                  -> {open, complete, total_votes}
    GET  /api/export                    -> crowd-label manifest (operator token)

The export token is read from the EXPORT_TOKEN_ENV environment variable;
export stays disabled when the variable is unset. A static directory
(the game client bundle) can be mounted at the root.
"""
from __future__ import annotations

import logging
import os
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request, Response
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, field_validator

from ..labels import FLOWER_CLASS_NAMES
from .store import (
    AnnotationStore,
    DuplicateVoteError,
    InvalidClassError,
    TaskClosedError,
    UnknownTaskError,
)

log = logging.getLogger(__name__)

EXPORT_TOKEN_ENV = "BLOOMSERVE_EXPORT_TOKEN"


class AnnotationIn(BaseModel):
    task_id: str
    annotator: str
    flower_class: str
    client_timestamp: str | None = None

    @field_validator("flower_class")
    @classmethod
    def _known_class(cls, v: str) -> str:
        if v not in FLOWER_CLASS_NAMES:
            raise ValueError(f"unknown flower class {v!r}")
        return v

    @field_validator("annotator")
    @classmethod
    def _non_empty(cls, v: str) -> str:
        if not v:
            raise ValueError("annotator must be non-empty")
        return v


def create_app(store: AnnotationStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="flower annotation service")

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(min_length=1)):
        task = store.next_task(annotator)
        if task is None:
            return Response(status_code=204)
        return task.to_public_dict(image_url=f"/api/images/{task.task_id}")

    @app.get("/api/images/{task_id}")
    def task_image(task_id: str):
        try:
            task = store.task(task_id)
        except UnknownTaskError:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        return FileResponse(task.image_path, media_type="image/png")

    @app.post("/api/annotations", status_code=201)
    def submit_annotation(body: AnnotationIn):
        try:
            store.submit(
                task_id=body.task_id,
                annotator_id=body.annotator,
                flower_class=body.flower_class,
                client_timestamp=body.client_timestamp,
            )
        except UnknownTaskError:
            raise HTTPException(status_code=404, detail=f"unknown task {body.task_id!r}")
        except DuplicateVoteError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except TaskClosedError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except InvalidClassError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "task_id": body.task_id,
            "votes": store.vote_count(body.task_id),
            "task_complete": store.is_complete(body.task_id),
        }

    @app.get("/api/progress")
    def progress():
        return store.progress()

    @app.get("/api/export")
    def export(request: Request):
        expected = os.environ.get(EXPORT_TOKEN_ENV)
        if not expected:
            raise HTTPException(status_code=403, detail="export disabled: no token configured")
        token = request.headers.get("x-export-token") or request.query_params.get("token")
        if token != expected:
            raise HTTPException(status_code=403, detail="invalid export token")
        return PlainTextResponse(store.export_jsonl(), media_type="application/x-ndjson")

    @app.exception_handler(ValueError)
    def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="static")

    return app


def serve(
    data_dir: str | Path,
    port: int = 8000,
    host: str = "127.0.0.1",
    static_dir: str | Path | None = None,
) -> None:
    import uvicorn

    store = AnnotationStore(data_dir)
    app = create_app(store, static_dir=static_dir)
    log.info("serving annotation API on %s:%d (data: %s)", host, port, data_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
