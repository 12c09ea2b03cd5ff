"""HTTP JSON API for the review workflow.

Endpoints (all bodies JSON, errors as ``{code, message}``):

    GET  /api/taxonomy                  -> taxonomy tree
    GET  /api/tasks/next?annotator=ID   -> next task, or 204 when idle
    POST /api/tasks/{task_id}/verdict   -> 201 on success
    POST /api/retrain                   -> new model version id
    GET  /api/metrics/{version}/{batch} -> monitoring snapshot
    GET  /api/fairness/{version}/{batch}?a=GROUP&b=GROUP -> test + summary

When a static directory is configured, the review UI build is served from
the root path.
"""
from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .fairness import FairnessError, NoCommonConcepts
from .taxonomy import NotFound, TaxonomyError
from .workflow import (
    IncompleteDecisions,
    InvalidVerdict,
    NoNewVerdicts,
    NoVerdictsForBatch,
    Store,
    UnknownModelVersion,
    UnknownTask,
    WorkflowError,
)

_STATUS_BY_ERROR: tuple[tuple[type[Exception], int], ...] = (
    (UnknownTask, 404),
    (UnknownModelVersion, 404),
    (NoVerdictsForBatch, 404),
    (NotFound, 404),
    (IncompleteDecisions, 422),
    (InvalidVerdict, 422),
    (NoCommonConcepts, 422),
    (NoNewVerdicts, 409),
    (TaxonomyError, 422),
    (FairnessError, 422),
    (WorkflowError, 400),
)


class VerdictPayload(BaseModel):
    annotator_id: str
    decisions: dict[str, str]
    added_concepts: list[str] = Field(default_factory=list)


class RetrainPayload(BaseModel):
    batch_id: str | None = None


def create_app(store: Store, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="factorcode review API", docs_url=None, redoc_url=None)

    def error_response(exc: Exception) -> JSONResponse:
        for etype, status in _STATUS_BY_ERROR:
            if isinstance(exc, etype):
                return JSONResponse(
                    status_code=status,
                    content={"code": etype.__name__, "message": str(exc)},
                )
        raise exc

    @app.exception_handler(WorkflowError)
    @app.exception_handler(TaxonomyError)
    @app.exception_handler(FairnessError)
    async def handle_domain_error(request: Request, exc: Exception) -> JSONResponse:
        return error_response(exc)

    @app.get("/api/taxonomy")
    def get_taxonomy() -> dict:
        return {"version": store.taxonomy.version, "roots": store.taxonomy.to_tree()}

    @app.get("/api/tasks/next")
    def get_next_task(annotator: str = Query(...)) -> Response:
        task = store.next_task(annotator)
        if task is None:
            return Response(status_code=204)
        task["queue"] = store.counts()
        for chip in task["predicted"]:
            chip["label"] = store.model_for(task["model_version"]).label_of(chip["code"])
        return JSONResponse(task)

    @app.post("/api/tasks/{task_id}/verdict", status_code=201)
    def post_verdict(task_id: str, payload: VerdictPayload) -> dict:
        task, example = store.record_verdict(
            task_id, payload.annotator_id, payload.decisions,
            payload.added_concepts)
        return {
            "task_id": task_id,
            "status": task["status"],
            "derived_labels": sorted(example.concepts) if example else [],
            "queue": store.counts(),
        }

    @app.post("/api/retrain")
    def post_retrain(payload: RetrainPayload | None = None) -> dict:
        info = store.trigger_retrain(
            batch_id=payload.batch_id if payload else None)
        return {"version": info.version, "path": info.path,
                "training_batches": list(info.training_batches)}

    @app.get("/api/metrics/{version}/{batch}")
    def get_metrics(version: int, batch: str) -> dict:
        snapshot = store.latest_snapshot(version, batch)
        if snapshot is None:
            snapshot = store.snapshot_metrics(version, batch)
        return snapshot

    @app.get("/api/fairness/{version}/{batch}")
    def get_fairness(version: int, batch: str,
                     a: str = Query(...), b: str = Query(...)) -> dict:
        comparison = store.fairness_comparison(version, batch, a, b)
        out = asdict(comparison)
        out["result"]["w_rounded"] = round(comparison.result.w, 1)
        out["result"]["p_rounded"] = round(comparison.result.p_value, 2)
        if comparison.result.z is not None:
            out["result"]["z_rounded"] = round(comparison.result.z, 3)
        return out

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "queue": store.counts(),
                "current_version": store.current_version}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app


def serve(store: Store, host: str = "127.0.0.1", port: int = 8765,
          static_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(store, static_dir), host=host, port=port,
                log_level="warning")
