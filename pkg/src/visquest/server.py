"""HTTP service hosting the question/answer loop.

Readers share the in-memory knowledge base freely; every mutation happens
under one lock and is flushed to disk before the response goes out, so an
accepted answer survives a restart. A static directory (the browser UI)
can be mounted under / next to the JSON API.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import ConflictError, InvalidInputError, NotFoundError, VisquestError
from .images import png_bytes
from .pipeline import (KnowledgeBase, PipelineConfig, PipelineModels,
                       acquisition_stats, ingest_answer, run_batch, save_kb)


class AnswerBody(BaseModel):
    record_id: str
    answer: str | None = None
    no_answer: bool = False
    rating: int | None = None


def _error_response(status: int, exc: Exception) -> JSONResponse:
    code = exc.code if isinstance(exc, VisquestError) else "internal-error"
    return JSONResponse(status_code=status,
                        content={"error": code, "detail": str(exc)})


def create_app(config: PipelineConfig, models: PipelineModels,
               kb: KnowledgeBase, kb_path, images: dict,
               static_dir=None) -> FastAPI:
    """Wire the API over a prepared pipeline.

    images maps image_id to an RGB array. Images without a KB record yet
    are run through the pipeline once at startup; answered exemplars from
    a previous session suppress re-asking via the usual dedup rule.
    """
    app = FastAPI(title="visquest", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    seen = {rec.image_id for rec in kb.records}
    fresh = [(iid, img) for iid, img in sorted(images.items()) if iid not in seen]
    if fresh:
        run_batch(fresh, config, models, kb)
        save_kb(kb, kb_path)

    @app.get("/api/next")
    def next_question():
        with lock:
            pending = kb.pending()
            if not pending:
                return Response(status_code=204)
            rec = pending[0]
            image = images.get(rec.image_id)
            height, width = image.shape[:2] if image is not None else (None, None)
            return {
                "record_id": rec.record_id,
                "image_id": rec.image_id,
                "image_url": f"/api/image/{rec.image_id}",
                "width": width,
                "height": height,
                "region": list(rec.region),
                "question": rec.question,
                "tokens": list(rec.tokens),
                "target_word": rec.target_word,
                "mode": rec.mode,
                "remaining": len(pending),
            }

    @app.post("/api/answer")
    def submit_answer(body: AnswerBody):
        with lock:
            try:
                rec = kb.record(body.record_id)
                before = (rec.answer, rec.no_answer, rec.rating, rec.answered_at)
                ingest_answer(kb, body.record_id, answer=body.answer,
                              no_answer=body.no_answer, rating=body.rating)
            except NotFoundError as exc:
                return _error_response(404, exc)
            except ConflictError as exc:
                return _error_response(409, exc)
            except InvalidInputError as exc:
                return _error_response(400, exc)
            try:
                save_kb(kb, kb_path)
            except OSError as exc:
                # roll the in-memory record back so memory matches disk
                rec.answer, rec.no_answer, rec.rating, rec.answered_at = before
                return _error_response(500, exc)
            return {"ok": True, "record": rec.to_dict()}

    @app.get("/api/stats")
    def stats():
        with lock:
            return acquisition_stats(kb, models.taxonomy).to_dict()

    @app.get("/api/image/{image_id}")
    def image(image_id: str):
        img = images.get(image_id)
        if img is None:
            return _error_response(404, NotFoundError(f"no image {image_id!r}"))
        return Response(content=png_bytes(img), media_type="image/png")

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")
    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
