from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import Backend, make_backend
from .config import ServiceConfig


class ScorePair(BaseModel):
    premise: str
    hypothesis: str


class ScoreRequest(BaseModel):
    pairs: list[ScorePair]


class ScoreResponse(BaseModel):
    entailment: list[float]


class BackendHolder:
    """Loads the backend on a worker thread so the HTTP layer can accept
    (and answer 503) while a large checkpoint is still coming up."""

    def __init__(self, factory: Callable[[], Backend]) -> None:
        self._factory = factory
        self.backend: Backend | None = None
        self.error: str | None = None
        self.ready = threading.Event()
        self.infer_lock = threading.Lock()

    def start(self) -> None:
        threading.Thread(target=self._load, daemon=True).start()

    def _load(self) -> None:
        try:
            self.backend = self._factory()
        except Exception as exc:  # surfaced through /healthz and /score
            self.error = f"{type(exc).__name__}: {exc}"
        finally:
            self.ready.set()


def create_app(
    config: ServiceConfig, backend_factory: Callable[[], Backend] | None = None
) -> FastAPI:
    if backend_factory is None:
        backend_factory = lambda: make_backend(config.model, device=config.device)
    holder = BackendHolder(backend_factory)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        holder.start()
        yield

    app = FastAPI(title="nli-service", lifespan=lifespan)
    app.state.holder = holder
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"detail": [str(e.get("msg", e)) for e in exc.errors()]},
        )

    def _require_backend() -> Backend:
        if not holder.ready.is_set():
            raise HTTPException(status_code=503, detail="model loading")
        if holder.error is not None:
            raise HTTPException(
                status_code=500, detail=f"model failed to load: {holder.error}"
            )
        assert holder.backend is not None
        return holder.backend

    @app.post("/score", response_model=ScoreResponse)
    async def score(request: ScoreRequest) -> ScoreResponse:
        backend = _require_backend()
        if len(request.pairs) > config.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.pairs)} exceeds max of {config.max_batch}",
            )
        if not request.pairs:
            return ScoreResponse(entailment=[])
        pairs = [(p.premise, p.hypothesis) for p in request.pairs]
        try:
            with holder.infer_lock:
                scores = backend.score(pairs)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"inference failed: {exc}")
        return ScoreResponse(entailment=scores)

    @app.get("/healthz")
    async def healthz() -> dict:
        backend = _require_backend()
        return {
            "model": backend.model,
            "truncation": {"strategy": "model_default", "max_length": backend.max_length},
            "labels": list(backend.labels),
            "entailment_index": backend.entailment_index,
        }

    return app
