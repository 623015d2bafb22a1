"""FastAPI application exposing POST /embed and GET /info.

The model loads in a background thread after startup; until it is ready
both endpoints answer 503 so clients can retry. Contract violations
(empty or oversized input) are 400; malformed request bodies are
rejected by schema validation with 422.
"""

import logging
import threading
from contextlib import asynccontextmanager
from typing import Callable, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ServiceConfig, from_env
from .encoders import Encoder, build_encoder

logger = logging.getLogger("embedsvc")


class EmbedRequest(BaseModel):
    texts: list[str]
    # scheduling hint only; the server encodes each request in one batch
    batch_size: Optional[int] = None


class _State:
    def __init__(self):
        self.encoder: Encoder | None = None
        self.error: str | None = None
        self.lock = threading.Lock()
        self.requests = 0
        self.texts = 0
        self.truncated_texts = 0


def create_app(
    cfg: ServiceConfig | None = None,
    encoder_factory: Callable[[], Encoder] | None = None,
) -> FastAPI:
    cfg = cfg or from_env()
    factory = encoder_factory or (lambda: build_encoder(cfg))
    state = _State()

    def load():
        try:
            encoder = factory()
        except Exception as exc:
            state.error = str(exc)
            logger.error("model load failed: %s", exc)
            return
        state.encoder = encoder
        logger.info("model %s ready, dim %d", encoder.model_id, encoder.dim)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        threading.Thread(target=load, daemon=True).start()
        yield

    app = FastAPI(title="embedsvc", lifespan=lifespan)
    app.state.service = state
    app.state.config = cfg

    def bad_request(detail: str) -> JSONResponse:
        return JSONResponse({"detail": detail}, status_code=400)

    def unavailable() -> JSONResponse:
        detail = f"model failed to load: {state.error}" if state.error else "model is loading"
        return JSONResponse({"detail": detail}, status_code=503, headers={"Retry-After": "1"})

    @app.post("/embed")
    def embed(req: EmbedRequest):
        encoder = state.encoder
        if encoder is None:
            return unavailable()
        if not req.texts:
            return bad_request("texts must be a non-empty list")
        if len(req.texts) > cfg.max_batch:
            return bad_request(f"batch of {len(req.texts)} exceeds max_batch {cfg.max_batch}")
        for i, text in enumerate(req.texts):
            if not text.strip():
                return bad_request(f"text {i} is empty")
            if len(text) > cfg.max_chars:
                return bad_request(f"text {i} has {len(text)} characters, limit {cfg.max_chars}")
        result = encoder.encode(req.texts)
        with state.lock:
            state.requests += 1
            state.texts += len(req.texts)
            state.truncated_texts += result.truncated
        return {
            "dim": encoder.dim,
            "vectors": result.vectors.tolist(),
            "model": encoder.model_id,
        }

    @app.get("/info")
    def info():
        encoder = state.encoder
        if encoder is None:
            return unavailable()
        with state.lock:
            stats = {
                "requests": state.requests,
                "texts": state.texts,
                "truncated_texts": state.truncated_texts,
            }
        return {
            "model": encoder.model_id,
            "dim": encoder.dim,
            "max_tokens": encoder.max_tokens,
            "pooling": cfg.pooling,
            "max_batch": cfg.max_batch,
            "max_chars": cfg.max_chars,
            "stats": stats,
        }

    return app
