"""FastAPI application: /classify, /health, /v1/vocab, /v1/next-distribution.

All models are built inside :func:`create_app`, so a backend that cannot
load aborts startup instead of failing on the first request.  After
startup the application holds only immutable state; nothing from one
request is visible to the next, and identical requests produce identical
responses.
"""

from __future__ import annotations

from dataclasses import dataclass

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel

from . import PROTOCOL_VERSION, __version__
from .backends import build_classifier
from .tokenmodel import load_default_model, top_k_truncate


@dataclass(frozen=True)
class Settings:
    classifier: str = "lexical"
    auth_token: str | None = None
    max_text_chars: int = 10_000
    max_labels: int = 256
    max_context_tokens: int = 512
    default_top_k: int = 512


class ClassifyRequest(BaseModel):
    text: str
    labels: list[str]


class DistributionRequest(BaseModel):
    context: list[int]
    top_k: int | None = None
    truncate: bool = False


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings()
    classifier = build_classifier(settings.classifier)
    model = load_default_model()

    app = FastAPI(title="classifier-service", version=__version__)

    def require_token(authorization: str | None = Header(default=None)) -> None:
        if settings.auth_token is None:
            return
        if authorization != f"Bearer {settings.auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    guarded = [Depends(require_token)]

    @app.get("/health")
    def health() -> dict:
        return {
            "protocol": PROTOCOL_VERSION,
            "model": classifier.model_id,
            "service": __version__,
        }

    @app.post("/classify", dependencies=guarded)
    def classify(request: ClassifyRequest) -> dict:
        if not request.labels:
            raise HTTPException(status_code=422, detail="labels must be a non-empty list")
        if len(request.labels) > settings.max_labels:
            raise HTTPException(
                status_code=413,
                detail=f"label list exceeds the {settings.max_labels} label limit",
            )
        if len(request.text) > settings.max_text_chars:
            raise HTTPException(
                status_code=413,
                detail=f"text exceeds the {settings.max_text_chars} character limit",
            )
        index, scores = classifier.classify(request.text, request.labels)
        return {"index": index, "scores": scores}

    @app.get("/v1/vocab", dependencies=guarded)
    def vocab() -> dict:
        return {"tokens": model.tokens, "stop_id": model.stop_id}

    @app.post("/v1/next-distribution", dependencies=guarded)
    def next_distribution(request: DistributionRequest) -> dict:
        if len(request.context) > settings.max_context_tokens:
            raise HTTPException(
                status_code=413,
                detail=f"context exceeds the {settings.max_context_tokens} token limit",
            )
        size = model.vocab_size
        if any(tid < 0 or tid >= size for tid in request.context):
            raise HTTPException(
                status_code=422,
                detail=f"context contains token ids outside the vocabulary (size {size})",
            )
        if request.top_k is not None and request.top_k < 1:
            raise HTTPException(status_code=422, detail="top_k must be at least 1")
        probs = model.next_distribution(request.context)
        k = request.top_k
        if k is None and request.truncate:
            k = settings.default_top_k
        if k is None:
            return {"probs": [float(p) for p in probs]}
        ids, kept, residual = top_k_truncate(probs, k)
        return {"indices": ids, "probs": kept, "residual_mass": residual}

    return app
