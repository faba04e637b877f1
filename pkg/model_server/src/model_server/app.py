"""HTTP surface: /v1/generate, /v1/score, /v1/embed, /v1/health."""

from __future__ import annotations

import math

from fastapi import FastAPI, HTTPException
from pydantic import AliasChoices, BaseModel, Field

from .batching import MicroBatcher
from .config import ServeConfig
from .toy import EMBED, GENERATE, SCORE, ToyEngine

__version__ = "0.1.0"


class GenerateRequest(BaseModel):
    # both field names are accepted on the wire
    prompt: str = Field(validation_alias=AliasChoices("prompt", "prompt_text"))
    n_beams: int = Field(default=1, ge=1)
    max_new_tokens: int = Field(default=64, ge=1)


class Beam(BaseModel):
    text: str
    logprob: float


class ScoreRequest(BaseModel):
    condition_text: str
    scored_text: str
    source_lang: str
    target_lang: str


class ScoreResponse(BaseModel):
    token_logprobs: list[float]


class EmbedRequest(BaseModel):
    text: str
    lang: str


class EmbedResponse(BaseModel):
    vector: list[float]


class HealthResponse(BaseModel):
    status: str
    capabilities: list[str]
    dims: int | None
    model_ids: dict[str, str]
    error: str | None = None


def build_engine(config: ServeConfig):
    if config.engine == "toy":
        return ToyEngine(config)
    from .hf import HFEngine

    return HFEngine(config)


def create_app(config: ServeConfig, engine=None) -> FastAPI:
    config.validate()
    load_error: str | None = None
    if engine is None:
        try:
            engine = build_engine(config)
        except Exception as exc:
            engine = None
            load_error = f"{type(exc).__name__}: {exc}"

    app = FastAPI(title="model-server", version=__version__)
    score_batcher = (
        MicroBatcher(engine.score_batch, config.max_batch) if engine is not None else None
    )
    embed_batcher = (
        MicroBatcher(engine.embed_batch, config.max_batch)
        if engine is not None and EMBED in engine.capabilities
        else None
    )

    def require(capability: str) -> None:
        if engine is None:
            raise HTTPException(status_code=503, detail=f"model load failed: {load_error}")
        if capability not in engine.capabilities:
            raise HTTPException(status_code=503, detail=f"capability {capability!r} not configured")

    def health() -> HealthResponse:
        return HealthResponse(
            status="ok" if engine is not None else "degraded",
            capabilities=sorted(engine.capabilities) if engine is not None else [],
            dims=getattr(engine, "embed_dims", None) if engine is not None else None,
            model_ids=getattr(engine, "model_ids", {}) if engine is not None else {},
            error=load_error,
        )

    app.get("/v1/health", response_model=HealthResponse)(health)
    app.get("/health", response_model=HealthResponse)(health)

    @app.post("/v1/generate", response_model=list[Beam])
    def generate(request: GenerateRequest) -> list[Beam]:
        require(GENERATE)
        if request.n_beams > config.max_n_beams:
            raise HTTPException(
                status_code=400,
                detail=f"n_beams {request.n_beams} exceeds configured max {config.max_n_beams}",
            )
        max_new = min(request.max_new_tokens, config.max_new_tokens)
        beams = engine.generate(request.prompt, request.n_beams, max_new)
        return [Beam(text=text, logprob=logprob) for text, logprob in beams]

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        require(SCORE)
        for lang in (request.source_lang, request.target_lang):
            if not engine.validate_lang(lang):
                raise HTTPException(status_code=400, detail=f"unsupported language code {lang!r}")
        try:
            logprobs = score_batcher.submit(
                (request.condition_text, request.scored_text, request.source_lang, request.target_lang)
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if any(not math.isfinite(x) for x in logprobs):
            raise HTTPException(status_code=500, detail="non-finite token logprob")
        return ScoreResponse(token_logprobs=list(logprobs))

    @app.post("/v1/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        require(EMBED)
        vector = embed_batcher.submit((request.text, request.lang))
        return EmbedResponse(vector=list(vector))

    return app
