"""FastAPI service wrapping the core projection pipeline for JSON clients."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import METHODS
from ..corpus import CategoryMap, LabeledSentence, ParallelPair, Span, spans_to_bio
from ..errors import ConfigurationError, SpanProjectError
from ..evaluation import span_f1
from ..pipeline import project_pair, _resolve_backends
from ..scoring import ScoreCache
from .schemas import (
    CategoryReportModel,
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    PairModel,
    ProjectedSentenceModel,
    ProjectRequest,
    ProjectResponse,
    SentenceModel,
    SpanModel,
)


def _to_sentence(model: SentenceModel | PairModel, tokens_attr: str, spans_attr: str) -> LabeledSentence:
    tokens = getattr(model, tokens_attr)
    spans = tuple(
        Span.over(tokens, s.start, s.end, s.category)
        for s in sorted(getattr(model, spans_attr) or [], key=lambda s: (s.start, s.end))
    )
    try:
        return LabeledSentence(model.id, tuple(tokens), spans)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def create_app(default_endpoint: str | None = None) -> FastAPI:
    app = FastAPI(title="spanproject", version=__version__)

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            version=__version__,
            methods=list(METHODS),
            default_endpoint=default_endpoint,
        )

    @app.post("/v1/project", response_model=ProjectResponse)
    def project(request: ProjectRequest) -> ProjectResponse:
        config = request.config.to_run_config(default_endpoint)
        problems = config.problems()
        if problems:
            raise HTTPException(status_code=400, detail=problems)
        try:
            backends = _resolve_backends(config)
        except ConfigurationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        cache = ScoreCache()
        sentences = []
        for item in request.pairs:
            source = _to_sentence(item, "source_tokens", "source_spans")
            try:
                pair = ParallelPair(source, tuple(item.target_tokens), item.id)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            category_map = CategoryMap.identity(
                dict.fromkeys(s.category for s in source.spans)
            )
            gold = None
            if config.method == "oracle":
                if item.gold_spans is None:
                    raise HTTPException(
                        status_code=400,
                        detail=f"pair {item.id}: method 'oracle' needs gold_spans",
                    )
                gold = _to_sentence(item, "target_tokens", "gold_spans")
            if config.method == "alignment" and item.alignment is None:
                raise HTTPException(
                    status_code=400,
                    detail=f"pair {item.id}: method 'alignment' needs an alignment string",
                )
            try:
                outcome = project_pair(
                    pair,
                    config,
                    backends,
                    cache,
                    category_map,
                    gold=gold,
                    alignment_line=item.alignment,
                )
            except SpanProjectError as exc:
                raise HTTPException(status_code=502, detail=str(exc)) from exc
            sentence = outcome.sentence
            sentences.append(
                ProjectedSentenceModel(
                    id=sentence.id,
                    tokens=list(sentence.tokens),
                    spans=[
                        SpanModel(start=s.start, end=s.end, category=s.category)
                        for s in sentence.spans
                    ],
                    bio=spans_to_bio(sentence),
                    unassigned=[
                        {"span_index": idx, "reason": reason}
                        for idx, reason in outcome.assignment.unassigned
                    ],
                )
            )
        return ProjectResponse(sentences=sentences, cache=cache.stats())

    @app.post("/v1/evaluate", response_model=EvaluateResponse)
    def evaluate(request: EvaluateRequest) -> EvaluateResponse:
        predicted = [_to_sentence(s, "tokens", "spans") for s in request.predicted]
        gold = [_to_sentence(s, "tokens", "spans") for s in request.gold]
        try:
            report = span_f1(predicted, gold)
        except SpanProjectError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        data = report.to_json_dict()
        return EvaluateResponse(
            categories=[CategoryReportModel(**row) for row in data["categories"]],
            micro=CategoryReportModel(**data["micro"]),
            sentences=data["sentences"],
        )

    return app
