"""Pydantic request/response models for the projection service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..config import RunConfig


class SpanModel(BaseModel):
    start: int
    end: int
    category: str


class SentenceModel(BaseModel):
    id: str
    tokens: list[str]
    spans: list[SpanModel] = Field(default_factory=list)


class PairModel(BaseModel):
    id: str
    source_tokens: list[str]
    source_spans: list[SpanModel] = Field(default_factory=list)
    target_tokens: list[str]
    alignment: str | None = None
    gold_spans: list[SpanModel] | None = None


class ProjectConfigModel(BaseModel):
    method: str = "tprojection"
    n_beams: int = 100
    batch_size: int = 32
    endpoint: str | None = None
    src_lang: str = "en"
    tgt_lang: str = "es"
    seed: int = 0
    scorer: str = "translation"
    candidate_source: str = "generator"
    ngram_fallback: bool = False
    max_new_tokens: int = 128

    def to_run_config(self, default_endpoint: str | None) -> RunConfig:
        return RunConfig(
            method=self.method,
            n_beams=self.n_beams,
            batch_size=self.batch_size,
            endpoint=self.endpoint or default_endpoint,
            src_lang=self.src_lang,
            tgt_lang=self.tgt_lang,
            seed=self.seed,
            scorer=self.scorer,
            candidate_source=self.candidate_source,
            ngram_fallback=self.ngram_fallback,
            max_new_tokens=self.max_new_tokens,
            alignments_path="inline" if self.method == "alignment" else None,
            gold_path="inline" if self.method == "oracle" else None,
        )


class ProjectRequest(BaseModel):
    pairs: list[PairModel]
    config: ProjectConfigModel = Field(default_factory=ProjectConfigModel)


class UnassignedModel(BaseModel):
    span_index: int
    reason: str


class ProjectedSentenceModel(BaseModel):
    id: str
    tokens: list[str]
    spans: list[SpanModel]
    bio: list[str]
    unassigned: list[UnassignedModel]


class ProjectResponse(BaseModel):
    sentences: list[ProjectedSentenceModel]
    cache: dict[str, int]


class EvaluateRequest(BaseModel):
    predicted: list[SentenceModel]
    gold: list[SentenceModel]


class CategoryReportModel(BaseModel):
    category: str
    tp: int
    fp: int
    fn: int
    p: float
    r: float
    f1: float


class EvaluateResponse(BaseModel):
    categories: list[CategoryReportModel]
    micro: CategoryReportModel
    sentences: int


class HealthResponse(BaseModel):
    status: str
    version: str
    methods: list[str]
    default_endpoint: str | None
