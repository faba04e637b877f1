"""Run configuration and all-at-once validation."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ConfigurationError

METHODS = (
    "tprojection",
    "ngram+select",
    "most-probable",
    "oracle",
    "alignment",
    "span-translation",
)
SCORERS = ("translation", "embedding")
CANDIDATE_SOURCES = ("generator", "ngram")

_NEEDS_GENERATOR = {"tprojection", "most-probable", "span-translation"}
_NEEDS_SCORER = {"tprojection", "ngram+select", "oracle"}


@dataclass
class RunConfig:
    method: str = "tprojection"
    n_beams: int = 100
    batch_size: int = 32
    endpoint: str | None = None
    categories_path: str | None = None
    src_lang: str = "en"
    tgt_lang: str = "es"
    seed: int = 0
    cache_dir: str | None = None
    alignments_path: str | None = None
    gold_path: str | None = None
    scorer: str = "translation"
    candidate_source: str = "generator"
    ngram_fallback: bool = False
    workers: int = 1
    max_new_tokens: int = 128

    def needs_generator(self) -> bool:
        if self.method in _NEEDS_GENERATOR:
            return True
        return self.method == "oracle" and self.candidate_source == "generator"

    def needs_scorer(self) -> bool:
        return self.method in _NEEDS_SCORER

    def problems(self) -> list[str]:
        errors = []
        if self.method not in METHODS:
            errors.append(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.scorer not in SCORERS:
            errors.append(f"unknown scorer {self.scorer!r}; choose from {', '.join(SCORERS)}")
        if self.candidate_source not in CANDIDATE_SOURCES:
            errors.append(
                f"unknown candidate source {self.candidate_source!r}; "
                f"choose from {', '.join(CANDIDATE_SOURCES)}"
            )
        for name in ("n_beams", "batch_size", "workers", "max_new_tokens"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be >= 1")
        if self.method == "alignment" and not self.alignments_path:
            errors.append("method 'alignment' requires --alignments")
        if self.method == "oracle" and not self.gold_path:
            errors.append("method 'oracle' requires --gold")
        if (self.needs_generator() or self.needs_scorer()) and not self.endpoint:
            errors.append(f"method {self.method!r} requires --endpoint")
        return errors

    def validate(self) -> "RunConfig":
        errors = self.problems()
        if errors:
            raise ConfigurationError("\n".join(errors))
        return self

    def to_dict(self) -> dict:
        return asdict(self)
