"""Server configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class ServeConfig:
    """Deployment knobs: which models to load and how hard to drive them."""

    engine: str = "toy"  # "toy" or "hf"
    generator_model: str | None = None
    scorer_model: str | None = None
    embedder_model: str | None = None
    device: str = "cpu"
    max_batch: int = 8
    max_new_tokens: int = 256
    max_n_beams: int = 200
    port: int = 8500
    host: str = "127.0.0.1"
    lexicon_path: str | None = None  # toy engine only
    src_lang: str = "en"
    tgt_lang: str = "es"

    def validate(self) -> "ServeConfig":
        if self.engine not in ("toy", "hf"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.max_batch < 1 or self.max_new_tokens < 1 or self.max_n_beams < 1:
            raise ValueError("max_batch, max_new_tokens, max_n_beams must be >= 1")
        if self.engine == "hf" and not (
            self.generator_model or self.scorer_model or self.embedder_model
        ):
            raise ValueError("hf engine needs at least one model id configured")
        return self
