"""Symmetrized normalized translation-probability similarity over a pluggable backend.

All aggregation happens in log space and is exponentiated once at the ratio
stage: long spans underflow in linear space. The probability of a string A
given a condition B is the length-normalized geometric mean of the backend's
per-token probabilities, ``exp(mean(token_logprobs))``. That is normalized by
the self-probability ``p(A|A)`` and symmetrized by averaging both directions:

    sim(A|B)  = p(A|B) / p(A|A)
    sim(A, B) = 0.5 * sim(A|B) + 0.5 * sim(B|A)
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

from .corpus import Span
from .errors import DegenerateScoreError
from .generation import CandidateGroup

CONDITIONAL_LOGPROBS = "conditional_logprobs"
EMBEDDINGS = "embeddings"

#: request tuple: (condition_text, scored_text, condition_lang, scored_lang)
LogprobRequest = tuple[str, str, str, str]


@runtime_checkable
class ScorerBackend(Protocol):
    """Anything that can return per-token conditional log-probabilities.

    ``token_logprobs`` scores ``scored_text`` (in ``scored_lang``) conditioned
    on ``condition_text`` (in ``condition_lang``) and returns one finite
    log-probability per model token of the scored text. Tokenization is owned
    by the backend. Backends that also embed expose EMBEDDINGS in
    ``capabilities`` and implement ``embed``.
    """

    capabilities: frozenset[str]

    def token_logprobs(
        self, condition_text: str, scored_text: str, condition_lang: str, scored_lang: str
    ) -> Sequence[float]: ...

    def embed(self, text: str, lang: str) -> Sequence[float]: ...


class ScoreCache:
    """Thread-safe cache of backend log-probability responses, keyed by full request."""

    def __init__(self):
        self._data: dict[LogprobRequest, tuple[float, ...]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: LogprobRequest) -> tuple[float, ...] | None:
        with self._lock:
            found = self._data.get(key)
            if found is None:
                self.misses += 1
            else:
                self.hits += 1
            return found

    def put(self, key: LogprobRequest, value: Sequence[float]) -> None:
        with self._lock:
            self._data[key] = tuple(value)

    def stats(self) -> dict[str, int]:
        with self._lock:
            return {"hits": self.hits, "misses": self.misses, "entries": len(self._data)}


def _fetch(backend: ScorerBackend, key: LogprobRequest, cache: ScoreCache | None) -> tuple[float, ...]:
    if cache is not None:
        cached = cache.get(key)
        if cached is not None:
            return cached
    value = tuple(backend.token_logprobs(*key))
    if cache is not None:
        cache.put(key, value)
    return value


def prefetch(
    backend: ScorerBackend,
    requests: Sequence[LogprobRequest],
    cache: ScoreCache,
    batch_size: int = 32,
) -> None:
    """Warm the cache for a batch of requests.

    Backends that tolerate concurrent in-flight requests (``concurrent_requests``
    attribute) are driven by a thread pool of ``batch_size`` workers; others
    are called sequentially.
    """
    todo = [key for key in dict.fromkeys(requests) if cache.get(key) is None]
    if not todo:
        return
    if getattr(backend, "concurrent_requests", False) and batch_size > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=batch_size) as pool:
            for key, value in zip(todo, pool.map(lambda k: backend.token_logprobs(*k), todo)):
                cache.put(key, tuple(value))
    else:
        for key in todo:
            cache.put(key, tuple(backend.token_logprobs(*key)))


def log_translation_prob(
    a: str,
    b: str,
    backend: ScorerBackend,
    a_lang: str,
    b_lang: str,
    cache: ScoreCache | None = None,
) -> float:
    """log p(a|b): arithmetic mean of per-token log-probabilities of ``a`` given ``b``."""
    if not a:
        raise ValueError("scored text must be non-empty")
    logprobs = _fetch(backend, (b, a, b_lang, a_lang), cache)
    if not logprobs:
        raise DegenerateScoreError(f"backend returned no token logprobs for {a!r}")
    return sum(logprobs) / len(logprobs)


def translation_prob(
    a: str,
    b: str,
    backend: ScorerBackend,
    a_lang: str,
    b_lang: str,
    cache: ScoreCache | None = None,
) -> float:
    """p(a|b): the length-normalized geometric mean of token probabilities, in (0, 1] for proper backends."""
    return math.exp(log_translation_prob(a, b, backend, a_lang, b_lang, cache))


def normalized_sim(
    a: str,
    b: str,
    backend: ScorerBackend,
    a_lang: str,
    b_lang: str,
    cache: ScoreCache | None = None,
) -> float:
    """sim(a|b) = p(a|b) / p(a|a); may exceed 1 when b conditions a better than a itself.

    The self-probability uses the string's own language on both sides of the
    request. A zero or non-finite normalizer raises DegenerateScoreError.
    """
    log_pab = log_translation_prob(a, b, backend, a_lang, b_lang, cache)
    log_paa = log_translation_prob(a, a, backend, a_lang, a_lang, cache)
    if not math.isfinite(log_paa):
        raise DegenerateScoreError(f"p(a|a) degenerate for {a!r}")
    ratio = math.exp(log_pab - log_paa)
    if not math.isfinite(ratio):
        raise DegenerateScoreError(f"sim({a!r}|{b!r}) overflows")
    return ratio


@dataclass(frozen=True)
class SimScore:
    """A symmetrized similarity value plus the four probabilities behind it.

    ``parts`` holds linear-space probabilities for auditability; for very long
    strings they may underflow to 0.0 even though ``value``, computed in log
    space, is well-defined.
    """

    value: float
    parts: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0 or not math.isfinite(self.value):
            raise DegenerateScoreError(f"invalid similarity value {self.value}")


def sym_sim(
    a: str,
    b: str,
    backend: ScorerBackend,
    a_lang: str,
    b_lang: str,
    cache: ScoreCache | None = None,
) -> SimScore:
    """sim(a, b) = 0.5 * sim(a|b) + 0.5 * sim(b|a), with all four probabilities recorded."""
    log_pab = log_translation_prob(a, b, backend, a_lang, b_lang, cache)
    log_paa = log_translation_prob(a, a, backend, a_lang, a_lang, cache)
    log_pba = log_translation_prob(b, a, backend, b_lang, a_lang, cache)
    log_pbb = log_translation_prob(b, b, backend, b_lang, b_lang, cache)
    if not math.isfinite(log_paa) or not math.isfinite(log_pbb):
        raise DegenerateScoreError(f"degenerate self-probability for {a!r} or {b!r}")
    value = 0.5 * math.exp(log_pab - log_paa) + 0.5 * math.exp(log_pba - log_pbb)
    return SimScore(
        value,
        {
            "p_a_given_b": math.exp(log_pab),
            "p_b_given_a": math.exp(log_pba),
            "p_a_given_a": math.exp(log_paa),
            "p_b_given_b": math.exp(log_pbb),
        },
    )


def embedding_sim(a: str, b: str, backend: ScorerBackend, a_lang: str, b_lang: str) -> float:
    """Cosine similarity of the two embedding vectors, in [-1, 1]."""
    va = list(backend.embed(a, a_lang))
    vb = list(backend.embed(b, b_lang))
    na = math.sqrt(sum(x * x for x in va))
    nb = math.sqrt(sum(x * x for x in vb))
    if na == 0.0 or nb == 0.0:
        raise DegenerateScoreError("zero embedding vector")
    return sum(x * y for x, y in zip(va, vb)) / (na * nb)


@dataclass
class ScoreTable:
    """Span x candidate matrix of similarity scores for one category.

    ``cells[i][j]`` scores span ``span_indices[i]`` against candidate ``j`` of
    the group; None marks a degenerate (invalid) cell, which loses to any
    valid cell during selection.
    """

    category: str
    span_indices: tuple[int, ...]
    group: CandidateGroup
    cells: list[list[SimScore | None]]
    invalid_cells: int = 0

    def score(self, row: int, col: int) -> SimScore | None:
        return self.cells[row][col]


def score_table(
    spans: Sequence[tuple[int, Span]],
    group: CandidateGroup,
    backend: ScorerBackend,
    src_lang: str,
    tgt_lang: str,
    cache: ScoreCache | None = None,
    batch_size: int = 32,
    scorer: str = "translation",
) -> ScoreTable:
    """Score every (source span, candidate) pair of one category.

    With a cache, all distinct backend requests for the table are prefetched
    in batches first, so self-probabilities are computed once per distinct
    string. ``scorer`` selects translation-probability similarity (default) or
    embedding cosine similarity.
    """
    if not spans or not group.candidates:
        raise ValueError("score_table needs at least one span and one candidate")
    for _, span in spans:
        if span.category != group.category:
            raise ValueError(
                f"span category {span.category!r} != group {group.category!r}"
            )
    if scorer == "translation" and cache is not None:
        requests: list[LogprobRequest] = []
        for _, span in spans:
            requests.append((span.surface, span.surface, src_lang, src_lang))
            for cand in group.candidates:
                requests.append((cand.text, span.surface, tgt_lang, src_lang))
                requests.append((span.surface, cand.text, src_lang, tgt_lang))
        for cand in group.candidates:
            requests.append((cand.text, cand.text, tgt_lang, tgt_lang))
        prefetch(backend, requests, cache, batch_size)

    cells: list[list[SimScore | None]] = []
    invalid = 0
    for _, span in spans:
        row: list[SimScore | None] = []
        for cand in group.candidates:
            try:
                if scorer == "embedding":
                    cos = embedding_sim(span.surface, cand.text, backend, src_lang, tgt_lang)
                    row.append(SimScore(max(cos, 0.0), {"cosine": cos}))
                else:
                    row.append(sym_sim(span.surface, cand.text, backend, src_lang, tgt_lang, cache))
            except DegenerateScoreError:
                row.append(None)
                invalid += 1
        cells.append(row)
    return ScoreTable(group.category, tuple(i for i, _ in spans), group, cells, invalid)
