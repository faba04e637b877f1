"""Backend clients: the HTTP sidecar contract and deterministic offline mocks.

Every generator backend implements ``generate(prompt_text, n_beams,
max_new_tokens) -> list[BeamResult]`` with beams ordered by descending
logprob. Every scorer backend implements the ScorerBackend protocol from
``scoring``. Mock backends are fully deterministic (seeded, hash-based) so
that runs are byte-reproducible without any model server.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import struct
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence
from urllib.parse import parse_qs, urlparse

import httpx

from .errors import BackendError, ConfigurationError
from .generation import BeamResult

CONDITIONAL_LOGPROBS = "conditional_logprobs"
EMBEDDINGS = "embeddings"


class GeneratorBackend(Protocol):
    def generate(self, prompt_text: str, n_beams: int, max_new_tokens: int) -> list[BeamResult]: ...


@dataclass
class Backends:
    """The generator/scorer pair a run talks to, plus identity for run metadata."""

    generator: GeneratorBackend | None
    scorer: object | None
    identity: dict


class HttpModelClient:
    """Client for the model sidecar's /v1 contract (generate, score, embed, health)."""

    capabilities = frozenset({CONDITIONAL_LOGPROBS, EMBEDDINGS})
    concurrent_requests = True

    def __init__(self, base_url: str, timeout: float = 120.0, retries: int = 3, transport=None):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self._client = httpx.Client(
            base_url=self.base_url, timeout=timeout, transport=transport
        )

    def _post(self, path: str, payload: dict):
        last: Exception | None = None
        for attempt in range(self.retries):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last = exc
                time.sleep(0.2 * 2**attempt)
                continue
            if response.status_code >= 500:
                last = BackendError(f"{path}: server error {response.status_code}")
                time.sleep(0.2 * 2**attempt)
                continue
            if response.status_code >= 400:
                raise BackendError(
                    f"{path}: rejected ({response.status_code}): {response.text[:200]}",
                    retryable=False,
                )
            return response.json()
        raise BackendError(f"{path}: backend unreachable after {self.retries} attempts: {last}")

    def generate(self, prompt_text: str, n_beams: int, max_new_tokens: int) -> list[BeamResult]:
        data = self._post(
            "/v1/generate",
            {"prompt": prompt_text, "n_beams": n_beams, "max_new_tokens": max_new_tokens},
        )
        return [BeamResult(item["text"], float(item["logprob"])) for item in data]

    def token_logprobs(
        self, condition_text: str, scored_text: str, condition_lang: str, scored_lang: str
    ) -> list[float]:
        data = self._post(
            "/v1/score",
            {
                "condition_text": condition_text,
                "scored_text": scored_text,
                "source_lang": condition_lang,
                "target_lang": scored_lang,
            },
        )
        return [float(x) for x in data["token_logprobs"]]

    def embed(self, text: str, lang: str) -> list[float]:
        data = self._post("/v1/embed", {"text": text, "lang": lang})
        return [float(x) for x in data["vector"]]

    def health(self) -> dict:
        try:
            response = self._client.get("/v1/health")
        except httpx.HTTPError as exc:
            raise BackendError(f"/v1/health: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(f"/v1/health: status {response.status_code}")
        return response.json()

    def close(self) -> None:
        self._client.close()


def _unit_interval(*key: object) -> float:
    """Deterministic value in (0, 1) from a stable hash of the key parts."""
    digest = hashlib.sha256("|".join(map(str, key)).encode("utf-8")).digest()
    (value,) = struct.unpack(">Q", digest[:8])
    return (value + 1) / (2**64 + 2)


class HashScorer:
    """Deterministic pseudo-random scorer: per-token probabilities in [0.05, 0.95].

    Tokenization is whitespace. Same request always yields the same array, so
    self-similarities are exactly 1 and runs are byte-reproducible.
    """

    capabilities = frozenset({CONDITIONAL_LOGPROBS, EMBEDDINGS})

    def __init__(self, seed: int = 0, dims: int = 16):
        self.seed = seed
        self.dims = dims

    def token_logprobs(
        self, condition_text: str, scored_text: str, condition_lang: str, scored_lang: str
    ) -> list[float]:
        return [
            math.log(
                0.05
                + 0.9
                * _unit_interval(
                    self.seed, condition_text, scored_text, condition_lang, scored_lang, i
                )
            )
            for i in range(len(scored_text.split()))
        ]

    def embed(self, text: str, lang: str) -> list[float]:
        return [
            2.0 * _unit_interval(self.seed, "embed", text, lang, i) - 1.0
            for i in range(self.dims)
        ]


class ConstantScorer:
    """Every token of every string gets probability ``q``."""

    capabilities = frozenset({CONDITIONAL_LOGPROBS})

    def __init__(self, q: float):
        if not 0 < q <= 1:
            raise ConfigurationError(f"constant probability must be in (0, 1], got {q}")
        self.q = q

    def token_logprobs(
        self, condition_text: str, scored_text: str, condition_lang: str, scored_lang: str
    ) -> list[float]:
        return [math.log(self.q)] * len(scored_text.split())

    def embed(self, text: str, lang: str) -> list[float]:
        raise BackendError("constant scorer has no embedding capability", retryable=False)


class SubstitutionScorer:
    """Word-substitution scorer over a bilingual word map.

    A scored token earns the hit probability when it is the mapped image of
    the condition token at the same position (or the identical token for
    same-language requests), and the miss probability otherwise. The exact
    substitution of a string is therefore the unique argmax of the symmetrized
    similarity.
    """

    capabilities = frozenset({CONDITIONAL_LOGPROBS})

    def __init__(
        self,
        mapping: dict[str, str],
        src_lang: str,
        tgt_lang: str,
        hit: float = 0.95,
        miss: float = 0.05,
    ):
        self.mapping = dict(mapping)
        self.reverse = {v: k for k, v in mapping.items()}
        self.src_lang = src_lang
        self.tgt_lang = tgt_lang
        self.hit = hit
        self.miss = miss

    def _expected(self, condition_tokens: list[str], condition_lang: str, scored_lang: str) -> list[str]:
        if condition_lang == scored_lang:
            return condition_tokens
        if condition_lang == self.src_lang and scored_lang == self.tgt_lang:
            return [self.mapping.get(t, t) for t in condition_tokens]
        if condition_lang == self.tgt_lang and scored_lang == self.src_lang:
            return [self.reverse.get(t, t) for t in condition_tokens]
        return condition_tokens

    def token_logprobs(
        self, condition_text: str, scored_text: str, condition_lang: str, scored_lang: str
    ) -> list[float]:
        expected = self._expected(condition_text.split(), condition_lang, scored_lang)
        logprobs = []
        for i, token in enumerate(scored_text.split()):
            ok = i < len(expected) and expected[i] == token
            logprobs.append(math.log(self.hit if ok else self.miss))
        return logprobs

    def embed(self, text: str, lang: str) -> list[float]:
        raise BackendError("substitution scorer has no embedding capability", retryable=False)


_PROMPT_SLOT_RE = re.compile(r"<([^<>]+)>None</\1>")


def split_prompt(prompt_text: str) -> tuple[str, list[str]]:
    """Recover (sentence, slot categories) from a generation prompt."""
    categories = _PROMPT_SLOT_RE.findall(prompt_text)
    match = _PROMPT_SLOT_RE.search(prompt_text)
    sentence = prompt_text[: match.start()].rstrip() if match else prompt_text
    return sentence, categories


class MockNgramGenerator:
    """Deterministic mock generator: fills slots with n-grams of the prompt sentence.

    Beam ``j`` fills slot ``i`` with the ``(seed + j + i)``-th short n-gram of
    the sentence, so beams are valid tagged output, candidates always pass the
    subsequence filter, and output depends only on (prompt, n_beams, seed).
    """

    def __init__(self, seed: int = 0, max_ngram: int = 2):
        self.seed = seed
        self.max_ngram = max_ngram

    def generate(self, prompt_text: str, n_beams: int, max_new_tokens: int) -> list[BeamResult]:
        sentence, categories = split_prompt(prompt_text)
        tokens = sentence.split()
        ngrams = [
            " ".join(tokens[i : i + n])
            for n in range(1, self.max_ngram + 1)
            for i in range(len(tokens) - n + 1)
        ]
        if not ngrams:
            ngrams = [sentence or "-"]
        beams = []
        for j in range(n_beams):
            blocks = [
                f"<{cat}>{ngrams[(self.seed + j + i) % len(ngrams)]}</{cat}>"
                for i, cat in enumerate(categories)
            ]
            beams.append(BeamResult(" ".join(blocks), -float(j)))
        return beams


class CachingGenerator:
    """Disk cache around a generator, keyed by the full request plus a salt."""

    def __init__(self, inner: GeneratorBackend, cache_dir: str | Path, salt: str = ""):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.salt = salt
        self.hits = 0
        self.misses = 0

    def generate(self, prompt_text: str, n_beams: int, max_new_tokens: int) -> list[BeamResult]:
        key = hashlib.sha256(
            f"{self.salt}|{n_beams}|{max_new_tokens}|{prompt_text}".encode("utf-8")
        ).hexdigest()
        path = self.cache_dir / f"{key}.json"
        if path.exists():
            self.hits += 1
            data = json.loads(path.read_text(encoding="utf-8"))
            return [BeamResult(item["text"], item["logprob"]) for item in data]
        self.misses += 1
        beams = self.inner.generate(prompt_text, n_beams, max_new_tokens)
        path.write_text(
            json.dumps([{"text": b.text, "logprob": b.logprob} for b in beams]),
            encoding="utf-8",
        )
        return beams


def build_backends(
    endpoint: str | None, src_lang: str, tgt_lang: str, seed: int = 0, timeout: float = 120.0
) -> Backends:
    """Resolve an endpoint address into generator and scorer backends.

    ``http(s)://`` addresses get an HTTP client speaking the sidecar contract.
    ``mock://`` schemes build offline deterministic backends:

    - ``mock://hash?seed=N``: hash-based scorer plus n-gram mock generator
    - ``mock://constant?p=0.5``: constant-probability scorer
    - ``mock://lexicon?path=map.json``: word-substitution scorer from a JSON
      object of source-to-target words
    """
    if endpoint is None:
        return Backends(None, None, {"endpoint": None})
    if endpoint.startswith(("http://", "https://")):
        client = HttpModelClient(endpoint, timeout=timeout)
        return Backends(client, client, {"endpoint": endpoint})
    parsed = urlparse(endpoint)
    if parsed.scheme != "mock":
        raise ConfigurationError(f"unsupported endpoint scheme: {endpoint!r}")
    query = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
    mock_seed = int(query.get("seed", seed))
    generator = MockNgramGenerator(mock_seed)
    kind = parsed.netloc
    if kind == "hash":
        scorer = HashScorer(mock_seed)
    elif kind == "constant":
        scorer = ConstantScorer(float(query.get("p", "0.5")))
    elif kind == "lexicon":
        path = query.get("path")
        if not path:
            raise ConfigurationError("mock://lexicon requires ?path=FILE")
        mapping = json.loads(Path(path).read_text(encoding="utf-8"))
        scorer = SubstitutionScorer(mapping, src_lang, tgt_lang)
    else:
        raise ConfigurationError(f"unknown mock backend {kind!r}")
    return Backends(generator, scorer, {"endpoint": endpoint, "seed": mock_seed})
