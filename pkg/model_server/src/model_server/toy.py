"""Deterministic toy engine: no model weights, fully reproducible.

The generator fills slots with capitalized token runs from the prompt
sentence; the scorer is a bilingual word-lexicon substitution model; the
embedder hashes words into fixed vectors. "Model tokens" are whitespace
tokens throughout. Intended for offline tests, CI, and wiring checks.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import re
import struct
from pathlib import Path

from .config import ServeConfig

GENERATE = "generate"
SCORE = "score"
EMBED = "embed"

_SLOT_RE = re.compile(r"<([^<>]+)>None</\1>")

# small English -> Spanish demo lexicon; one word may have several renderings
DEMO_LEXICON: dict[str, list[str]] = {
    "New": ["Nueva"],
    "York": ["York"],
    "United": ["Unidos", "Unidas"],
    "States": ["Estados"],
    "Nations": ["Naciones"],
    "Paris": ["París"],
    "London": ["Londres"],
    "Geneva": ["Ginebra"],
    "Japan": ["Japón"],
    "Warsaw": ["Varsovia"],
    "Spain": ["España"],
    "Berlin": ["Berlín"],
    "Mexico": ["México"],
    "Vienna": ["Viena"],
    "England": ["Inglaterra"],
    "Belgrade": ["Belgrado"],
}


def _hash_unit(*key: object) -> float:
    digest = hashlib.sha256("|".join(map(str, key)).encode("utf-8")).digest()
    (value,) = struct.unpack(">Q", digest[:8])
    return (value + 1) / (2**64 + 2)


def capitalized_runs(tokens: list[str]) -> list[str]:
    """Maximal runs of capitalized tokens, plus their proper suffixes."""
    runs: list[list[str]] = []
    current: list[str] = []
    for token in tokens:
        if token[:1].isupper():
            current.append(token)
        elif current:
            runs.append(current)
            current = []
    if current:
        runs.append(current)
    pool: list[str] = []
    for run in runs:
        for start in range(len(run)):
            text = " ".join(run[start:])
            if text not in pool:
                pool.append(text)
    return pool


class ToyEngine:
    capabilities = frozenset({GENERATE, SCORE, EMBED})
    embed_dims = 32

    def __init__(self, config: ServeConfig):
        self.config = config
        if config.lexicon_path:
            raw = json.loads(Path(config.lexicon_path).read_text(encoding="utf-8"))
            self.lexicon = {
                k: v if isinstance(v, list) else [v] for k, v in raw.items()
            }
        else:
            self.lexicon = dict(DEMO_LEXICON)
        self.reverse: dict[str, list[str]] = {}
        for src, targets in self.lexicon.items():
            for tgt in targets:
                self.reverse.setdefault(tgt, []).append(src)
        self.hit = 0.9
        self.miss = 0.1
        self.model_ids = {"generator": "toy", "scorer": "toy-lexicon", "embedder": "toy-hash"}

    # -- generation ---------------------------------------------------------

    def generate(self, prompt: str, n_beams: int, max_new_tokens: int) -> list[tuple[str, float]]:
        categories = _SLOT_RE.findall(prompt)
        match = _SLOT_RE.search(prompt)
        sentence = prompt[: match.start()].rstrip() if match else prompt
        if not categories:
            return [("", 0.0)]
        pool = capitalized_runs(sentence.split())
        beams: list[tuple[str, float]] = []
        if len(pool) >= len(categories):
            for assignment in itertools.permutations(pool, len(categories)):
                text = " ".join(
                    f"<{cat}>{value}</{cat}>" for cat, value in zip(categories, assignment)
                )
                beams.append((text, -float(len(beams))))
                if len(beams) >= n_beams:
                    break
        if not beams:
            empty = " ".join(f"<{cat}></{cat}>" for cat in categories)
            beams.append((empty, 0.0))
        return beams

    # -- scoring ------------------------------------------------------------

    def validate_lang(self, lang: str) -> bool:
        return lang in (self.config.src_lang, self.config.tgt_lang)

    def _expected_tokens(self, condition: list[str], condition_lang: str, scored_lang: str) -> set[str]:
        expected = set(condition)  # identical tokens always count (copies, names)
        if condition_lang == scored_lang:
            return expected
        table = (
            self.lexicon
            if (condition_lang, scored_lang) == (self.config.src_lang, self.config.tgt_lang)
            else self.reverse
        )
        for token in condition:
            expected.update(table.get(token, []))
        return expected

    def score_one(self, condition_text: str, scored_text: str, source_lang: str, target_lang: str) -> list[float]:
        expected = self._expected_tokens(condition_text.split(), source_lang, target_lang)
        return [
            math.log(self.hit if token in expected else self.miss)
            for token in scored_text.split()
        ]

    def score_batch(self, items: list[tuple[str, str, str, str]]) -> list[list[float]]:
        return [self.score_one(*item) for item in items]

    # -- embeddings ---------------------------------------------------------

    def embed_batch(self, items: list[tuple[str, str]]) -> list[list[float]]:
        vectors = []
        for text, lang in items:
            vectors.append(
                [2.0 * _hash_unit(text, lang, i) - 1.0 for i in range(self.embed_dims)]
            )
        return vectors
