"""Shared fixtures and random-corpus helpers."""

from __future__ import annotations

import random

import pytest

from spanproject.corpus import LabeledSentence, Span

VOCAB = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliett", "kilo", "lima", "mike", "november", "oscar", "papa",
]
CATEGORIES = ["Person", "Location", "Organization"]


def random_sentence(
    rng: random.Random,
    sentence_id: str = "0",
    min_len: int = 1,
    max_len: int = 12,
    max_spans: int = 3,
    unique_tokens: bool = False,
) -> LabeledSentence:
    """Random sentence with sorted, non-overlapping spans."""
    n = rng.randint(min_len, max_len)
    if unique_tokens:
        tokens = rng.sample(VOCAB, min(n, len(VOCAB)))
    else:
        tokens = [rng.choice(VOCAB) for _ in range(n)]
    spans = []
    cursor = 0
    for _ in range(rng.randint(0, max_spans)):
        if cursor >= len(tokens):
            break
        start = rng.randint(cursor, len(tokens) - 1)
        end = rng.randint(start + 1, min(start + 4, len(tokens)))
        spans.append(Span.over(tokens, start, end, rng.choice(CATEGORIES)))
        cursor = end
    return LabeledSentence(sentence_id, tuple(tokens), tuple(spans))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)
