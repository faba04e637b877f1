"""Candidate production: beam parsing, n-gram enumeration, subsequence filtering, grouping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import ParallelPair
from .errors import MalformedBeamError
from .prompting import SlotOutput, TagPrompt, parse_beam

UNSCORED = 0.0  # sentinel logprob for candidates that never came from a beam


@dataclass(frozen=True)
class BeamResult:
    """One beam from a generator backend."""

    text: str
    logprob: float


@dataclass(frozen=True)
class ParsedBeam:
    """The slot outputs of one well-formed beam."""

    beam_index: int
    logprob: float
    slots: tuple[SlotOutput, ...]


@dataclass(frozen=True)
class RawCandidate:
    """A candidate string before matching: text, category, producing beam logprob."""

    text: str
    category: str
    logprob: float = UNSCORED


@dataclass
class Candidate:
    """A deduplicated candidate with its occurrence spans in the target.

    ``best_beam_logprob`` is the max over beams that produced the text;
    n-gram candidates carry the UNSCORED sentinel.
    """

    text: str
    category: str
    best_beam_logprob: float
    occurrences: list[tuple[int, int]] = field(default_factory=list)

    @property
    def token_length(self) -> int:
        return len(self.text.split())


@dataclass
class CandidateGroup:
    """All candidates of one category, deduplicated by exact text."""

    category: str
    candidates: list[Candidate] = field(default_factory=list)

    def texts(self) -> set[str]:
        return {c.text for c in self.candidates}


def generate_candidates(
    pair: ParallelPair,
    prompt: TagPrompt,
    generator,
    n_beams: int,
    max_new_tokens: int = 128,
) -> list[ParsedBeam]:
    """Run the generator and parse every well-formed beam.

    Malformed beams (crossed or unclosed tags) are dropped. An all-malformed
    result is an empty list, not an error; callers may fall back to n-grams.
    """
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    beams = generator.generate(prompt.text, n_beams, max_new_tokens)
    parsed: list[ParsedBeam] = []
    for i, beam in enumerate(beams):
        try:
            slots = parse_beam(beam.text, prompt, beam.logprob)
        except MalformedBeamError:
            continue
        parsed.append(ParsedBeam(i, beam.logprob, tuple(slots)))
    return parsed


def find_occurrences(
    text_tokens: Sequence[str], target_tokens: Sequence[str]
) -> list[tuple[int, int]]:
    """All positions where ``text_tokens`` occurs contiguously in the target.

    Exact comparison first; if there are zero exact matches, one
    case-insensitive pass is attempted.
    """
    k = len(text_tokens)
    if k == 0 or k > len(target_tokens):
        return []
    hits = [
        (i, i + k)
        for i in range(len(target_tokens) - k + 1)
        if list(target_tokens[i : i + k]) == list(text_tokens)
    ]
    if hits:
        return hits
    folded = [t.casefold() for t in text_tokens]
    return [
        (i, i + k)
        for i in range(len(target_tokens) - k + 1)
        if [t.casefold() for t in target_tokens[i : i + k]] == folded
    ]


def slot_outputs_to_raw(beams: Iterable[ParsedBeam], pair: ParallelPair, prompt: TagPrompt) -> list[RawCandidate]:
    """Flatten parsed beams into raw candidates labeled with their slot's category."""
    raw = []
    for beam in beams:
        for out in beam.slots:
            raw.append(
                RawCandidate(out.candidate_text, prompt.slots[out.slot_index].category, out.beam_logprob)
            )
    return raw


def match_and_filter(
    items: Iterable[RawCandidate], target_tokens: Sequence[str]
) -> list[CandidateGroup]:
    """Keep candidates whose token sequence occurs in the target; group by category.

    Empty and non-matching texts are removed. Duplicate texts within a
    category are merged keeping the max beam log-probability. Groups come out
    in first-seen category order, candidates in first-seen text order.
    """
    groups: dict[str, CandidateGroup] = {}
    index: dict[tuple[str, str], Candidate] = {}
    for item in items:
        text = item.text.strip()
        if not text:
            continue
        key = (item.category, text)
        existing = index.get(key)
        if existing is not None:
            if item.logprob > existing.best_beam_logprob:
                existing.best_beam_logprob = item.logprob
            continue
        occurrences = find_occurrences(text.split(), target_tokens)
        if not occurrences:
            continue
        candidate = Candidate(text, item.category, item.logprob, occurrences)
        index[key] = candidate
        groups.setdefault(item.category, CandidateGroup(item.category)).candidates.append(candidate)
    return list(groups.values())


def ngram_candidates(
    target_tokens: Sequence[str], categories: Iterable[str]
) -> list[CandidateGroup]:
    """Every contiguous token subsequence of the target, in every requested category.

    A sentence of n tokens yields n(n+1)/2 position-ngrams per category before
    text deduplication; duplicates merge their occurrence lists, so any gold
    span surface is guaranteed to be present.
    """
    if not target_tokens:
        raise ValueError("target_tokens must be non-empty")
    n = len(target_tokens)
    by_text: dict[str, list[tuple[int, int]]] = {}
    for i in range(n):
        for j in range(i + 1, n + 1):
            text = " ".join(target_tokens[i:j])
            by_text.setdefault(text, []).append((i, j))
    groups = []
    for category in dict.fromkeys(categories):
        groups.append(
            CandidateGroup(
                category,
                [
                    Candidate(text, category, UNSCORED, list(occ))
                    for text, occ in by_text.items()
                ],
            )
        )
    return groups
