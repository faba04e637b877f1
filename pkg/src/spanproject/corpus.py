"""Labeled corpora: spans, sentences, parallel pairs, CoNLL/JSONL parsing and serialization.

Spans are half-open token ranges ``[start, end)``. Token indices, not character
offsets, are the only span currency in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import CorpusFormatError

DOCSTART = "-DOCSTART-"


@dataclass(frozen=True)
class Span:
    """A contiguous token range with a category label.

    ``surface`` is the covered text joined by single spaces; it is fixed at
    construction and validated against the owning sentence's tokens.
    """

    start: int
    end: int
    category: str
    surface: str

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid span bounds [{self.start}, {self.end})")

    @classmethod
    def over(cls, tokens: Iterable[str], start: int, end: int, category: str) -> "Span":
        """Build a span over ``tokens`` with the surface computed for you."""
        toks = list(tokens)
        return cls(start, end, category, " ".join(toks[start:end]))

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class LabeledSentence:
    """A tokenized sentence plus non-overlapping categorized spans, sorted by start."""

    id: str
    tokens: tuple[str, ...]
    spans: tuple[Span, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(self.spans))
        prev: Span | None = None
        for span in self.spans:
            if span.end > len(self.tokens):
                raise ValueError(
                    f"sentence {self.id!r}: span [{span.start}, {span.end}) exceeds "
                    f"length {len(self.tokens)}"
                )
            expected = " ".join(self.tokens[span.start : span.end])
            if span.surface != expected:
                raise ValueError(
                    f"sentence {self.id!r}: span surface {span.surface!r} does not "
                    f"match tokens {expected!r}"
                )
            if prev is not None:
                if span.start < prev.start:
                    raise ValueError(f"sentence {self.id!r}: spans not sorted by start")
                if prev.overlaps(span):
                    raise ValueError(
                        f"sentence {self.id!r}: spans [{prev.start},{prev.end}) and "
                        f"[{span.start},{span.end}) overlap"
                    )
            prev = span

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class ParallelPair:
    """A labeled source sentence bound to its unlabeled target token sequence."""

    source: LabeledSentence
    target_tokens: tuple[str, ...]
    id: str

    def __post_init__(self):
        object.__setattr__(self, "target_tokens", tuple(self.target_tokens))
        if self.source.id != self.id:
            raise ValueError(f"pair id {self.id!r} != source id {self.source.id!r}")
        if not self.target_tokens:
            raise ValueError(f"pair {self.id!r}: empty target token sequence")

    @property
    def target_text(self) -> str:
        return " ".join(self.target_tokens)


@dataclass(frozen=True)
class CategoryMap:
    """Lookup from raw tags (``PER``) to verbalized category names (``Person``).

    Must be injective, and verbalized names may not contain angle brackets
    because they end up inside tag markup.
    """

    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        seen: dict[str, str] = {}
        for raw, name in self.entries.items():
            if "<" in name or ">" in name:
                raise ValueError(f"category name {name!r} contains angle brackets")
            if name in seen:
                raise ValueError(
                    f"category map not injective: {seen[name]!r} and {raw!r} "
                    f"both verbalize to {name!r}"
                )
            seen[name] = raw

    def verbalize(self, raw: str) -> str:
        """Map a raw tag to its verbalized name; unknown tags pass through unchanged."""
        return self.entries.get(raw, raw)

    @property
    def names(self) -> frozenset[str]:
        return frozenset(self.entries.values())

    @classmethod
    def identity(cls, categories: Iterable[str]) -> "CategoryMap":
        return cls({c: c for c in categories})

    @classmethod
    def from_json(cls, text: str) -> "CategoryMap":
        data = json.loads(text)
        if not isinstance(data, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in data.items()
        ):
            raise CorpusFormatError("category map must be a JSON object of strings")
        return cls(data)


def _split_tag(tag: str, lineno: int) -> tuple[str, str | None]:
    """Return (prefix, category) for a BIO tag, or raise on anything else."""
    if tag == "O":
        return "O", None
    if tag.startswith("B-") or tag.startswith("I-"):
        category = tag[2:]
        if category:
            return tag[0], category
    raise CorpusFormatError(f"line {lineno}: not a BIO tag: {tag!r}")


def parse_conll(
    lines: Iterable[str], category_map: CategoryMap | None = None, id_prefix: str = ""
) -> list[LabeledSentence]:
    """Parse CoNLL columns (token first, BIO tag last) into labeled sentences.

    Blank lines separate sentences; ``-DOCSTART-`` lines are skipped. An ``I-``
    tag with no open run of the same category is repaired by treating it as
    ``B-`` (the permissive conlleval convention). Empty input yields an empty
    list.
    """
    sentences: list[LabeledSentence] = []
    tokens: list[str] = []
    tags: list[str] = []

    def flush() -> None:
        if tokens:
            sid = f"{id_prefix}{len(sentences)}"
            sentences.append(
                LabeledSentence(sid, tuple(tokens), tuple(_bio_to_spans(tokens, tags, category_map)))
            )
            tokens.clear()
            tags.clear()

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip():
            flush()
            continue
        cols = line.split()
        if cols[0] == DOCSTART:
            continue
        if len(cols) < 2:
            raise CorpusFormatError(f"line {lineno}: expected token and tag, got {line!r}")
        _split_tag(cols[-1], lineno)  # validate before buffering
        tokens.append(cols[0])
        tags.append(cols[-1])
    flush()
    return sentences


def _bio_to_spans(
    tokens: list[str], tags: list[str], category_map: CategoryMap | None
) -> list[Span]:
    spans: list[Span] = []
    start: int | None = None
    current: str | None = None

    def close(end: int) -> None:
        nonlocal start, current
        if start is not None and current is not None:
            name = category_map.verbalize(current) if category_map else current
            spans.append(Span.over(tokens, start, end, name))
        start, current = None, None

    for i, tag in enumerate(tags):
        prefix, category = _split_tag(tag, i + 1)
        if prefix == "O":
            close(i)
        elif prefix == "B":
            close(i)
            start, current = i, category
        else:  # I- : repair to B- when it does not continue the open run
            if current != category:
                close(i)
                start, current = i, category
    close(len(tags))
    return spans


def spans_to_bio(sentence: LabeledSentence) -> list[str]:
    """Encode a sentence's spans as one BIO tag per token."""
    tags = ["O"] * len(sentence.tokens)
    for span in sentence.spans:
        tags[span.start] = f"B-{span.category}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.category}"
    return tags


def _parse_target_conll(lines: Iterable[str]) -> list[list[str]]:
    """Target-side CoNLL: only the first column matters, tags are ignored."""
    sentences: list[list[str]] = []
    tokens: list[str] = []
    for raw in lines:
        line = raw.rstrip("\n")
        if not line.strip():
            if tokens:
                sentences.append(tokens)
                tokens = []
            continue
        cols = line.split()
        if cols[0] == DOCSTART:
            continue
        tokens.append(cols[0])
    if tokens:
        sentences.append(tokens)
    return sentences


def _parse_target_jsonl(lines: Iterable[str]) -> list[list[str]]:
    sentences: list[list[str]] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        tokens = obj.get("tokens") if isinstance(obj, dict) else None
        if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
            raise CorpusFormatError(f'line {lineno}: missing or invalid "tokens" array')
        sentences.append(tokens)
    return sentences


def load_parallel(
    source_lines: Iterable[str],
    target_lines: Iterable[str],
    category_map: CategoryMap | None = None,
) -> list[ParallelPair]:
    """Zip a labeled CoNLL source with an unlabeled target (CoNLL or JSONL).

    The target format is sniffed from its first non-blank line: a leading
    ``{`` means one-object-per-line JSONL with a ``tokens`` array, anything
    else is treated as CoNLL with tags ignored. Pre-tokenized JSONL tokens are
    honored verbatim. Sentence counts must match.
    """
    source = parse_conll(source_lines, category_map)
    target_list = list(target_lines)
    first = next((l.strip() for l in target_list if l.strip()), "")
    if first.startswith("{"):
        targets = _parse_target_jsonl(target_list)
    else:
        targets = _parse_target_conll(target_list)
    if len(source) != len(targets):
        raise CorpusFormatError(
            f"sentence count mismatch: source={len(source)} target={len(targets)}"
        )
    return [
        ParallelPair(src, tuple(tokens), src.id) for src, tokens in zip(source, targets)
    ]


def write_conll(sentences: Iterable[LabeledSentence]) -> str:
    """Serialize sentences as bit-exact CoNLL: ``token tag\\n``, one blank line between sentences."""
    blocks = []
    for sentence in sentences:
        tags = spans_to_bio(sentence)
        blocks.append("".join(f"{tok} {tag}\n" for tok, tag in zip(sentence.tokens, tags)))
    return "\n".join(blocks)


def count_docstart(lines: Iterable[str]) -> int:
    """How many ``-DOCSTART-`` lines an input carries (skipped during parsing)."""
    return sum(1 for line in lines if line.split() and line.split()[0] == DOCSTART)


def iter_lines(text: str) -> Iterator[str]:
    return iter(text.splitlines())
