"""Tag-style generation prompts and parsing of tagged generator output.

The prompt is the space-joined target sentence followed by one
``<Category>None</Category>`` block per expected span, in source order.
Generator output is expected to repeat the blocks with ``None`` replaced by
the predicted target-side text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import CategoryMap, ParallelPair
from .errors import ConfigurationError, MalformedBeamError

SLOT_PLACEHOLDER = "None"

_TAG_RE = re.compile(r"</?([^<>]+)>")


@dataclass(frozen=True)
class PromptSlot:
    """One expected span: its position in the prompt and the source span it stands for."""

    index: int
    category: str
    source_span_index: int


@dataclass(frozen=True)
class TagPrompt:
    text: str
    slots: tuple[PromptSlot, ...]


@dataclass(frozen=True)
class SlotOutput:
    """The text a beam generated for one slot, tagged with the whole beam's log-probability."""

    slot_index: int
    candidate_text: str
    beam_logprob: float


def build_prompt(pair: ParallelPair, category_map: CategoryMap) -> TagPrompt:
    """Build the generation prompt for a pair.

    One tag block per source span, repeated categories repeated. Categories
    must be in the map's range; names with angle brackets are rejected at map
    construction already, but a span category outside the map is a
    configuration error.
    """
    known = category_map.names
    slots = []
    blocks = []
    for i, span in enumerate(pair.source.spans):
        if span.category not in known:
            raise ConfigurationError(
                f"pair {pair.id!r}: category {span.category!r} not in category map"
            )
        slots.append(PromptSlot(len(slots), span.category, i))
        blocks.append(f"<{span.category}>{SLOT_PLACEHOLDER}</{span.category}>")
    text = " ".join([pair.target_text] + blocks) if blocks else pair.target_text
    return TagPrompt(text, tuple(slots))


def _tag_pairs(text: str) -> list[tuple[str, str]]:
    """Extract top-level (category, inner text) pairs from tagged output.

    Raises MalformedBeamError on crossed, nested, or unclosed tags.
    """
    pairs: list[tuple[str, str]] = []
    open_category: str | None = None
    open_end = 0
    for match in _TAG_RE.finditer(text):
        closing = match.group(0).startswith("</")
        category = match.group(1).lstrip("/")
        if closing:
            if open_category is None or category != open_category:
                raise MalformedBeamError(f"unmatched closing tag </{category}>")
            pairs.append((open_category, text[open_end : match.start()]))
            open_category = None
        else:
            if open_category is not None:
                raise MalformedBeamError(
                    f"nested tag <{category}> inside <{open_category}>"
                )
            open_category = category
            open_end = match.end()
    if open_category is not None:
        raise MalformedBeamError(f"unclosed tag <{open_category}>")
    return pairs


def parse_beam(output_text: str, prompt: TagPrompt, beam_logprob: float = 0.0) -> list[SlotOutput]:
    """Parse one decoded beam into per-slot candidate strings.

    Tag pairs are matched against the slot category sequence from the left; a
    beam with fewer pairs than slots yields outputs only for the matched
    leading slots, and extra trailing pairs are ignored. Crossed or unclosed
    tags raise MalformedBeamError so the caller can discard the beam.
    """
    pairs = _tag_pairs(output_text)
    outputs: list[SlotOutput] = []
    for slot, (category, inner) in zip(prompt.slots, pairs):
        if category != slot.category:
            break
        outputs.append(SlotOutput(slot.index, inner.strip(), beam_logprob))
    return outputs


def render_slots(slot_texts: dict[int, str], prompt: TagPrompt) -> str:
    """Serialize slot texts back into tagged output (the inverse of parse_beam)."""
    blocks = []
    for slot in prompt.slots:
        if slot.index not in slot_texts:
            break
        blocks.append(f"<{slot.category}>{slot_texts[slot.index]}</{slot.category}>")
    return " ".join(blocks)
