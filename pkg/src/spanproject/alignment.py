"""Project spans through externally produced word alignments (Pharaoh format)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Span
from .errors import CorpusFormatError
from .selection import CONFLICT, NO_ALIGNMENT, AssignedSpan, Assignment


@dataclass(frozen=True)
class AlignmentMap:
    """A set of (source token index, target token index) links."""

    pairs: frozenset[tuple[int, int]]

    def targets_for(self, start: int, end: int) -> list[int]:
        """Sorted target indices linked to any source token in [start, end)."""
        return sorted({j for i, j in self.pairs if start <= i < end})

    def link_count(self, start: int, end: int) -> int:
        return sum(1 for i, _ in self.pairs if start <= i < end)


def parse_pharaoh(line: str) -> AlignmentMap:
    """Parse one whitespace-separated line of ``i-j`` items; duplicates collapse."""
    pairs = set()
    for offset, item in enumerate(line.split()):
        left, sep, right = item.partition("-")
        if not sep or not left.isdigit() or not right.isdigit():
            raise CorpusFormatError(f"item {offset}: malformed alignment {item!r}")
        pairs.add((int(left), int(right)))
    return AlignmentMap(frozenset(pairs))


def project_hull(span: Span, alignment: AlignmentMap, target_len: int) -> tuple[int, int] | None:
    """Contiguous hull [min, max+1] of the span's aligned target indices.

    Links pointing past the target sentence are treated as NULL alignments and
    ignored. Returns None when nothing aligns.
    """
    targets = [j for j in alignment.targets_for(span.start, span.end) if j < target_len]
    if not targets:
        return None
    return (targets[0], targets[-1] + 1)


def _free_fragments(
    hull: tuple[int, int], claimed: list[tuple[int, int]]
) -> list[tuple[int, int]]:
    """Maximal subintervals of the hull not intersecting any claimed interval."""
    start, end = hull
    blocked = sorted((max(s, start), min(e, end)) for s, e in claimed if s < end and e > start)
    fragments = []
    cursor = start
    for s, e in blocked:
        if cursor < s:
            fragments.append((cursor, s))
        cursor = max(cursor, e)
    if cursor < end:
        fragments.append((cursor, end))
    return fragments


def project_via_alignments(
    source_spans: Sequence[Span], alignment: AlignmentMap, target_len: int
) -> Assignment:
    """Hull projection with link-count conflict resolution.

    Spans with more supporting links keep contested tokens (ties keep the
    earlier source span); the losing span is truncated to the fragment of its
    hull holding most of its own aligned indices. Fully truncated spans are
    unassigned with reason "conflict". Hulls wider than twice their aligned
    index count are flagged in diagnostics.
    """
    result = Assignment()
    projected: list[tuple[int, int, tuple[int, int], list[int]]] = []
    for idx, span in enumerate(source_spans):
        hull = project_hull(span, alignment, target_len)
        if hull is None:
            result.unassigned.append((idx, NO_ALIGNMENT))
            continue
        targets = [j for j in alignment.targets_for(span.start, span.end) if j < target_len]
        if hull[1] - hull[0] > 2 * len(targets):
            result.diagnostics.append(
                f"wide-hull: span {idx} [{span.start},{span.end}) -> hull "
                f"[{hull[0]},{hull[1]}) from {len(targets)} aligned indices"
            )
        links = alignment.link_count(span.start, span.end)
        projected.append((links, idx, hull, targets))

    claimed: list[tuple[int, int]] = []
    placements: list[tuple[int, tuple[int, int]]] = []
    for links, idx, hull, targets in sorted(projected, key=lambda p: (-p[0], p[1])):
        fragments = _free_fragments(hull, claimed)
        if not fragments:
            result.unassigned.append((idx, CONFLICT))
            continue
        # keep the fragment with most of the span's own aligned indices,
        # then the widest, then the leftmost
        best = max(
            fragments,
            key=lambda f: (sum(1 for j in targets if f[0] <= j < f[1]), f[1] - f[0], -f[0]),
        )
        claimed.append(best)
        placements.append((idx, best))

    for idx, (start, end) in sorted(placements):
        span = source_spans[idx]
        result.assigned.append(
            AssignedSpan(idx, start, end, "", None, "alignment")
        )
    result.unassigned.sort()
    return result.check(len(source_spans), target_len)
