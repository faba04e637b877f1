"""Span-level precision/recall/F1 against gold projections (exact-match, CoNLL convention)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import LabeledSentence
from .errors import EvaluationError


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class EvalReport:
    per_category: dict[str, Counts] = field(default_factory=dict)
    sentence_count: int = 0
    unassigned_by_reason: dict[str, int] = field(default_factory=dict)

    @property
    def micro(self) -> Counts:
        return Counts(
            sum(c.tp for c in self.per_category.values()),
            sum(c.fp for c in self.per_category.values()),
            sum(c.fn for c in self.per_category.values()),
        )

    def to_json_dict(self) -> dict:
        def row(category: str, c: Counts) -> dict:
            return {
                "category": category,
                "tp": c.tp,
                "fp": c.fp,
                "fn": c.fn,
                "p": c.precision,
                "r": c.recall,
                "f1": c.f1,
            }

        return {
            "categories": [row(k, self.per_category[k]) for k in sorted(self.per_category)],
            "micro": row("micro", self.micro),
            "sentences": self.sentence_count,
            "unassigned": dict(sorted(self.unassigned_by_reason.items())),
        }

    def render_table(self) -> str:
        rows = [(k, self.per_category[k]) for k in sorted(self.per_category)]
        rows.append(("micro", self.micro))
        width = max(len(k) for k, _ in rows)
        lines = [f"{'category':<{width}}  {'tp':>5} {'fp':>5} {'fn':>5}  {'P':>7} {'R':>7} {'F1':>7}"]
        for name, c in rows:
            lines.append(
                f"{name:<{width}}  {c.tp:>5} {c.fp:>5} {c.fn:>5}  "
                f"{c.precision:>7.4f} {c.recall:>7.4f} {c.f1:>7.4f}"
            )
        return "\n".join(lines)


def span_f1(
    predicted: Sequence[LabeledSentence], gold: Sequence[LabeledSentence]
) -> EvalReport:
    """Exact-match span F1: a prediction is correct iff (start, end, category) match.

    Sentence counts and ids must line up pairwise.
    """
    if len(predicted) != len(gold):
        raise EvaluationError(
            f"sentence count mismatch: predicted={len(predicted)} gold={len(gold)}"
        )
    report = EvalReport(sentence_count=len(gold))
    for pred_sent, gold_sent in zip(predicted, gold):
        if pred_sent.id != gold_sent.id:
            raise EvaluationError(
                f"sentence id mismatch: predicted={pred_sent.id!r} gold={gold_sent.id!r}"
            )
        pred_set = {(s.start, s.end, s.category) for s in pred_sent.spans}
        gold_set = {(s.start, s.end, s.category) for s in gold_sent.spans}
        for start, end, category in pred_set:
            counts = report.per_category.setdefault(category, Counts())
            if (start, end, category) in gold_set:
                counts.tp += 1
            else:
                counts.fp += 1
        for start, end, category in gold_set - pred_set:
            report.per_category.setdefault(category, Counts()).fn += 1
    return report
