"""Span F1 reporting."""

from __future__ import annotations

import pytest

from spanproject.corpus import LabeledSentence, Span, parse_conll, spans_to_bio
from spanproject.errors import EvaluationError
from spanproject.evaluation import span_f1

from conftest import random_sentence


def sent(sid, tokens, *span_specs):
    tokens = tuple(tokens)
    return LabeledSentence(
        sid, tokens, tuple(Span.over(tokens, s, e, c) for s, e, c in span_specs)
    )


def reference_bio_f1(pred_sentences, gold_sentences):
    """Independent BIO-level scorer: re-extract chunks from tags and count."""

    def chunks(tags):
        found = []
        i = 0
        while i < len(tags):
            if tags[i] == "O":
                i += 1
                continue
            label = tags[i][2:]
            j = i + 1
            while j < len(tags) and tags[j] == f"I-{label}":
                j += 1
            found.append((i, j, label))
            i = j
        return found

    tp = fp = fn = 0
    for pred, gold in zip(pred_sentences, gold_sentences):
        pred_chunks = set(chunks(spans_to_bio(pred)))
        gold_chunks = set(chunks(spans_to_bio(gold)))
        tp += len(pred_chunks & gold_chunks)
        fp += len(pred_chunks - gold_chunks)
        fn += len(gold_chunks - pred_chunks)
    return tp, fp, fn


class TestSpanF1:
    def test_perfect_predictions(self):
        gold = [sent("0", "a b c", (0, 1, "X")), sent("1", "d e", (0, 2, "Y"))]
        report = span_f1(gold, gold)
        assert report.micro.precision == report.micro.recall == report.micro.f1 == 1.0

    def test_two_of_three_plus_spurious(self):
        tokens = "a b c d e f".split()
        gold = [sent("0", tokens, (0, 1, "X"), (2, 3, "X"), (4, 5, "X"))]
        pred = [sent("0", tokens, (0, 1, "X"), (2, 3, "X"), (5, 6, "X"))]
        report = span_f1(pred, gold)
        assert report.micro.precision == pytest.approx(2 / 3)
        assert report.micro.recall == pytest.approx(2 / 3)
        assert report.micro.f1 == pytest.approx(2 / 3)

    def test_category_must_match(self):
        tokens = ("a",)
        gold = [sent("0", tokens, (0, 1, "X"))]
        pred = [sent("0", tokens, (0, 1, "Y"))]
        report = span_f1(pred, gold)
        assert report.micro.tp == 0
        assert report.per_category["X"].fn == 1
        assert report.per_category["Y"].fp == 1

    def test_zero_division_conventions(self):
        gold = [sent("0", ("a",))]
        report = span_f1(gold, gold)
        assert report.micro.precision == 0.0
        assert report.micro.recall == 0.0
        assert report.micro.f1 == 0.0

    def test_id_mismatch_is_error(self):
        with pytest.raises(EvaluationError, match="id mismatch"):
            span_f1([sent("a", ("x",))], [sent("b", ("x",))])

    def test_count_mismatch_is_error(self):
        with pytest.raises(EvaluationError, match="count"):
            span_f1([], [sent("a", ("x",))])

    def test_role_swap_swaps_precision_and_recall(self, rng):
        pred = [random_sentence(rng, str(i)) for i in range(30)]
        gold = [random_sentence(rng, str(i)) for i in range(30)]
        forward = span_f1(pred, gold)
        backward = span_f1(gold, pred)
        assert forward.micro.precision == backward.micro.recall
        assert forward.micro.recall == backward.micro.precision
        assert forward.micro.f1 == backward.micro.f1

    def test_totals_conserve(self, rng):
        pred = [random_sentence(rng, str(i)) for i in range(40)]
        gold = [random_sentence(rng, str(i)) for i in range(40)]
        report = span_f1(pred, gold)
        micro = report.micro
        assert micro.tp + micro.fn == sum(len(s.spans) for s in gold)
        assert micro.tp + micro.fp == sum(len(s.spans) for s in pred)

    def test_matches_reference_bio_scorer(self, rng):
        for _ in range(30):
            n = rng.randint(1, 10)
            pred = [random_sentence(rng, str(i)) for i in range(n)]
            gold = []
            for i, p in enumerate(pred):
                g = random_sentence(rng, str(i))
                # reuse pred tokens so spans refer to the same sentence
                spans = tuple(
                    Span.over(p.tokens, s.start, min(s.end, len(p.tokens)), s.category)
                    for s in g.spans
                    if s.start < len(p.tokens)
                )
                gold.append(LabeledSentence(str(i), p.tokens, spans))
            report = span_f1(pred, gold)
            tp, fp, fn = reference_bio_f1(pred, gold)
            assert (report.micro.tp, report.micro.fp, report.micro.fn) == (tp, fp, fn)


class TestReportShapes:
    def test_json_keys(self):
        tokens = ("a", "b")
        gold = [sent("0", tokens, (0, 1, "X"))]
        pred = [sent("0", tokens, (1, 2, "X"))]
        report = span_f1(pred, gold)
        data = report.to_json_dict()
        assert set(data["micro"]) == {"category", "tp", "fp", "fn", "p", "r", "f1"}
        assert data["categories"][0]["category"] == "X"
        assert data["sentences"] == 1

    def test_table_renders(self):
        gold = [sent("0", ("a",), (0, 1, "X"))]
        table = span_f1(gold, gold).render_table()
        assert "micro" in table and "X" in table
