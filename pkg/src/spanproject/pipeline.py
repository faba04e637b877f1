"""End-to-end runs: load corpora, project every pair, emit CoNLL plus reports.

Pairs are processed by a worker pool; output order always equals input order.
Run metadata deliberately carries no timestamps so identical configurations
produce byte-identical outputs.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .alignment import parse_pharaoh, project_via_alignments
from .backends import Backends, CachingGenerator, build_backends
from .config import RunConfig
from .corpus import (
    CategoryMap,
    LabeledSentence,
    ParallelPair,
    count_docstart,
    load_parallel,
    parse_conll,
    write_conll,
)
from .errors import ConfigurationError, EvaluationError
from .evaluation import EvalReport, span_f1
from .generation import (
    CandidateGroup,
    ParsedBeam,
    generate_candidates,
    match_and_filter,
    ngram_candidates,
    slot_outputs_to_raw,
)
from .prompting import TagPrompt, build_prompt
from .scoring import ScoreCache, ScoreTable, score_table
from .selection import (
    Assignment,
    oracle_upper_bound,
    project_via_span_translation,
    select_greedy,
    select_most_probable,
    to_labeled_sentence,
)

SELF_TRANSLATION_LANGS = "own-language-both-sides"


@dataclass
class PairOutcome:
    pair: ParallelPair
    assignment: Assignment
    sentence: LabeledSentence


def _spans_by_category(pair: ParallelPair) -> dict[str, list[tuple[int, int]]]:
    grouped: dict[str, list] = {}
    for idx, span in enumerate(pair.source.spans):
        grouped.setdefault(span.category, []).append((idx, span))
    return grouped


def _build_tables(
    pair: ParallelPair,
    groups: dict[str, CandidateGroup],
    config: RunConfig,
    backends: Backends,
    cache: ScoreCache,
) -> dict[str, ScoreTable]:
    tables: dict[str, ScoreTable] = {}
    for category, spans in _spans_by_category(pair).items():
        group = groups.get(category)
        if group is None or not group.candidates:
            continue
        tables[category] = score_table(
            spans,
            group,
            backends.scorer,
            config.src_lang,
            config.tgt_lang,
            cache=cache,
            batch_size=config.batch_size,
            scorer=config.scorer,
        )
    return tables


def _generator_groups(
    pair: ParallelPair,
    prompt: TagPrompt,
    config: RunConfig,
    backends: Backends,
    beams: Sequence[ParsedBeam] | None,
) -> dict[str, CandidateGroup]:
    if beams is None:
        beams = generate_candidates(
            pair, prompt, backends.generator, config.n_beams, config.max_new_tokens
        )
    raw = slot_outputs_to_raw(beams, pair, prompt)
    groups = match_and_filter(raw, pair.target_tokens)
    if not groups and config.ngram_fallback and pair.source.spans:
        groups = ngram_candidates(
            pair.target_tokens, [s.category for s in pair.source.spans]
        )
    return {g.category: g for g in groups}


def project_pair(
    pair: ParallelPair,
    config: RunConfig,
    backends: Backends,
    cache: ScoreCache,
    category_map: CategoryMap,
    gold: LabeledSentence | None = None,
    alignment_line: str | None = None,
    beams: Sequence[ParsedBeam] | None = None,
) -> PairOutcome:
    """Project one pair with the configured method."""
    spans = pair.source.spans
    target_len = len(pair.target_tokens)

    if config.method == "alignment":
        assignment = project_via_alignments(spans, parse_pharaoh(alignment_line or ""), target_len)
    elif config.method == "span-translation":
        assignment = project_via_span_translation(
            pair, backends.generator, config.n_beams, config.max_new_tokens
        )
    elif config.method == "most-probable":
        prompt = build_prompt(pair, category_map)
        if beams is None:
            beams = generate_candidates(
                pair, prompt, backends.generator, config.n_beams, config.max_new_tokens
            )
        assignment = select_most_probable(beams, prompt, pair)
    elif config.method in ("tprojection", "ngram+select", "oracle"):
        if not spans:
            assignment = Assignment().check(0, target_len)
        else:
            if config.method == "ngram+select" or (
                config.method == "oracle" and config.candidate_source == "ngram"
            ):
                groups = {
                    g.category: g
                    for g in ngram_candidates(
                        pair.target_tokens, [s.category for s in spans]
                    )
                }
            else:
                prompt = build_prompt(pair, category_map)
                groups = _generator_groups(pair, prompt, config, backends, beams)
            tables = _build_tables(pair, groups, config, backends, cache)
            if config.method == "oracle":
                if gold is None:
                    raise ConfigurationError("oracle projection needs a gold sentence per pair")
                assignment = oracle_upper_bound(spans, groups, gold.spans, tables, target_len)
            else:
                assignment = select_greedy(spans, tables, target_len, method=config.method)
    else:
        raise ConfigurationError(f"unknown method {config.method!r}")

    return PairOutcome(pair, assignment, to_labeled_sentence(pair, assignment))


def _load_gold(path: str, pairs: Sequence[ParallelPair], category_map: CategoryMap) -> list[LabeledSentence]:
    gold = parse_conll(Path(path).read_text(encoding="utf-8").splitlines(), category_map)
    if len(gold) != len(pairs):
        raise EvaluationError(f"gold sentence count {len(gold)} != pair count {len(pairs)}")
    for sentence, pair in zip(gold, pairs):
        if sentence.tokens != pair.target_tokens:
            raise EvaluationError(
                f"gold tokens for sentence {pair.id} do not match the target corpus"
            )
    return gold


def load_run_inputs(
    config: RunConfig, source_path: str, target_path: str
) -> tuple[list[ParallelPair], CategoryMap, dict[str, int]]:
    """Read and pair the corpora, resolving the category map."""
    source_text = Path(source_path).read_text(encoding="utf-8")
    target_text = Path(target_path).read_text(encoding="utf-8")
    docstart = {
        "source": count_docstart(source_text.splitlines()),
        "target": count_docstart(target_text.splitlines()),
    }
    if config.categories_path:
        category_map = CategoryMap.from_json(
            Path(config.categories_path).read_text(encoding="utf-8")
        )
        pairs = load_parallel(source_text.splitlines(), target_text.splitlines(), category_map)
    else:
        pairs = load_parallel(source_text.splitlines(), target_text.splitlines())
        observed = dict.fromkeys(
            span.category for pair in pairs for span in pair.source.spans
        )
        category_map = CategoryMap.identity(observed)
    return pairs, category_map, docstart


def _resolve_backends(config: RunConfig) -> Backends:
    backends = build_backends(
        config.endpoint, config.src_lang, config.tgt_lang, seed=config.seed
    )
    if config.cache_dir and backends.generator is not None and config.needs_generator():
        backends.generator = CachingGenerator(
            backends.generator,
            Path(config.cache_dir) / "generation",
            salt=str(config.endpoint),
        )
    return backends


def run_project(
    config: RunConfig,
    source_path: str,
    target_path: str,
    out_path: str,
    report_json_path: str | None = None,
) -> tuple[EvalReport | None, dict]:
    """Project a corpus to ``out_path`` (CoNLL) plus ``<out>.meta.json``.

    Returns the evaluation report (when gold is configured) and the metadata
    dict. Configuration problems raise ConfigurationError with every issue
    listed at once.
    """
    config.validate()
    pairs, category_map, docstart = load_run_inputs(config, source_path, target_path)
    gold = _load_gold(config.gold_path, pairs, category_map) if config.gold_path else None

    alignment_lines: list[str] | None = None
    if config.method == "alignment":
        alignment_lines = Path(config.alignments_path).read_text(encoding="utf-8").splitlines()
        if len(alignment_lines) != len(pairs):
            raise ConfigurationError(
                f"alignment line count {len(alignment_lines)} != pair count {len(pairs)}"
            )

    backends = _resolve_backends(config)
    cache = ScoreCache()

    def work(index: int) -> PairOutcome:
        return project_pair(
            pairs[index],
            config,
            backends,
            cache,
            category_map,
            gold=gold[index] if gold else None,
            alignment_line=alignment_lines[index] if alignment_lines else None,
        )

    indices = range(len(pairs))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(work, indices))
    else:
        outcomes = [work(i) for i in indices]

    Path(out_path).write_text(
        write_conll(outcome.sentence for outcome in outcomes), encoding="utf-8"
    )

    unassigned = Counter(
        reason for outcome in outcomes for _, reason in outcome.assignment.unassigned
    )
    diagnostics = [d for outcome in outcomes for d in outcome.assignment.diagnostics]
    metadata = {
        "config": config.to_dict(),
        "backend": backends.identity,
        "cache": cache.stats(),
        "pairs": len(pairs),
        "source_spans": sum(len(p.source.spans) for p in pairs),
        "assigned": sum(len(o.assignment.assigned) for o in outcomes),
        "unassigned": dict(sorted(unassigned.items())),
        "docstart_skipped": docstart,
        "wide_hull_flags": len(diagnostics),
        "self_translation_langs": SELF_TRANSLATION_LANGS,
    }
    if isinstance(backends.generator, CachingGenerator):
        metadata["generation_cache"] = {
            "hits": backends.generator.hits,
            "misses": backends.generator.misses,
        }
    meta_path = Path(str(out_path) + ".meta.json")
    meta_path.write_text(
        json.dumps(metadata, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    report = None
    if gold is not None:
        report = span_f1([o.sentence for o in outcomes], gold)
        report.unassigned_by_reason = dict(sorted(unassigned.items()))
        if report_json_path:
            Path(report_json_path).write_text(
                json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
    return report, metadata


def sweep_candidate_counts(
    config: RunConfig,
    counts: Sequence[int],
    source_path: str,
    target_path: str,
    gold_path: str,
) -> list[dict]:
    """One pipeline run per candidate count, reusing the largest generation.

    Beam search's top-k prefix property makes truncating the ``max(counts)``
    beam list equivalent to re-decoding with fewer beams, at a fraction of the
    cost. Counts must be positive, strictly ascending, and duplicate-free.
    """
    if not counts:
        raise ConfigurationError("sweep needs at least one candidate count")
    if len(set(counts)) != len(counts):
        raise ConfigurationError(f"duplicate counts in sweep: {list(counts)}")
    if list(counts) != sorted(counts) or counts[0] < 1:
        raise ConfigurationError(f"counts must be positive and ascending: {list(counts)}")
    if config.method not in ("tprojection", "most-probable"):
        raise ConfigurationError(
            f"sweep truncates beam prefixes and supports only 'tprojection' and "
            f"'most-probable', not {config.method!r}"
        )

    config.validate()
    pairs, category_map, _ = load_run_inputs(config, source_path, target_path)
    gold = _load_gold(gold_path, pairs, category_map)
    backends = _resolve_backends(config)
    cache = ScoreCache()

    max_count = counts[-1]
    full_beams: list[list[ParsedBeam]] = []
    prompts: list[TagPrompt] = []
    for pair in pairs:
        prompt = build_prompt(pair, category_map)
        prompts.append(prompt)
        if pair.source.spans:
            full_beams.append(
                generate_candidates(
                    pair, prompt, backends.generator, max_count, config.max_new_tokens
                )
            )
        else:
            full_beams.append([])

    rows = []
    for count in counts:
        sentences = []
        for pair, prompt, beams in zip(pairs, prompts, full_beams):
            prefix = [b for b in beams if b.beam_index < count]
            outcome = project_pair(
                pair, config, backends, cache, category_map, beams=prefix
            )
            sentences.append(outcome.sentence)
        report = span_f1(sentences, gold)
        rows.append({"count": count, "micro_f1": report.micro.f1})
    return rows
