"""Project span-level annotations across parallel corpora.

Two-step method: generate projection candidates for each expected category in
the target sentence, then rank them by symmetrized normalized translation
probability and assign greedily without overlaps. Baselines (word-alignment
projection, span translation, most-probable beam) and an oracle upper bound
share the same corpus and evaluation machinery.
"""

__version__ = "0.1.0"

from .config import RunConfig
from .corpus import CategoryMap, LabeledSentence, ParallelPair, Span
from .evaluation import EvalReport, span_f1
from .pipeline import run_project, sweep_candidate_counts

__all__ = [
    "CategoryMap",
    "EvalReport",
    "LabeledSentence",
    "ParallelPair",
    "RunConfig",
    "Span",
    "run_project",
    "span_f1",
    "sweep_candidate_counts",
    "__version__",
]
