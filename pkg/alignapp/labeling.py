"""Question difficulty labels from the instructor and from models.

Model labels are blind: the labeling prompt is built from the question text,
its options and its topic, and nothing else is reachable from the bindings.
"""

from __future__ import annotations

import logging
import re

from .exceptions import BackendError, UnparseableLabel
from .gateway import with_retry
from .models import DIFFICULTY_LEVELS, DifficultyLabel, LabelSet

logger = logging.getLogger(__name__)

INSTRUCTOR = "instructor"
LEVEL_WORD = re.compile(r"\b(easy|medium|hard)\b", re.IGNORECASE)


def model_source(model_id: str) -> str:
    return f"model({model_id})"


def load_instructor_labels(questions) -> LabelSet:
    labels = {q.question_id: q.instructor_difficulty for q in questions if q.instructor_difficulty}
    coverage = len(labels) / len(questions) if questions else 0.0
    return LabelSet(source=INSTRUCTOR, labels=labels, coverage=coverage)


def canonical_level(text: str) -> str:
    """First level word in the reply wins, case-insensitively."""
    match = LEVEL_WORD.search(text)
    if not match:
        raise UnparseableLabel(f"no difficulty level in reply {text[:80]!r}")
    return match.group(1).capitalize()


def labeling_bindings(question) -> dict:
    """The only fields a labeling prompt may see."""
    options = "\n".join(f"- {option}" for option in question.options) or "(short answer, no options)"
    return {"topic": question.topic, "question": question.text, "options": options}


def label_with_model(question, gateway) -> DifficultyLabel:
    level = with_retry(
        gateway, "label", labeling_bindings(question), canonical_level, UnparseableLabel,
        "Answer with exactly one word: Easy, Medium or Hard.",
    )
    return DifficultyLabel(question_id=question.question_id, level=level, source=model_source(gateway.model_id))


def label_bank(questions, gateway, executor=None) -> LabelSet:
    """Label every question; per-question failures are recorded, not raised."""
    ordered = sorted(questions, key=lambda q: q.question_id)

    def attempt(question):
        try:
            return label_with_model(question, gateway), None
        except BackendError as exc:
            return None, f"{exc.__class__.__name__}: {exc}"

    results = executor.map(attempt, ordered) if executor is not None else map(attempt, ordered)
    labels, failures = {}, {}
    for question, (label, failure) in zip(ordered, results):
        if label is not None:
            labels[question.question_id] = label.level
        else:
            failures[question.question_id] = failure
            logger.warning("label question=%s model=%s failed: %s", question.question_id, gateway.model_id, failure)
    coverage = len(labels) / len(ordered) if ordered else 0.0
    return LabelSet(source=model_source(gateway.model_id), labels=labels, coverage=coverage, failures=failures)


def label_bank_with_models(questions, gateways, executor=None) -> list[LabelSet]:
    return [label_bank(questions, gateway, executor) for gateway in gateways]


def best_label_set(label_sets) -> LabelSet:
    """The set with the widest coverage; earlier sets win ties, so the instructor's comes first."""
    if not label_sets:
        raise ValueError("no label sets to choose from")
    return max(label_sets, key=lambda s: s.coverage)


def label_set_to_dict(label_set: LabelSet) -> dict:
    return {
        "source": label_set.source,
        "coverage": round(label_set.coverage, 6),
        "labels": dict(sorted(label_set.labels.items())),
        "failures": dict(sorted(label_set.failures.items())),
        "levels": DIFFICULTY_LEVELS,
    }
