"""Evaluation against exam-derived ground truth.

The unit of evaluation is the (student, topic) pair. Per-class metrics are
one-vs-rest over the band classes and the aggregates are unweighted (macro)
means. A zero denominator sets the metric to 0 and is listed in
``MetricsReport.zero_division``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyIntersection, NoExamData
from .models import Band, DIFFICULTY_LEVELS, EVALUATED_BANDS

logger = logging.getLogger(__name__)

CHART_HEADER = ["topic", "easy", "medium", "hard", "total"]
TABLE_HEADER = ["Source", "Prec.", "Rec.", "F1", "Acc."]


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray
    skipped: tuple = ()

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "counts": self.counts.tolist(),
            "skipped": len(self.skipped),
        }


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: tuple
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    n: int
    zero_division: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "per_class": [
                {
                    "class": c.label,
                    "precision": round(c.precision, 6),
                    "recall": round(c.recall, 6),
                    "f1": round(c.f1, 6),
                    "support": c.support,
                }
                for c in self.per_class
            ],
            "macro_precision": round(self.macro_precision, 6),
            "macro_recall": round(self.macro_recall, 6),
            "macro_f1": round(self.macro_f1, 6),
            "accuracy": round(self.accuracy, 6),
            "n": self.n,
            "zero_division": list(self.zero_division),
        }


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


# ── ground truth ──────────────────────────────────────────────────────────────

def _exam_scores(dataset):
    """Per-pair normalized exam scores: gradebook rows first, question responses as fallback."""
    exams = dataset.exam_assessment_ids
    from_gradebook = defaultdict(list)
    for entry in dataset.gradebook:
        if entry.assessment_id in exams:
            from_gradebook[(entry.student, entry.topic)].append(entry.normalized_score)
    from_responses = defaultdict(list)
    questions = dataset.question_index
    for response in dataset.responses:
        question = questions.get(response.question_id)
        if question is None or question.quiz_id not in exams:
            continue
        from_responses[(response.student, question.topic)].append(
            response.points_earned / response.points_possible
        )
    scores = dict(from_responses)
    scores.update(from_gradebook)
    return scores


def derive_ground_truth(dataset, bands) -> dict:
    """Map (student, topic) -> band of the mean exam score on that topic."""
    scores = _exam_scores(dataset) if dataset.exam_assessment_ids else {}
    truth = {
        pair: bands.band_for(math.fsum(values) / len(values))
        for pair, values in sorted(scores.items())
        if values
    }
    if not truth:
        raise NoExamData(f"course {dataset.course_id!r} has no usable exam items")
    logger.info("ground truth course=%s pairs=%d", dataset.course_id, len(truth))
    return truth


def predicted_bands(vectors) -> dict:
    return {
        (vector.student, entry.topic): entry.band
        for vector in vectors
        for entry in vector.ordered()
        if entry.band != Band.UNKNOWN
    }


def nest_pairs(pairs: dict) -> dict:
    nested: dict[str, dict] = {}
    for (student, topic), value in sorted(pairs.items()):
        nested.setdefault(student, {})[topic] = value
    return nested


# ── confusion and metrics ─────────────────────────────────────────────────────

def confusion(pred: dict, truth: dict, classes=EVALUATED_BANDS) -> ConfusionMatrix:
    index = {label: i for i, label in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    skipped = []
    for key in sorted(set(pred) | set(truth), key=str):
        if key not in pred or key not in truth or pred[key] not in index or truth[key] not in index:
            skipped.append(key)
            continue
        counts[index[truth[key]], index[pred[key]]] += 1
    if not counts.any():
        raise EmptyIntersection(f"no evaluated pair is present in both maps ({len(skipped)} skipped)")
    if skipped:
        logger.info("confusion skipped=%d evaluated=%d", len(skipped), int(counts.sum()))
    return ConfusionMatrix(classes=tuple(classes), counts=counts, skipped=tuple(skipped))


def metrics(matrix: ConfusionMatrix) -> MetricsReport:
    counts = matrix.counts
    n = int(counts.sum())
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    actual = counts.sum(axis=1)
    per_class, flags = [], []
    for i, label in enumerate(matrix.classes):
        hits, fp, fn = int(tp[i]), int(predicted[i] - tp[i]), int(actual[i] - tp[i])
        if hits + fp:
            precision = hits / (hits + fp)
        else:
            precision = 0.0
            flags.append(f"precision:{label}")
        if hits + fn:
            recall = hits / (hits + fn)
        else:
            recall = 0.0
            flags.append(f"recall:{label}")
        per_class.append(ClassMetrics(label, precision, recall, f1_from_pr(precision, recall), int(actual[i])))
    k = len(per_class)
    return MetricsReport(
        per_class=tuple(per_class),
        macro_precision=sum(c.precision for c in per_class) / k,
        macro_recall=sum(c.recall for c in per_class) / k,
        macro_f1=sum(c.f1 for c in per_class) / k,
        accuracy=int(np.trace(counts)) / n,
        n=n,
        zero_division=tuple(flags),
    )


def compare_label_sets(reference, candidate) -> MetricsReport:
    """Score ``candidate`` against ``reference`` over their jointly labeled questions."""
    joint = sorted(set(reference.labels) & set(candidate.labels))
    if not joint:
        raise EmptyIntersection(f"{reference.source} and {candidate.source} share no labeled question")
    matrix = confusion(
        {qid: candidate.labels[qid] for qid in joint},
        {qid: reference.labels[qid] for qid in joint},
        classes=DIFFICULTY_LEVELS,
    )
    return metrics(matrix)


# ── report files ──────────────────────────────────────────────────────────────

def _csv_text(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def emit_chart_data(dataset, labels) -> str:
    """Question counts per topic and difficulty as CSV text."""
    table: dict[str, dict[str, int]] = {}
    for question in dataset.questions:
        level = labels.labels.get(question.question_id)
        if level is None:
            continue
        row = table.setdefault(question.topic, dict.fromkeys(DIFFICULTY_LEVELS, 0))
        row[level] += 1
    rows = [
        [topic, *(counts[level] for level in DIFFICULTY_LEVELS), sum(counts.values())]
        for topic, counts in sorted(table.items())
    ]
    return _csv_text(CHART_HEADER, rows)


def render_table(rows) -> str:
    """``rows`` is a list of (source, MetricsReport); values rounded to two decimals."""
    return _csv_text(TABLE_HEADER, [
        [source, f"{r.macro_precision:.2f}", f"{r.macro_recall:.2f}", f"{r.macro_f1:.2f}", f"{r.accuracy:.2f}"]
        for source, r in rows
    ])
