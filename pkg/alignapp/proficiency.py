"""Topic proficiency, bands and the ordered skill-gap list.

rho_t is the unweighted mean of the normalized scores of the items mapped to
topic t. A topic is a gap when rho_t < tau (strictly) and it has evidence.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

from .exceptions import ConfigError, InvalidTau, UnknownTopic, UnparseableLabel
from .gateway import with_retry
from .models import (
    Band,
    CourseDataset,
    ProficiencyVector,
    SkillGapEntry,
    TopicProficiency,
    TopicScores,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandConfig:
    high_min: float = 0.80
    medium_min: float = 0.60

    def __post_init__(self):
        if not (0 < self.medium_min < self.high_min <= 1):
            raise ConfigError(
                f"band cutoffs need 0 < medium < high <= 1, got high={self.high_min} medium={self.medium_min}"
            )

    @classmethod
    def parse(cls, text: str) -> "BandConfig":
        """Read ``high:0.8,medium:0.6``."""
        values = {}
        for part in text.split(","):
            name, sep, value = part.partition(":")
            if not sep:
                raise ConfigError(f"--bands value {text!r} must look like high:0.8,medium:0.6")
            try:
                values[name.strip().lower()] = float(value)
            except ValueError:
                raise ConfigError(f"band cutoff {value!r} is not a number") from None
        unknown = set(values) - {"high", "medium"}
        if unknown or len(values) != 2:
            raise ConfigError(f"--bands value {text!r} must name exactly high and medium")
        return cls(high_min=values["high"], medium_min=values["medium"])

    def band_for(self, rho: float) -> str:
        if rho >= self.high_min:
            return Band.HIGH.value
        if rho >= self.medium_min:
            return Band.MEDIUM.value
        return Band.LOW.value


def process_gradebook(entries, topics) -> dict[str, TopicScores]:
    """Group normalized scores by topic; topics without entries are left out."""
    topic_set = set(topics)
    grouped: dict[str, list[float]] = {}
    for entry in entries:
        if entry.topic not in topic_set:
            raise UnknownTopic(entry.topic)
        grouped.setdefault(entry.topic, []).append(entry.normalized_score)
    return {topic: TopicScores(topic, tuple(scores)) for topic, scores in grouped.items()}


def compute_proficiency(grouped, topics, bands: BandConfig, student) -> ProficiencyVector:
    entries = {}
    for topic in topics:
        scores = grouped.get(topic)
        if scores is None or not scores.scores:
            entries[topic] = TopicProficiency(topic, 0.0, Band.UNKNOWN.value, 0)
            continue
        # fsum keeps the mean independent of entry order; the clamp absorbs the
        # last-bit rounding of the division
        rho = math.fsum(scores.scores) / len(scores.scores)
        rho = min(max(rho, min(scores.scores)), max(scores.scores))
        entries[topic] = TopicProficiency(topic, rho, bands.band_for(rho), len(scores.scores))
    return ProficiencyVector(student=student, entries=entries)


def identify_gaps(vector: ProficiencyVector, tau: float) -> list[SkillGapEntry]:
    if not isinstance(tau, (int, float)) or math.isnan(tau) or not 0 <= tau <= 1:
        raise InvalidTau(tau)
    below = [
        entry for entry in vector.entries.values()
        if entry.evidence_count > 0 and entry.rho < tau
    ]
    below.sort(key=lambda e: (e.rho, e.topic))
    return [SkillGapEntry(topic=e.topic, rho=e.rho, rank=i) for i, e in enumerate(below, start=1)]


def proficiency_entries(dataset: CourseDataset, student, include_exams=False):
    return [
        e for e in dataset.gradebook
        if e.student == student and (include_exams or e.assessment_id not in dataset.exam_assessment_ids)
    ]


def student_proficiency(dataset: CourseDataset, student, bands: BandConfig, include_exams=False):
    topics = dataset.topics
    grouped = process_gradebook(proficiency_entries(dataset, student, include_exams), topics)
    return compute_proficiency(grouped, topics, bands, student)


# ── model-assigned bands ──────────────────────────────────────────────────────

BAND_WORD = re.compile(r"\b(high|medium|low)\b", re.IGNORECASE)


def parse_band(text: str) -> str:
    match = BAND_WORD.search(text)
    if not match:
        raise UnparseableLabel(f"no proficiency band in reply {text[:80]!r}")
    return match.group(1).capitalize()


def item_outcomes(dataset: CourseDataset, student, labels=None, include_exams=False) -> dict[str, list[str]]:
    """Per-topic lines such as ``- q3 (Hard): incorrect`` for the items the student answered.

    Levels come from ``labels`` (a LabelSet); exam items are left out unless
    ``include_exams`` is set.
    """
    questions = dataset.question_index
    levels = labels.labels if labels is not None else {}
    outcomes: dict[str, list[tuple[str, str]]] = {}
    for response in dataset.responses:
        question = questions.get(response.question_id)
        if response.student != student or question is None:
            continue
        if not include_exams and dataset.is_exam_question(question):
            continue
        result = "correct" if question.accepts(response.selected_answer) else "incorrect"
        level = levels.get(question.question_id, "unlabeled")
        line = f"- {question.question_id} ({level}): {result}"
        outcomes.setdefault(question.topic, []).append((question.question_id, line))
    return {topic: [line for _, line in sorted(lines)] for topic, lines in outcomes.items()}


def agent_bands(vector: ProficiencyVector, grouped, gateway, items=None) -> dict[str, str]:
    """Ask the model for a High/Medium/Low band per evidenced topic.

    The prompt carries that topic's quiz scores and, when ``items`` is given,
    the per-question outcomes from ``item_outcomes``; never exam results.
    """
    items = items or {}
    bands = {}
    for topic in sorted(grouped):
        bindings = {
            "topic": topic,
            "scores": ", ".join(f"{s:.2f}" for s in grouped[topic].scores),
            "items": "\n".join(items.get(topic, ())) or "- none recorded",
        }
        bands[topic] = with_retry(
            gateway, "proficiency", bindings, parse_band, UnparseableLabel,
            "Answer with exactly one word: High, Medium or Low.",
        )
    logger.debug("agent bands student=%s topics=%d", vector.student, len(bands))
    return bands
