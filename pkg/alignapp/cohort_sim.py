"""Synthetic cohorts with planted mastery, for checking gap recovery end to end.

Random numbers come from numpy's ``Generator(PCG64(seed))`` and are drawn in a
fixed order:

1. per student (ids ascending): pacing, modality permutation, one mastery per
   topic, one noise draw per topic;
2. per question (topics ascending, quiz items then exam items): difficulty,
   then the index of the correct option;
3. per (student, assessment, topic) group: a systematic-sampling offset and a
   permutation of the group's items.

The noise draw ``w`` is taken even when ``noise`` is 0, so two configs that
differ only in noise share every other draw. A response is correct when its
systematic threshold ``(perm[k] + v) / n`` is below
``clamp(mastery - penalty + noise * (2w - 1), 0, 1)``; for a group of equally
difficult items the share of correct answers is then within ``1/n`` of that
probability.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .evaluation import f1_from_pr
from .exceptions import ConfigError, DatasetInvalid
from .learner_data import ValidationReport, validate_dataset
from .models import (
    DIFFICULTY_LEVELS,
    GradebookEntry,
    Modality,
    Pacing,
    PreferenceSurvey,
    QuestionKind,
    QuestionResponse,
    QuizQuestion,
)
from .proficiency import BandConfig, identify_gaps, student_proficiency

logger = logging.getLogger(__name__)

DIFFICULTY_PENALTY = {"Easy": 0.0, "Medium": 0.1, "Hard": 0.2}
OPTIONS = ("Option A", "Option B", "Option C", "Option D")
EXAMS = ("midterm", "final")
TAGS_PER_TOPIC = 3


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_students: int = 20
    n_topics: int = 5
    questions_per_topic: int = 20
    noise: float = 0.0
    exam_questions_per_topic: int = 4
    difficulty_mix: dict = field(default_factory=lambda: {"Easy": 1 / 3, "Medium": 1 / 3, "Hard": 1 / 3})
    tau: float = 0.70
    mastery_margin: float = 0.0
    # pins every latent mastery (the draw is still consumed)
    fixed_mastery: float | None = None

    def __post_init__(self):
        for name in ("n_students", "n_topics", "questions_per_topic", "exam_questions_per_topic"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not 0 <= self.noise <= 0.5:
            raise ConfigError(f"noise must lie in [0, 0.5], got {self.noise!r}")
        if set(self.difficulty_mix) - set(DIFFICULTY_LEVELS):
            raise ConfigError(f"difficulty_mix keys must be among {DIFFICULTY_LEVELS}")
        if any(v < 0 for v in self.difficulty_mix.values()):
            raise ConfigError("difficulty_mix proportions must be non-negative")
        if abs(math.fsum(self.difficulty_mix.values()) - 1) > 1e-9:
            raise ConfigError("difficulty_mix proportions must sum to 1")
        if not 0 <= self.tau <= 1:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau!r}")
        if not 0 <= self.mastery_margin < 0.5:
            raise ConfigError(f"mastery_margin must lie in [0, 0.5), got {self.mastery_margin!r}")
        if self._mastery_span() <= 0:
            raise ConfigError("the mastery margin leaves no admissible mastery values")
        if self.fixed_mastery is not None and not 0 <= self.fixed_mastery <= 1:
            raise ConfigError(f"fixed_mastery must lie in [0, 1], got {self.fixed_mastery!r}")

    def _band_edges(self):
        return max(0.0, self.tau - self.mastery_margin), min(1.0, self.tau + self.mastery_margin)

    def _mastery_span(self) -> float:
        lo, hi = self._band_edges()
        return lo + (1.0 - hi)

    def mix(self) -> list[float]:
        weights = [float(self.difficulty_mix.get(level, 0.0)) for level in DIFFICULTY_LEVELS]
        total = math.fsum(weights)
        return [w / total for w in weights]


@dataclass(frozen=True)
class LatentProfile:
    student: str
    mastery: dict
    preference: PreferenceSurvey
    noise_offset: dict = field(default_factory=dict)


def topic_name(index: int) -> str:
    return f"Topic {index:02d}"


def draw_mastery(rng, config: SimConfig) -> float:
    """Uniform over [0, 1] with the band (tau - margin, tau + margin) cut out."""
    lo, hi = config._band_edges()
    u = rng.random() * config._mastery_span()
    if config.fixed_mastery is not None:
        return config.fixed_mastery
    return u if u < lo else hi + (u - lo)


def _build_questions(rng, config: SimConfig, topics):
    mix = config.mix()
    questions = []
    for t, topic in enumerate(topics, start=1):
        slug = topic.lower().replace(" ", "-")
        specs = [(f"quiz_{t:02d}", f"q{t:02d}_{i:02d}", i) for i in range(1, config.questions_per_topic + 1)]
        specs += [
            (EXAMS[(j - 1) % len(EXAMS)], f"x{t:02d}_{j:02d}", j)
            for j in range(1, config.exam_questions_per_topic + 1)
        ]
        for quiz_id, question_id, i in specs:
            level = DIFFICULTY_LEVELS[int(rng.choice(len(DIFFICULTY_LEVELS), p=mix))]
            correct = OPTIONS[int(rng.integers(len(OPTIONS)))]
            questions.append(QuizQuestion(
                question_id=question_id,
                quiz_id=quiz_id,
                topic=topic,
                kind=QuestionKind.MULTIPLE_CHOICE.value,
                text=f"{topic}: {'exam' if quiz_id in EXAMS else 'quiz'} item {i}",
                options=OPTIONS,
                correct_answer=correct,
                concept_tags=(f"{slug}-c{(i - 1) % TAGS_PER_TOPIC + 1}",),
                instructor_difficulty=level,
            ))
    return questions


def _groups(questions):
    """(assessment, topic) -> questions, in a stable order."""
    groups: dict[tuple[str, str], list] = {}
    for question in questions:
        groups.setdefault((question.quiz_id, question.topic), []).append(question)
    return groups


def generate_cohort(config: SimConfig):
    rng = np.random.Generator(np.random.PCG64(config.seed))
    topics = [topic_name(t) for t in range(1, config.n_topics + 1)]
    students = [f"s{i:03d}" for i in range(1, config.n_students + 1)]
    modalities = list(Modality.values)
    pacings = [Pacing.SELF_PACED.value, Pacing.INSTRUCTOR_PACED.value]

    latents = []
    for student in students:
        pacing = pacings[int(rng.integers(len(pacings)))]
        ranking = tuple(modalities[int(i)] for i in rng.permutation(len(modalities)))
        mastery = {topic: draw_mastery(rng, config) for topic in topics}
        offsets = {topic: config.noise * (2 * rng.random() - 1) for topic in topics}
        survey = PreferenceSurvey(student=student, pacing=pacing, modality_ranking=ranking)
        latents.append(LatentProfile(student, mastery, survey, offsets))

    questions = _build_questions(rng, config, topics)
    groups = _groups(questions)

    responses, gradebook = [], []
    for latent in latents:
        for (assessment, topic), items in groups.items():
            n = len(items)
            v = rng.random()
            perm = rng.permutation(n)
            earned = 0
            for k, question in enumerate(items):
                p = latent.mastery[topic] - DIFFICULTY_PENALTY[question.instructor_difficulty]
                p = min(max(p + latent.noise_offset[topic], 0.0), 1.0)
                is_correct = (perm[k] + v) / n < p
                if is_correct:
                    answer = question.correct_answer
                    earned += 1
                else:
                    correct_index = OPTIONS.index(question.correct_answer)
                    answer = OPTIONS[(correct_index + 1 + int(perm[k]) % 3) % len(OPTIONS)]
                responses.append(QuestionResponse(
                    latent.student, question.question_id, answer, float(is_correct), 1.0,
                ))
            gradebook.append(GradebookEntry(latent.student, assessment, topic, float(earned), float(n)))

    exam_ids = sorted({q.quiz_id for q in questions if q.quiz_id in EXAMS})
    dataset = validate_dataset(
        questions, responses, gradebook, [l.preference for l in latents], exam_ids,
        course_id=f"sim-{config.seed}",
    )
    if isinstance(dataset, ValidationReport):
        raise DatasetInvalid(dataset)
    logger.info(
        "simulated seed=%d students=%d topics=%d noise=%s responses=%d",
        config.seed, len(students), len(topics), config.noise, len(responses),
    )
    return dataset, latents


@dataclass(frozen=True)
class RecoveryReport:
    precision: float
    recall: float
    f1: float
    planted: frozenset
    detected: frozenset

    def as_dict(self) -> dict:
        return {
            "precision": round(self.precision, 6),
            "recall": round(self.recall, 6),
            "f1": round(self.f1, 6),
            "planted": len(self.planted),
            "detected": len(self.detected),
            "matched": len(self.planted & self.detected),
        }


def recovery_report(dataset, latents, tau, bands=None, include_exams=False) -> RecoveryReport:
    """Compare planted gaps (mastery < tau) with the gaps the proficiency stage finds.

    An empty detected set counts as precision 1.0 and an empty planted set as
    recall 1.0.
    """
    bands = bands or BandConfig()
    planted = frozenset(
        (latent.student, topic)
        for latent in latents
        for topic, mastery in latent.mastery.items()
        if mastery < tau
    )
    detected = set()
    for latent in latents:
        vector = student_proficiency(dataset, latent.student, bands, include_exams)
        detected.update((latent.student, gap.topic) for gap in identify_gaps(vector, tau))
    detected = frozenset(detected)
    matched = len(planted & detected)
    precision = matched / len(detected) if detected else 1.0
    recall = matched / len(planted) if planted else 1.0
    return RecoveryReport(precision, recall, f1_from_pr(precision, recall), planted, detected)
