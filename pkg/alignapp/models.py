"""Domain records shared across the pipeline.

Nothing here is persisted: the choices are Django ``TextChoices`` so forms and
templates can use them directly, and the records are frozen dataclasses so a
validated dataset can be shared between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import NewType

from django.db import models

StudentId = NewType("StudentId", str)


class QuestionKind(models.TextChoices):
    MULTIPLE_CHOICE = "multiple_choice", "Multiple choice"
    SHORT_ANSWER = "short_answer", "Short answer"


class Difficulty(models.TextChoices):
    EASY = "Easy", "Easy"
    MEDIUM = "Medium", "Medium"
    HARD = "Hard", "Hard"


class Pacing(models.TextChoices):
    SELF_PACED = "self_paced", "Self-paced"
    INSTRUCTOR_PACED = "instructor_paced", "Instructor-paced"


class Modality(models.TextChoices):
    VIDEO = "video", "Video"
    TEXT_PDF = "text_pdf", "Text / PDF"
    INTERACTIVE = "interactive", "Interactive"
    HANDS_ON = "hands_on", "Hands-on"


class Band(models.TextChoices):
    HIGH = "High", "High"
    MEDIUM = "Medium", "Medium"
    LOW = "Low", "Low"
    UNKNOWN = "Unknown", "Unknown"


# Bands a prediction or a ground truth can take; Unknown never enters evaluation.
EVALUATED_BANDS = [Band.HIGH.value, Band.MEDIUM.value, Band.LOW.value]
DIFFICULTY_LEVELS = [Difficulty.EASY.value, Difficulty.MEDIUM.value, Difficulty.HARD.value]


def normalize_topic(topic: str) -> str:
    return topic.strip()


# ── learner data ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class QuizQuestion:
    question_id: str
    quiz_id: str
    topic: str
    kind: str
    text: str
    options: tuple[str, ...]
    correct_answer: str
    concept_tags: tuple[str, ...] = ()
    instructor_difficulty: str | None = None

    @property
    def is_multiple_choice(self) -> bool:
        return self.kind == QuestionKind.MULTIPLE_CHOICE

    def accepts(self, answer: str) -> bool:
        """Short answers match case-insensitively after trimming; choices match exactly."""
        if self.kind == QuestionKind.SHORT_ANSWER:
            return answer.strip().casefold() == self.correct_answer.strip().casefold()
        return answer == self.correct_answer


@dataclass(frozen=True)
class QuestionResponse:
    student: StudentId
    question_id: str
    selected_answer: str
    points_earned: float
    points_possible: float


@dataclass(frozen=True)
class GradebookEntry:
    student: StudentId
    assessment_id: str
    topic: str
    points_earned: float
    points_possible: float

    @property
    def normalized_score(self) -> float:
        return self.points_earned / self.points_possible


@dataclass(frozen=True)
class PreferenceSurvey:
    student: StudentId
    pacing: str
    modality_ranking: tuple[str, ...]
    assessment_preference: str = ""
    feedback_preference: str = ""
    study_time: str = ""
    free_text: tuple[tuple[str, str], ...] = ()

    @property
    def extra(self) -> dict[str, str]:
        return dict(self.free_text)


@dataclass(frozen=True)
class CourseDataset:
    course_id: str
    students: frozenset
    questions: tuple[QuizQuestion, ...]
    responses: tuple[QuestionResponse, ...]
    gradebook: tuple[GradebookEntry, ...]
    surveys: tuple[PreferenceSurvey, ...]
    exam_assessment_ids: frozenset

    @property
    def topics(self) -> list[str]:
        """The course topic set T, sorted."""
        found = {q.topic for q in self.questions} | {e.topic for e in self.gradebook}
        return sorted(found)

    @property
    def question_index(self) -> dict[str, QuizQuestion]:
        return {q.question_id: q for q in self.questions}

    def sorted_students(self) -> list[StudentId]:
        return sorted(self.students)

    def survey_for(self, student) -> PreferenceSurvey | None:
        for survey in self.surveys:
            if survey.student == student:
                return survey
        return None

    def is_exam_question(self, question: QuizQuestion) -> bool:
        return question.quiz_id in self.exam_assessment_ids


# ── proficiency and gaps ──────────────────────────────────────────────────────

@dataclass(frozen=True)
class TopicScores:
    topic: str
    scores: tuple[float, ...]


@dataclass(frozen=True)
class TopicProficiency:
    topic: str
    rho: float
    band: str
    evidence_count: int


@dataclass(frozen=True)
class ProficiencyVector:
    student: StudentId
    entries: dict

    def ordered(self) -> list[TopicProficiency]:
        return [self.entries[t] for t in sorted(self.entries)]


@dataclass(frozen=True)
class SkillGapEntry:
    topic: str
    rho: float
    rank: int


@dataclass(frozen=True)
class ExtractedPreferences:
    student: StudentId
    pacing: str
    ranked_modalities: tuple[str, ...]
    feedback_style: str = ""
    notes: str = ""

    def top_modalities(self, n: int = 2) -> tuple[str, ...]:
        return self.ranked_modalities[:n]


@dataclass(frozen=True)
class MissedQuestion:
    question_id: str
    text: str
    correct_answer: str
    selected_answer: str
    concept_tags: tuple[str, ...] = ()
    multiple_choice: bool = True


@dataclass(frozen=True)
class DiagnosisEvidence:
    student: StudentId
    topic: str
    missed_questions: tuple[MissedQuestion, ...]
    distractor_counts: dict
    concept_tag_misses: dict

    @property
    def missed_ids(self) -> set[str]:
        return {m.question_id for m in self.missed_questions}


@dataclass(frozen=True)
class ConceptDiagnosis:
    topic: str
    statements: tuple[str, ...]
    evidence_refs: tuple[str, ...] = ()
    keyphrases: tuple[str, ...] = ()


@dataclass(frozen=True)
class GapReport:
    student: StudentId
    gaps: tuple[tuple[SkillGapEntry, ConceptDiagnosis], ...]
    tau_used: float
    generated_at: datetime

    @property
    def topics(self) -> list[str]:
        return [gap.topic for gap, _ in self.gaps]

    def diagnosis_for(self, topic: str) -> ConceptDiagnosis | None:
        for gap, diagnosis in self.gaps:
            if gap.topic == topic:
                return diagnosis
        return None


@dataclass(frozen=True)
class DifficultyLabel:
    question_id: str
    level: str
    source: str


@dataclass(frozen=True)
class LabelSet:
    source: str
    labels: dict
    coverage: float
    failures: dict = field(default_factory=dict)
