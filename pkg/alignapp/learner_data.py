"""Reading, checking and writing the course bundle.

A bundle is a ``course.json`` manifest naming four files:

* ``gradebook.csv``  student_id,assessment_id,topic,points_earned,points_possible
* ``responses.csv``  student_id,question_id,selected_answer,points_earned,points_possible
* ``questions.json`` array of question objects
* ``preferences.json`` array of survey objects

Each row or object is checked with a Django form (see ``forms.py``); the form
errors are turned into the exceptions of ``exceptions.py``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import (
    BoundsError,
    DatasetInvalid,
    DuplicateModality,
    InvalidAnswer,
    IoError,
    MalformedRow,
    SchemaError,
)
from .forms import GradebookRowForm, PreferenceForm, QuestionForm, ResponseRowForm
from .models import (
    CourseDataset,
    GradebookEntry,
    PreferenceSurvey,
    QuestionResponse,
    QuizQuestion,
    StudentId,
    normalize_topic,
)

logger = logging.getLogger(__name__)

GRADEBOOK_HEADER = ["student_id", "assessment_id", "topic", "points_earned", "points_possible"]
RESPONSES_HEADER = ["student_id", "question_id", "selected_answer", "points_earned", "points_possible"]


def _text(raw) -> str:
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"input is not UTF-8: {exc}") from exc


def _error_codes(form) -> dict[str, list]:
    return {name: errors for name, errors in form.errors.as_data().items()}


def _read_rows(raw, header, form_class):
    """Yield (line number, cleaned form data) for every CSV data row."""
    reader = csv.reader(io.StringIO(_text(raw), newline=""))
    try:
        found = next(reader)
    except StopIteration:
        raise SchemaError(f"empty file, expected header {','.join(header)}")
    if [h.strip() for h in found] != header:
        raise SchemaError(f"expected header {','.join(header)}, got {','.join(found)}")

    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise MalformedRow(line, f"expected {len(header)} columns, got {len(row)}")
        form = form_class(data=dict(zip(header, row)))
        if not form.is_valid():
            errors = _error_codes(form)
            for name in ("points_earned", "points_possible"):
                if name in errors:
                    raise MalformedRow(line, f"{name} is not a number")
            if "__all__" in errors:
                raise BoundsError(line, errors["__all__"][0].messages[0])
            name, errs = next(iter(errors.items()))
            raise MalformedRow(line, f"{name}: {errs[0].messages[0]}")
        yield line, form.cleaned_data


def parse_gradebook(raw) -> list[GradebookEntry]:
    entries = []
    for _, row in _read_rows(raw, GRADEBOOK_HEADER, GradebookRowForm):
        entries.append(GradebookEntry(
            student=StudentId(row["student_id"]),
            assessment_id=row["assessment_id"],
            topic=normalize_topic(row["topic"]),
            points_earned=row["points_earned"],
            points_possible=row["points_possible"],
        ))
    logger.debug("parsed gradebook rows=%d", len(entries))
    return entries


def parse_responses(raw) -> list[QuestionResponse]:
    responses = []
    for _, row in _read_rows(raw, RESPONSES_HEADER, ResponseRowForm):
        responses.append(QuestionResponse(
            student=StudentId(row["student_id"]),
            question_id=row["question_id"],
            selected_answer=row["selected_answer"],
            points_earned=row["points_earned"],
            points_possible=row["points_possible"],
        ))
    logger.debug("parsed responses rows=%d", len(responses))
    return responses


def _load_array(raw, what):
    try:
        data = json.loads(_text(raw))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{what}: invalid JSON ({exc})") from exc
    if not isinstance(data, list):
        raise SchemaError(f"{what}: expected a JSON array")
    for index, item in enumerate(data):
        if not isinstance(item, dict):
            raise SchemaError(f"{what}[{index}]: expected an object")
    return data


def parse_question_bank(raw) -> list[QuizQuestion]:
    questions = []
    seen = set()
    for index, obj in enumerate(_load_array(raw, "questions")):
        form = QuestionForm(data=obj)
        if not form.is_valid():
            errors = _error_codes(form)
            codes = {e.code for errs in errors.values() for e in errs}
            if "answer" in codes:
                raise InvalidAnswer(obj.get("question_id"), obj.get("correct_answer"))
            name, errs = next(iter(errors.items()))
            raise SchemaError(f"questions[{index}].{name}: {errs[0].messages[0]}")
        data = form.cleaned_data
        if data["question_id"] in seen:
            raise SchemaError(f"questions[{index}]: duplicate question_id {data['question_id']!r}")
        seen.add(data["question_id"])
        questions.append(QuizQuestion(
            question_id=data["question_id"],
            quiz_id=data["quiz_id"],
            topic=normalize_topic(data["topic"]),
            kind=data["kind"],
            text=data["text"],
            options=tuple(data["options"]) if data["kind"] == "multiple_choice" else (),
            correct_answer=data["correct_answer"],
            concept_tags=tuple(data["concept_tags"]),
            instructor_difficulty=data["instructor_difficulty"] or None,
        ))
    return questions


def parse_preferences(raw) -> list[PreferenceSurvey]:
    surveys = []
    for index, obj in enumerate(_load_array(raw, "preferences")):
        form = PreferenceForm(data=obj)
        if not form.is_valid():
            errors = _error_codes(form)
            for err in errors.get("modality_ranking", []):
                if err.code == "duplicate":
                    raise DuplicateModality(obj.get("student_id"), err.params["modality"])
            name, errs = next(iter(errors.items()))
            raise SchemaError(f"preferences[{index}].{name}: {errs[0].messages[0]}")
        data = form.cleaned_data
        surveys.append(PreferenceSurvey(
            student=StudentId(data["student_id"]),
            pacing=data["pacing"],
            modality_ranking=tuple(data["modality_ranking"]),
            assessment_preference=data["assessment_preference"],
            feedback_preference=data["feedback_preference"],
            study_time=data["study_time"],
            free_text=tuple(sorted(data["extra"].items())),
        ))
    return surveys


# ── cross-reference validation ────────────────────────────────────────────────

@dataclass(frozen=True)
class DanglingReference:
    student: str
    question_id: str
    kind: str = "DanglingReference"


@dataclass(frozen=True)
class UnknownStudent:
    student: str
    source: str
    kind: str = "UnknownStudent"


@dataclass(frozen=True)
class MissingExam:
    assessment_id: str
    kind: str = "MissingExam"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "valid": self.is_valid,
            "violations": [dict(v.__dict__) for v in self.violations],
        }


def check_dataset(questions, responses, gradebook, surveys, exam_ids) -> ValidationReport:
    report = ValidationReport()
    question_ids = {q.question_id for q in questions}
    roster = {e.student for e in gradebook} | {s.student for s in surveys}
    assessments = {e.assessment_id for e in gradebook}

    reported_students = set()
    for response in responses:
        if response.question_id not in question_ids:
            report.violations.append(DanglingReference(response.student, response.question_id))
        if response.student not in roster and response.student not in reported_students:
            reported_students.add(response.student)
            report.violations.append(UnknownStudent(response.student, "responses"))
    for exam_id in sorted(exam_ids):
        if exam_id not in assessments:
            report.violations.append(MissingExam(exam_id))
    return report


def validate_dataset(questions, responses, gradebook, surveys, exam_ids, course_id="course"):
    """Return a CourseDataset, or the ValidationReport listing every violation."""
    report = check_dataset(questions, responses, gradebook, surveys, exam_ids)
    if not report.is_valid:
        logger.warning("dataset=%s violations=%d", course_id, len(report.violations))
        return report
    students = {e.student for e in gradebook} | {s.student for s in surveys}
    return CourseDataset(
        course_id=course_id,
        students=frozenset(students),
        questions=tuple(questions),
        responses=tuple(responses),
        gradebook=tuple(gradebook),
        surveys=tuple(surveys),
        exam_assessment_ids=frozenset(exam_ids),
    )


# ── bundle files ──────────────────────────────────────────────────────────────

MANIFEST_FILES = ("gradebook", "responses", "questions", "preferences")


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def read_manifest(manifest_path) -> dict:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(_text(_read_bytes(manifest_path)))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{manifest_path}: invalid JSON ({exc})") from exc
    missing = [key for key in MANIFEST_FILES if key not in manifest]
    if missing:
        raise SchemaError(f"{manifest_path}: missing keys {', '.join(missing)}")
    return manifest


def load_course(manifest_path):
    """Parse and validate a bundle; returns (dataset, report)."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    gradebook = parse_gradebook(_read_bytes(base / manifest["gradebook"]))
    responses = parse_responses(_read_bytes(base / manifest["responses"]))
    questions = parse_question_bank(_read_bytes(base / manifest["questions"]))
    surveys = parse_preferences(_read_bytes(base / manifest["preferences"]))
    exam_ids = [str(x) for x in manifest.get("exam_assessment_ids", [])]
    result = validate_dataset(
        questions, responses, gradebook, surveys, exam_ids,
        course_id=str(manifest.get("course_id") or manifest_path.parent.name),
    )
    if isinstance(result, ValidationReport):
        raise DatasetInvalid(result)
    logger.info(
        "loaded course=%s students=%d questions=%d responses=%d gradebook=%d",
        result.course_id, len(result.students), len(result.questions),
        len(result.responses), len(result.gradebook),
    )
    return result


def _csv_text(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def question_to_dict(question: QuizQuestion) -> dict:
    data = {
        "question_id": question.question_id,
        "quiz_id": question.quiz_id,
        "topic": question.topic,
        "kind": question.kind,
        "text": question.text,
        "options": list(question.options),
        "correct_answer": question.correct_answer,
        "concept_tags": list(question.concept_tags),
    }
    if question.instructor_difficulty:
        data["instructor_difficulty"] = question.instructor_difficulty
    return data


def survey_to_dict(survey: PreferenceSurvey) -> dict:
    return {
        "student_id": survey.student,
        "pacing": survey.pacing,
        "modality_ranking": list(survey.modality_ranking),
        "assessment_preference": survey.assessment_preference,
        "feedback_preference": survey.feedback_preference,
        "study_time": survey.study_time,
        "extra": survey.extra,
    }


def write_course(dataset: CourseDataset, directory) -> Path:
    """Write the five bundle files and return the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "gradebook.csv": _csv_text(GRADEBOOK_HEADER, [
            [e.student, e.assessment_id, e.topic, repr(e.points_earned), repr(e.points_possible)]
            for e in dataset.gradebook
        ]),
        "responses.csv": _csv_text(RESPONSES_HEADER, [
            [r.student, r.question_id, r.selected_answer, repr(r.points_earned), repr(r.points_possible)]
            for r in dataset.responses
        ]),
        "questions.json": json.dumps([question_to_dict(q) for q in dataset.questions], indent=2) + "\n",
        "preferences.json": json.dumps([survey_to_dict(s) for s in dataset.surveys], indent=2) + "\n",
        "course.json": json.dumps({
            "course_id": dataset.course_id,
            "gradebook": "gradebook.csv",
            "responses": "responses.csv",
            "questions": "questions.json",
            "preferences": "preferences.json",
            "exam_assessment_ids": sorted(dataset.exam_assessment_ids),
        }, indent=2) + "\n",
    }
    try:
        for name, text in files.items():
            (directory / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write bundle to {directory}: {exc}") from exc
    return directory / "course.json"
