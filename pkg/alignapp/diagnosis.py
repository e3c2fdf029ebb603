"""Concept-level diagnosis of skill gaps.

For each gap topic the student's wrong answers are gathered into a
``DiagnosisEvidence`` record, which is turned into diagnostic statements either
by fixed rules or by the model. Model replies must follow the contract

    1. <statement> [evidence: q12,q14]

where every cited id is a question the student actually missed.
"""

from __future__ import annotations

import logging
import re
from collections import Counter

from .exceptions import CountMismatch, EmptyEvidence, UnparseableDiagnosis
from .gateway import with_retry
from .models import (
    ConceptDiagnosis,
    CourseDataset,
    DiagnosisEvidence,
    ExtractedPreferences,
    GapReport,
    MissedQuestion,
    PreferenceSurvey,
)

logger = logging.getLogger(__name__)

INSUFFICIENT_EVIDENCE = "insufficient item-level evidence"
BLANK = "(left blank)"

STATEMENT_LINE = re.compile(r"^\s*(\d+)[.)]\s+(?P<text>.+?)\s*\[evidence:\s*(?P<refs>[^\]]*)\]\s*$", re.IGNORECASE)
NUMBERED_LINE = re.compile(r"^\s*\d+[.)]\s+")


def extract_preferences(survey: PreferenceSurvey, gateway=None) -> ExtractedPreferences:
    notes = "\n".join(f"{key}: {value}" for key, value in survey.free_text)
    if gateway is not None and survey.free_text:
        notes = gateway.ask("preferences", {"answers": notes}).strip()
    return ExtractedPreferences(
        student=survey.student,
        pacing=survey.pacing,
        ranked_modalities=tuple(survey.modality_ranking),
        feedback_style=survey.feedback_preference,
        notes=notes,
    )


def assemble_evidence(dataset: CourseDataset, student, topic, include_exams=False) -> DiagnosisEvidence:
    questions = dataset.question_index
    missed = []
    distractors = Counter()
    tags = Counter()
    for response in dataset.responses:
        if response.student != student:
            continue
        question = questions.get(response.question_id)
        if question is None or question.topic != topic:
            continue
        if not include_exams and dataset.is_exam_question(question):
            continue
        if question.accepts(response.selected_answer):
            continue
        missed.append(MissedQuestion(
            question_id=question.question_id,
            text=question.text,
            correct_answer=question.correct_answer,
            selected_answer=response.selected_answer,
            concept_tags=question.concept_tags,
            multiple_choice=question.is_multiple_choice,
        ))
        if question.is_multiple_choice:
            distractors[response.selected_answer] += 1
        tags.update(question.concept_tags)
    return DiagnosisEvidence(
        student=student,
        topic=topic,
        missed_questions=tuple(missed),
        distractor_counts=dict(distractors),
        concept_tag_misses=dict(tags),
    )


def ranked_tags(evidence: DiagnosisEvidence) -> tuple[str, ...]:
    return tuple(tag for tag, _ in sorted(evidence.concept_tag_misses.items(), key=lambda kv: (-kv[1], kv[0])))


def insufficient_evidence(topic: str) -> ConceptDiagnosis:
    return ConceptDiagnosis(topic=topic, statements=(INSUFFICIENT_EVIDENCE,))


# ── rule mode ─────────────────────────────────────────────────────────────────

def diagnose_by_rules(evidence: DiagnosisEvidence) -> ConceptDiagnosis:
    """Deterministic statements: repeated distractors, missed concepts, short answers."""
    if not evidence.missed_questions:
        raise EmptyEvidence(f"no missed questions for {evidence.student} on {evidence.topic}")
    statements = []
    refs: list[str] = []

    def cited(ids):
        ids = list(dict.fromkeys(ids))
        refs.extend(qid for qid in ids if qid not in refs)
        return ids

    for choice, count in sorted(evidence.distractor_counts.items(), key=lambda kv: (-kv[1], kv[0])):
        cited([m.question_id for m in evidence.missed_questions
               if m.multiple_choice and m.selected_answer == choice])
        times = "once" if count == 1 else f"{count} times"
        if not choice:
            statements.append(f"Left a multiple-choice answer blank {times}")
            continue
        statements.append(f"Chose the distractor '{choice}' {times} instead of the correct answer")

    for tag in ranked_tags(evidence):
        count = evidence.concept_tag_misses[tag]
        cited([m.question_id for m in evidence.missed_questions if tag in m.concept_tags])
        noun = "question" if count == 1 else "questions"
        statements.append(f"Missed {count} {noun} on the concept '{tag}'")

    for missed in evidence.missed_questions:
        if missed.multiple_choice:
            continue
        cited([missed.question_id])
        statements.append(
            f"Short answer '{missed.selected_answer}' to {missed.question_id} "
            f"did not match the expected '{missed.correct_answer}'"
        )
    return ConceptDiagnosis(
        topic=evidence.topic,
        statements=tuple(statements),
        evidence_refs=tuple(refs),
        keyphrases=ranked_tags(evidence),
    )


# ── agent mode ────────────────────────────────────────────────────────────────

def _evidence_bindings(evidence: DiagnosisEvidence) -> dict:
    missed = "\n".join(
        f"- [{m.question_id}] {m.text} | correct: {m.correct_answer} | selected: {m.selected_answer or BLANK}"
        for m in evidence.missed_questions
    )
    distractors = "\n".join(
        f"- {choice or BLANK}: {count}" for choice, count in sorted(evidence.distractor_counts.items())
    ) or "- none"
    tags = "\n".join(
        f"- {tag}: {evidence.concept_tag_misses[tag]}" for tag in ranked_tags(evidence)
    ) or "- none"
    return {"topic": evidence.topic, "missed_questions": missed, "distractors": distractors, "concept_tags": tags}


def parse_diagnosis(text: str, evidence: DiagnosisEvidence) -> ConceptDiagnosis:
    allowed = evidence.missed_ids
    statements, refs = [], []
    for line in text.splitlines():
        if not NUMBERED_LINE.match(line):
            continue
        match = STATEMENT_LINE.match(line)
        if not match:
            raise UnparseableDiagnosis(f"statement without evidence: {line.strip()!r}")
        cited = [ref.strip() for ref in match.group("refs").split(",") if ref.strip()]
        if not cited:
            raise UnparseableDiagnosis(f"statement cites no question: {line.strip()!r}")
        unknown = [ref for ref in cited if ref not in allowed]
        if unknown:
            raise UnparseableDiagnosis(f"statement cites questions that were not missed: {', '.join(unknown)}")
        statements.append(match.group("text"))
        refs.extend(ref for ref in cited if ref not in refs)
    if not statements:
        raise UnparseableDiagnosis("reply contains no numbered statements")
    return ConceptDiagnosis(
        topic=evidence.topic,
        statements=tuple(statements),
        evidence_refs=tuple(refs),
        keyphrases=ranked_tags(evidence),
    )


def diagnose(evidence: DiagnosisEvidence, gateway) -> ConceptDiagnosis:
    if not evidence.missed_questions:
        raise EmptyEvidence(f"no missed questions for {evidence.student} on {evidence.topic}")
    return with_retry(
        gateway, "diagnose", _evidence_bindings(evidence),
        lambda text: parse_diagnosis(text, evidence), UnparseableDiagnosis,
        "Reply again as a numbered list. Every line must end with [evidence: <question ids>] "
        "citing only the question ids listed above.",
    )


def diagnose_gap(evidence: DiagnosisEvidence, gateway=None) -> ConceptDiagnosis:
    """Diagnose one gap: rules when gateway is None, the model otherwise."""
    if not evidence.missed_questions:
        return insufficient_evidence(evidence.topic)
    if gateway is None:
        return diagnose_by_rules(evidence)
    return diagnose(evidence, gateway)


def build_gap_report(gaps, diagnoses, tau, student, generated_at) -> GapReport:
    if len(gaps) != len(diagnoses):
        raise CountMismatch(f"{len(gaps)} gaps but {len(diagnoses)} diagnoses for {student}")
    for gap, diagnosis in zip(gaps, diagnoses):
        if gap.topic != diagnosis.topic:
            raise CountMismatch(f"diagnosis for {diagnosis.topic!r} is paired with gap {gap.topic!r}")
    return GapReport(
        student=student,
        gaps=tuple(zip(gaps, diagnoses)),
        tau_used=tau,
        generated_at=generated_at,
    )
