"""Stage runners behind ``manage.py align``.

Each stage reads what earlier stages produced on the same ``PipelineRun`` and
writes its interface files into the output directory. Per-student work runs on
a thread pool; results are collected in student-id order so the files do not
depend on scheduling.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from functools import cached_property
from pathlib import Path

from .cohort_sim import generate_cohort, recovery_report
from .conf import RunConfig, report_timestamp
from .diagnosis import assemble_evidence, build_gap_report, diagnose_gap, extract_preferences
from .evaluation import (
    compare_label_sets,
    confusion,
    derive_ground_truth,
    emit_chart_data,
    metrics,
    nest_pairs,
    predicted_bands,
    render_table,
)
from .exceptions import ConfigError, DatasetInvalid, IoError
from .gateway import Gateway, LiveChatBackend, ReplayBackend, record_session
from .labeling import (
    best_label_set,
    label_bank_with_models,
    label_set_to_dict,
    load_instructor_labels,
    model_source,
)
from .learner_data import ValidationReport, load_course, write_course
from .models import ExtractedPreferences, Modality
from .proficiency import (
    agent_bands,
    identify_gaps,
    item_outcomes,
    process_gradebook,
    proficiency_entries,
    student_proficiency,
)
from .recommender import recommend
from .summarizer import render_summary, summarize
from .web import LiveFetchBackend, LiveSearchBackend, fixture_backends

logger = logging.getLogger(__name__)


def write_json(path: Path, data) -> Path:
    return write_text(path, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def write_text(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    logger.debug("wrote %s", path)
    return path


def file_slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", text).strip("-")


def default_preferences(student) -> ExtractedPreferences:
    """Used for students who returned no survey."""
    return ExtractedPreferences(student=student, pacing="", ranked_modalities=tuple(Modality.values))


class PipelineRun:
    def __init__(self, config: RunConfig, dataset=None, gateway=None, search=None, fetch=None):
        self.config = config
        self.out = Path(config.out)
        self._dataset = dataset
        self._gateway = gateway
        self._search, self._fetch = search, fetch
        self.vectors = {}
        self.gaps = {}
        self.preferences = {}
        self.reports = {}
        self.recommendations = {}
        self.summaries = {}
        self.label_sets = []
        self.label_gateways = []
        self.agent_gateways = []

    # ── shared resources ──────────────────────────────────────────────────────

    @property
    def dataset(self):
        if self._dataset is None:
            if self.config.course is None:
                raise ConfigError("--course is required for this subcommand")
            self._dataset = load_course(self.config.course)
        return self._dataset

    @cached_property
    def chat_backend(self):
        if self.config.replay is not None:
            return ReplayBackend.from_file(self.config.replay)
        return LiveChatBackend()

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            self._gateway = Gateway(self.chat_backend, self.config.model_id)
        return self._gateway

    def stage_gateway(self, stage: str):
        return self.gateway if self.config.agent(stage) else None

    def web_backends(self):
        if self._search is None:
            if self.config.fixtures is not None:
                self._search, self._fetch = fixture_backends(self.config.fixtures)
            else:
                self._search, self._fetch = LiveSearchBackend(), LiveFetchBackend()
        return self._search, self._fetch

    @cached_property
    def generated_at(self):
        return report_timestamp(self.config)

    def per_student(self, work):
        students = self.dataset.sorted_students()
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return dict(zip(students, pool.map(work, students)))

    def record(self):
        if self.config.record is None:
            return None
        transcripts = list(self._gateway.transcripts) if self._gateway is not None else []
        for gateway in [*self.label_gateways, *self.agent_gateways]:
            transcripts.extend(gateway.transcripts)
        return record_session(transcripts, self.config.record)

    # ── stages ────────────────────────────────────────────────────────────────

    def validate(self) -> ValidationReport:
        try:
            dataset = self.dataset
        except DatasetInvalid as exc:
            write_json(self.out / "validation.json", {"course_id": self._course_label(), **exc.report.as_dict()})
            raise
        report = ValidationReport()
        write_json(self.out / "validation.json", {
            "course_id": dataset.course_id,
            **report.as_dict(),
            "counts": {
                "students": len(dataset.students),
                "questions": len(dataset.questions),
                "responses": len(dataset.responses),
                "gradebook": len(dataset.gradebook),
                "surveys": len(dataset.surveys),
            },
        })
        return report

    def _course_label(self):
        return self.config.course.parent.name if self.config.course is not None else ""

    def difficulty_labels(self):
        """Labels shown to the proficiency model: the best set from the label stage, else the instructor's."""
        if self.label_sets:
            return best_label_set(self.label_sets)
        return load_instructor_labels(self.dataset.questions)

    def student_vectors(self, model=None):
        """Proficiency vector per student; with a model gateway the bands are the model's."""
        dataset, config = self.dataset, self.config
        labels = self.difficulty_labels() if model is not None else None

        def work(student):
            vector = student_proficiency(dataset, student, config.bands, config.include_exams)
            if model is None:
                return vector
            grouped = process_gradebook(proficiency_entries(dataset, student, config.include_exams), dataset.topics)
            items = item_outcomes(dataset, student, labels, config.include_exams)
            bands = agent_bands(vector, grouped, model, items)
            return replace(vector, entries={
                topic: replace(entry, band=bands.get(topic, entry.band))
                for topic, entry in vector.entries.items()
            })

        return self.per_student(work)

    def proficiency(self):
        config = self.config
        model = self.stage_gateway("proficiency")
        self.vectors = self.student_vectors(model)
        self.gaps = {student: identify_gaps(vector, config.tau) for student, vector in self.vectors.items()}
        write_json(self.out / "proficiency.json", {
            "generated_at": self.generated_at.isoformat(),
            "tau": config.tau,
            "bands": {"high": config.bands.high_min, "medium": config.bands.medium_min},
            "band_source": model_source(model.model_id) if model is not None else "rules",
            "students": [
                {
                    "student_id": student,
                    "topics": [
                        {"topic": e.topic, "rho": e.rho, "band": e.band, "evidence_count": e.evidence_count}
                        for e in self.vectors[student].ordered()
                    ],
                    "gaps": [{"topic": g.topic, "rho": g.rho, "rank": g.rank} for g in self.gaps[student]],
                }
                for student in sorted(self.vectors)
            ],
        })
        logger.info("stage=proficiency students=%d gaps=%d", len(self.vectors), sum(map(len, self.gaps.values())))
        return self.vectors

    def extract_preferences(self):
        model = self.stage_gateway("preferences")

        def work(student):
            survey = self.dataset.survey_for(student)
            if survey is None:
                logger.warning("student=%s has no preference survey, using the default modality order", student)
                return default_preferences(student)
            return extract_preferences(survey, model)

        self.preferences = self.per_student(work)
        write_json(self.out / "preferences.json", {
            "generated_at": self.generated_at.isoformat(),
            "source": model_source(model.model_id) if model is not None else "rules",
            "students": [
                {
                    "student_id": student,
                    "pacing": prefs.pacing,
                    "ranked_modalities": list(prefs.ranked_modalities),
                    "feedback_style": prefs.feedback_style,
                    "notes": prefs.notes,
                }
                for student, prefs in sorted(self.preferences.items())
            ],
        })
        return self.preferences

    def diagnose(self):
        if not self.gaps:
            self.proficiency()
        if not self.preferences:
            self.extract_preferences()
        dataset, config = self.dataset, self.config
        model = self.stage_gateway("diagnose")

        def work(student):
            gaps = self.gaps[student]
            diagnoses = [
                diagnose_gap(assemble_evidence(dataset, student, gap.topic, config.include_exams), model)
                for gap in gaps
            ]
            return build_gap_report(gaps, diagnoses, config.tau, student, self.generated_at)

        self.reports = self.per_student(work)
        write_json(self.out / "gap_report.json", {
            "generated_at": self.generated_at.isoformat(),
            "tau_used": config.tau,
            "students": [
                {
                    "student_id": student,
                    "gaps": [
                        {
                            "topic": gap.topic,
                            "rho": gap.rho,
                            "rank": gap.rank,
                            "statements": list(diagnosis.statements),
                            "evidence_refs": list(diagnosis.evidence_refs),
                            "keyphrases": list(diagnosis.keyphrases),
                        }
                        for gap, diagnosis in report.gaps
                    ],
                }
                for student, report in sorted(self.reports.items())
            ],
        })
        logger.info("stage=diagnose students=%d", len(self.reports))
        return self.reports

    def recommend(self):
        if not self.reports:
            self.diagnose()
        config = self.config
        search, fetch = self.web_backends()
        model = self.stage_gateway("compat")
        # search and fetch fixtures keep call logs, so students run one at a time here
        self.recommendations = {
            student: recommend(report, self.preferences[student], config.k, search, fetch,
                               gateway=model, per_gap=config.k_per_gap)
            for student, report in sorted(self.reports.items())
        }
        write_json(self.out / "recommendations.json", {
            "generated_at": self.generated_at.isoformat(),
            "k": config.k,
            "k_per_gap": config.k_per_gap,
            "students": [recs.as_dict() for _, recs in sorted(self.recommendations.items())],
        })
        logger.info("stage=recommend resources=%d",
                    sum(len(r.resources) for r in self.recommendations.values()))
        return self.recommendations

    def summarize(self):
        if not self.recommendations:
            self.recommend()
        model = self.stage_gateway("summary")

        def work(student):
            return summarize(self.reports[student], self.recommendations[student], self.preferences[student],
                             self.vectors.get(student), model)

        self.summaries = self.per_student(work)
        for student, summary in sorted(self.summaries.items()):
            write_text(self.out / f"summary_{file_slug(student)}.md", render_summary(summary))
        logger.info("stage=summarize summaries=%d", len(self.summaries))
        return self.summaries

    def label(self):
        dataset = self.dataset
        instructor = load_instructor_labels(dataset.questions)
        self.label_gateways = [Gateway(self.chat_backend, model_id) for model_id in self.config.label_models]
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            model_sets = label_bank_with_models(dataset.questions, self.label_gateways, pool)
        self.label_sets = [instructor, *model_sets]
        for label_set in self.label_sets:
            name = "instructor" if label_set is instructor else file_slug(label_set.source)
            write_json(self.out / f"labels_{name}.json", label_set_to_dict(label_set))
        write_text(self.out / "chart_topic_difficulty.csv", emit_chart_data(dataset, best_label_set(self.label_sets)))
        logger.info("stage=label sources=%d questions=%d", len(self.label_sets), len(dataset.questions))
        return self.label_sets

    def evaluate(self):
        if not self.label_sets:
            self.label()
        if not self.vectors:
            self.proficiency()
        dataset, config = self.dataset, self.config
        truth = derive_ground_truth(dataset, config.bands)
        matrix = confusion(predicted_bands(self.vectors.values()), truth)
        report = metrics(matrix)
        source = model_source(config.model_id) if config.agent("proficiency") else "rules"
        table = [(source, report)]
        by_model = []
        for model_id in config.agent_models:
            if model_source(model_id) == source:
                continue
            gateway = Gateway(self.chat_backend, model_id)
            self.agent_gateways.append(gateway)
            model_matrix = confusion(predicted_bands(self.student_vectors(gateway).values()), truth)
            model_report = metrics(model_matrix)
            table.append((model_source(model_id), model_report))
            by_model.append({"source": model_source(model_id), "confusion": model_matrix.as_dict(),
                             "report": model_report.as_dict()})
        write_json(self.out / "metrics.json", {
            "source": source,
            "unit": "student-topic pair",
            "averaging": "macro",
            "ground_truth": nest_pairs(truth),
            "confusion": matrix.as_dict(),
            "report": report.as_dict(),
            "by_model": by_model,
        })
        write_text(self.out / "table_agent.csv", render_table(table))

        reference, candidates = self.label_sets[0], self.label_sets[1:]
        comparisons = []
        rows = []
        for candidate in candidates:
            if not (set(reference.labels) & set(candidate.labels)):
                logger.warning("labels source=%s shares no question with %s", candidate.source, reference.source)
                continue
            result = compare_label_sets(reference, candidate)
            comparisons.append({"source": candidate.source, "coverage": round(candidate.coverage, 6),
                                "report": result.as_dict()})
            rows.append((candidate.source, result))
        write_json(self.out / "label_comparison.json", {"reference": reference.source, "comparisons": comparisons})
        write_text(self.out / "table_labeling.csv", render_table(rows))
        logger.info("stage=evaluate pairs=%d accuracy=%.4f", report.n, report.accuracy)
        return report

    def pipeline(self):
        self.validate()
        self.label()
        self.proficiency()
        self.diagnose()
        self.recommend()
        self.summarize()
        self.evaluate()


def simulate(sim_config, out: Path, tau: float, bands):
    """Generate a cohort bundle under ``out`` and report how well gaps are recovered."""
    dataset, latents = generate_cohort(sim_config)
    manifest = write_course(dataset, out)
    recovery = recovery_report(dataset, latents, tau, bands)
    write_json(out / "recovery.json", {
        "seed": sim_config.seed,
        "noise": sim_config.noise,
        "tau": tau,
        **recovery.as_dict(),
        "latent_mastery": {
            latent.student: {topic: round(m, 6) for topic, m in sorted(latent.mastery.items())}
            for latent in latents
        },
    })
    logger.info("stage=simulate manifest=%s f1=%.4f", manifest, recovery.f1)
    return manifest, recovery
