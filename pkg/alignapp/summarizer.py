"""Five-section learner summaries.

Template mode fills the Django templates under ``templates/alignapp/summary``
from the gap report, the recommendations and the proficiency vector. Agent
mode asks the model for the same five sections under ``## <key>`` headings.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from django.template.loader import render_to_string

from .exceptions import MissingSection, StudentMismatch
from .gateway import with_retry
from .models import Band, Modality, Pacing

logger = logging.getLogger(__name__)

SECTION_KEYS = (
    "overall_trends",
    "topic_insights",
    "concept_gaps",
    "actionable_guidance",
    "motivational_support",
)

SECTION_TITLES = {
    "overall_trends": "Overall performance trends",
    "topic_insights": "Topic-level insights",
    "concept_gaps": "Concept gaps",
    "actionable_guidance": "Actionable guidance",
    "motivational_support": "Motivational support",
}

SECTION_HEADING = re.compile(r"^\s*##\s*([A-Za-z_ ]+?)\s*:?\s*$")


@dataclass(frozen=True)
class StudentSummary:
    student: str
    sections: dict

    def ordered(self):
        return [(key, self.sections[key]) for key in SECTION_KEYS]


def _check_students(report, recs, prefs, vector):
    for other in (recs, prefs, vector):
        if other is not None and other.student != report.student:
            raise StudentMismatch(
                f"summary inputs mix students {report.student!r} and {other.student!r}"
            )


def _fmt(rho: float) -> str:
    return f"{rho:.2f}"


def summary_context(report, recs, prefs, vector=None) -> dict:
    topics = []
    if vector is not None:
        topics = [
            {"topic": e.topic, "rho": _fmt(e.rho), "band": e.band, "evidence": e.evidence_count}
            for e in vector.ordered()
        ]
    gaps = [
        {"topic": gap.topic, "rho": _fmt(gap.rho), "rank": gap.rank, "statements": list(diagnosis.statements)}
        for gap, diagnosis in report.gaps
    ]
    resources = [
        {"title": r.title or r.url, "url": r.url, "topic": r.topic, "modality": Modality(r.modality).label}
        for r in recs.resources
    ]
    strong = [t["topic"] for t in topics if t["band"] == Band.HIGH]
    counts = {band: sum(1 for t in topics if t["band"] == band) for band in Band.values}
    return {
        "student": report.student,
        "tau": _fmt(report.tau_used),
        "topics": topics,
        "gaps": gaps,
        "resources": resources,
        "scored_count": sum(1 for t in topics if t["evidence"]),
        "high_count": counts[Band.HIGH.value],
        "medium_count": counts[Band.MEDIUM.value],
        "low_count": counts[Band.LOW.value],
        "strong_topics": ", ".join(strong),
        "gap_topics": ", ".join(g["topic"] for g in gaps),
        "pacing": Pacing(prefs.pacing).label if prefs.pacing in Pacing.values else prefs.pacing,
        "self_paced": prefs.pacing == Pacing.SELF_PACED,
        "top_modalities": ", ".join(Modality(m).label for m in prefs.top_modalities()),
        "feedback_style": prefs.feedback_style,
        "notes": prefs.notes,
    }


def summarize_by_template(context: dict) -> dict:
    return {
        key: render_to_string(f"alignapp/summary/{key}.txt", context).strip()
        for key in SECTION_KEYS
    }


# ── agent mode ────────────────────────────────────────────────────────────────

def summary_bindings(context: dict) -> dict:
    proficiency = "\n".join(
        f"- {t['topic']}: {t['rho']} ({t['band']})" for t in context["topics"]
    ) or "- no topic scores"
    gaps = "\n".join(
        f"- {g['topic']} ({g['rho']}): " + "; ".join(g["statements"]) for g in context["gaps"]
    ) or "- none"
    resources = "\n".join(
        f"- {r['title']} [{r['modality']}, {r['topic']}] {r['url']}" for r in context["resources"]
    ) or "- none"
    preferences = (
        f"pacing: {context['pacing']}\n"
        f"preferred formats: {context['top_modalities']}\n"
        f"feedback: {context['feedback_style'] or 'not stated'}"
    )
    return {
        "proficiency": proficiency,
        "gaps": gaps,
        "resources": resources,
        "preferences": preferences,
        "notes": context["notes"] or "nothing recorded",
        "tau": context["tau"],
    }


def parse_sections(text: str, resource_urls=()) -> dict:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        match = SECTION_HEADING.match(line)
        if match:
            key = match.group(1).strip().lower().replace(" ", "_")
            current = key if key in SECTION_KEYS else None
            if current is not None:
                sections.setdefault(current, [])
            continue
        if current is not None:
            sections[current].append(line)
    parsed = {key: "\n".join(lines).strip() for key, lines in sections.items()}
    missing = [key for key in SECTION_KEYS if not parsed.get(key)]
    if missing:
        raise MissingSection(f"summary reply lacks section(s): {', '.join(missing)}")
    if resource_urls and not any(url in parsed["actionable_guidance"] for url in resource_urls):
        raise MissingSection("actionable_guidance does not cite any recommended resource URL")
    return {key: parsed[key] for key in SECTION_KEYS}


def summarize(report, recs, prefs, vector=None, gateway=None) -> StudentSummary:
    """Build the summary with templates, or with the model when a gateway is given."""
    _check_students(report, recs, prefs, vector)
    context = summary_context(report, recs, prefs, vector)
    if gateway is None:
        sections = summarize_by_template(context)
    else:
        urls = [r.url for r in recs.resources]
        sections = with_retry(
            gateway, "summarize", summary_bindings(context),
            lambda text: parse_sections(text, urls), MissingSection,
            "Reply again with exactly these five headings, each followed by text: "
            + ", ".join(f"## {key}" for key in SECTION_KEYS)
            + ". Cite every resource by its URL under ## actionable_guidance.",
        )
    logger.debug("summary student=%s gaps=%d resources=%d", report.student, len(report.gaps), len(recs.resources))
    return StudentSummary(student=report.student, sections=sections)


def render_summary(summary: StudentSummary) -> str:
    parts = [f"# Learner summary: {summary.student}"]
    for key, text in summary.ordered():
        parts.append(f"## {SECTION_TITLES[key]}\n\n{text}")
    return "\n\n".join(parts) + "\n"
