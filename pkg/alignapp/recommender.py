"""Preference-aware resource recommendation.

Gaps are visited most severe first. Each gap gets one search; its candidates
are fetched and checked in search order, and accepted resources are appended
until the student's budget K is spent, at which point both loops stop. With
``per_gap=True`` K is instead a budget per gap.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .exceptions import BrokenLink, ConfigError, UnparseableVerdict
from .gateway import with_retry
from .models import ConceptDiagnosis, ExtractedPreferences, GapReport, Modality, SkillGapEntry
from .web import EXCERPT_CHARS, MAX_RESULTS, SearchResult, canonical_url, is_absolute_url, page_text

logger = logging.getLogger(__name__)

MODALITY_KEYWORDS = {
    Modality.VIDEO: "video tutorial",
    Modality.TEXT_PDF: "reading notes pdf",
    Modality.INTERACTIVE: "interactive tutorial",
    Modality.HANDS_ON: "hands-on exercises",
}

VIDEO_PAGE, ARTICLE, PDF, INTERACTIVE = "video_page", "article", "pdf", "interactive"

MEDIA_MODALITIES = {
    VIDEO_PAGE: (Modality.VIDEO.value,),
    ARTICLE: (Modality.TEXT_PDF.value,),
    PDF: (Modality.TEXT_PDF.value,),
    INTERACTIVE: (Modality.INTERACTIVE.value, Modality.HANDS_ON.value),
}

VIDEO_HOSTS = ("youtube.com", "youtu.be", "vimeo.com")
INTERACTIVE_HINTS = ("visualgo.net", "codepen.io", "replit.com", "jsfiddle.net", "/interactive", "/playground", "/sandbox")

VERDICT = re.compile(r"^\W*(yes|no)\b[\s:.,-]*(.*)$", re.IGNORECASE | re.DOTALL)


@dataclass(frozen=True)
class SearchQuery:
    gap_topic: str
    text: str
    preferred_modality: str


@dataclass(frozen=True)
class ResourceContent:
    url: str
    media_kind: str
    text_excerpt: str
    http_status: int


@dataclass(frozen=True)
class Resource:
    url: str
    title: str
    topic: str
    modality: str
    rationale: str


@dataclass
class RecommendationSet:
    student: str
    resources: list = field(default_factory=list)
    k_requested: int = 1

    def as_dict(self) -> dict:
        return {
            "student_id": self.student,
            "k_requested": self.k_requested,
            "resources": [
                {"url": r.url, "title": r.title, "topic": r.topic, "modality": r.modality, "rationale": r.rationale}
                for r in self.resources
            ],
        }


def construct_query(gap: SkillGapEntry, prefs: ExtractedPreferences, diagnosis: ConceptDiagnosis | None) -> SearchQuery:
    preferred = prefs.ranked_modalities[0]
    parts = [gap.topic]
    for phrase in (diagnosis.keyphrases if diagnosis else ())[:2]:
        if phrase.casefold() != gap.topic.casefold():
            parts.append(phrase)
    parts.append(MODALITY_KEYWORDS[Modality(preferred)])
    return SearchQuery(gap_topic=gap.topic, text=" ".join(parts), preferred_modality=preferred)


def web_search(query: SearchQuery, backend) -> list[SearchResult]:
    results = []
    for result in backend.search(query.text)[:MAX_RESULTS]:
        if not is_absolute_url(result.url):
            logger.warning("search query=%r dropped non-absolute url=%r", query.text, result.url)
            continue
        results.append(result)
    return results


def media_kind(url: str, content_type: str) -> str:
    lowered = url.lower()
    content_type = content_type.lower()
    if "pdf" in content_type or lowered.split("?")[0].endswith(".pdf"):
        return PDF
    if content_type.startswith("video/") or any(host in lowered for host in VIDEO_HOSTS):
        return VIDEO_PAGE
    if any(hint in lowered for hint in INTERACTIVE_HINTS):
        return INTERACTIVE
    return ARTICLE


def web_retrieve(url: str, backend) -> ResourceContent:
    page = backend.fetch(url)
    if not 200 <= page.status <= 299:
        raise BrokenLink(url, page.status)
    kind = media_kind(url, page.content_type)
    return ResourceContent(
        url=url,
        media_kind=kind,
        text_excerpt=page_text(page.body, page.content_type)[:EXCERPT_CHARS],
        http_status=page.status,
    )


def matching_modality(content: ResourceContent, prefs: ExtractedPreferences, top_n: int = 2) -> str | None:
    offered = MEDIA_MODALITIES[content.media_kind]
    for modality in prefs.top_modalities(top_n):
        if modality in offered:
            return modality
    return None


def _parse_verdict(text: str):
    match = VERDICT.match(text.strip())
    if not match:
        raise UnparseableVerdict(f"reply does not start with YES or NO: {text[:80]!r}")
    return match.group(1).lower() == "yes", match.group(2).strip() or "no reason given"


def check_compatibility(content, prefs, gap, diagnosis, gateway=None, title=""):
    """Return (accepted, rationale)."""
    if gateway is not None:
        bindings = {
            "topic": gap.topic,
            "concepts": ", ".join(diagnosis.keyphrases) if diagnosis and diagnosis.keyphrases else "none recorded",
            "modalities": ", ".join(prefs.ranked_modalities),
            "media_kind": content.media_kind,
            "title": title or "(untitled)",
            "excerpt": content.text_excerpt[:1500] or "(no text)",
        }
        return with_retry(
            gateway, "compat", bindings, _parse_verdict, UnparseableVerdict,
            "Start your reply with YES or NO, then a colon and one sentence of reason.",
        )

    modality = matching_modality(content, prefs)
    if modality is None:
        return False, f"{content.media_kind} does not suit preferred modalities {', '.join(prefs.top_modalities())}"
    haystack = f"{title} {content.text_excerpt}".casefold()
    terms = [gap.topic, *(diagnosis.keyphrases if diagnosis else ())]
    for term in terms:
        if term and term.casefold() in haystack:
            return True, f"{content.media_kind} suits preferred modality {modality} and covers '{term}'"
    return False, "topic not evidenced"


def recommend(report: GapReport, prefs: ExtractedPreferences, k: int, search_backend, fetch_backend,
              gateway=None, per_gap=False) -> RecommendationSet:
    if k < 1:
        raise ConfigError(f"K must be at least 1, got {k}")
    recs = RecommendationSet(student=report.student, k_requested=k)
    chosen = set()
    budget_spent = False
    for gap, diagnosis in report.gaps:
        query = construct_query(gap, prefs, diagnosis)
        accepted_here = 0
        for result in web_search(query, search_backend):
            url = canonical_url(result.url)
            if url in chosen:
                continue
            try:
                content = web_retrieve(result.url, fetch_backend)
            except BrokenLink as exc:
                logger.info("student=%s topic=%s skipped broken link %s", report.student, gap.topic, exc)
                continue
            accepted, rationale = check_compatibility(content, prefs, gap, diagnosis, gateway, title=result.title)
            if not accepted:
                logger.debug("student=%s topic=%s rejected url=%s: %s", report.student, gap.topic, url, rationale)
                continue
            modality = matching_modality(content, prefs, top_n=4) or MEDIA_MODALITIES[content.media_kind][0]
            recs.resources.append(Resource(url=url, title=result.title, topic=gap.topic,
                                           modality=modality, rationale=rationale))
            chosen.add(url)
            accepted_here += 1
            if per_gap and accepted_here == k:
                break
            if not per_gap and len(recs.resources) == k:
                budget_spent = True
                break
        if budget_spent:
            break
    logger.info("student=%s gaps=%d recommended=%d k=%d", report.student, len(report.gaps), len(recs.resources), k)
    return recs
