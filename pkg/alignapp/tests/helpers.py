import re

from django.conf import settings

from alignapp.gateway import AgentResponse
from alignapp.learner_data import validate_dataset
from alignapp.models import GradebookEntry, PreferenceSurvey, QuestionResponse, QuizQuestion

SAMPLE_COURSE = settings.BASE_DIR / "sample_course" / "course.json"
SAMPLE_FIXTURES = settings.BASE_DIR / "sample_course" / "fixtures"


class ScriptedBackend:
    """Answers every request with ``reply(user_text)`` and remembers what it was asked."""

    kind = "scripted"

    def __init__(self, reply):
        self.reply = reply
        self.requests = []

    def send(self, request):
        self.requests.append(request)
        return AgentResponse(text=self.reply(request.user_text), model_id=request.model_id)


def scripted_reply(user_text):
    """A well-behaved model for every prompt in prompts/."""
    if user_text.startswith("Task: label"):
        return "Medium"
    if user_text.startswith("Task: assign a proficiency band"):
        return "Medium"
    if user_text.startswith("Task: diagnose"):
        ids = re.findall(r"^- \[([^\]]+)\]", user_text, re.MULTILINE)
        return "\n".join(f"{n}. Misreads the idea tested by {qid} [evidence: {qid}]" for n, qid in enumerate(ids, 1))
    if user_text.startswith("Task: check resource"):
        return "YES: it covers the topic in a preferred format."
    if user_text.startswith("Task: summarize learning"):
        return "Prefers evening study with written feedback."
    if user_text.startswith("Task: write a learner summary"):
        urls = sorted(set(re.findall(r"https?://\S+", user_text)))
        guidance = "\n".join(f"- Work through {url}" for url in urls) or "- Review the quiz questions."
        return (
            "## overall_trends\nSteady progress.\n"
            "## topic_insights\nSee the scores above.\n"
            "## concept_gaps\nThe listed gaps only.\n"
            f"## actionable_guidance\n{guidance}\n"
            "## motivational_support\nKeep going."
        )
    raise AssertionError(f"unexpected prompt: {user_text[:60]!r}")


def mc_question(question_id, topic="Trees", quiz_id="quiz1", correct="A", options=("A", "B", "C", "D"),
                tags=(), difficulty="Easy", text=None):
    return QuizQuestion(
        question_id=question_id,
        quiz_id=quiz_id,
        topic=topic,
        kind="multiple_choice",
        text=text or f"Question {question_id} about {topic}",
        options=tuple(options),
        correct_answer=correct,
        concept_tags=tuple(tags),
        instructor_difficulty=difficulty,
    )


def sa_question(question_id, topic="Trees", quiz_id="quiz1", correct="O(n)", tags=(), difficulty="Hard"):
    return QuizQuestion(
        question_id=question_id,
        quiz_id=quiz_id,
        topic=topic,
        kind="short_answer",
        text=f"Short answer {question_id}",
        options=(),
        correct_answer=correct,
        concept_tags=tuple(tags),
        instructor_difficulty=difficulty,
    )


def response(student, question_id, answer, earned=1.0, possible=1.0):
    return QuestionResponse(student, question_id, answer, earned, possible)


def entry(student, assessment, topic, earned, possible=1.0):
    return GradebookEntry(student, assessment, topic, earned, possible)


def survey(student, ranking=("video", "text_pdf", "interactive", "hands_on"), pacing="self_paced", free_text=()):
    return PreferenceSurvey(student=student, pacing=pacing, modality_ranking=tuple(ranking), free_text=tuple(free_text))


def make_dataset(questions=(), responses=(), gradebook=(), surveys=(), exam_ids=(), course_id="test"):
    dataset = validate_dataset(list(questions), list(responses), list(gradebook), list(surveys), list(exam_ids),
                               course_id=course_id)
    assert not hasattr(dataset, "violations"), dataset
    return dataset
