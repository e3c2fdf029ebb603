import json
import random
import shutil
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from alignapp.exceptions import (
    BoundsError,
    DatasetInvalid,
    DuplicateModality,
    InvalidAnswer,
    MalformedRow,
    SchemaError,
)
from alignapp.learner_data import (
    check_dataset,
    load_course,
    parse_gradebook,
    parse_preferences,
    parse_question_bank,
    parse_responses,
    validate_dataset,
    write_course,
)
from alignapp.cohort_sim import SimConfig, generate_cohort
from alignapp.models import CourseDataset, GradebookEntry

from .helpers import SAMPLE_COURSE, entry, make_dataset, mc_question, response, sa_question, survey

HEADER = "student_id,assessment_id,topic,points_earned,points_possible\n"


class GradebookParsingTests(SimpleTestCase):
    def test_valid_rows(self):
        entries = parse_gradebook(HEADER + "s1,quiz1,Trees,8,10\ns2,quiz1, Trees ,10,10\n")
        self.assertEqual(len(entries), 2)
        self.assertEqual(entries[0].normalized_score, 0.8)
        self.assertEqual(entries[1].topic, "Trees")

    def test_utf8_bom_is_accepted(self):
        entries = parse_gradebook((HEADER + "s1,quiz1,Trees,1,2\n").encode("utf-8-sig"))
        self.assertEqual(entries[0].student, "s1")

    def test_earned_above_possible_is_bounds_error(self):
        with self.assertRaises(BoundsError) as ctx:
            parse_gradebook(HEADER + "s1,quiz1,Trees,11,10\n")
        self.assertEqual(ctx.exception.line, 2)

    def test_zero_possible_is_bounds_error(self):
        with self.assertRaises(BoundsError):
            parse_gradebook(HEADER + "s1,quiz1,Trees,0,0\n")

    def test_non_numeric_points_is_malformed(self):
        with self.assertRaises(MalformedRow) as ctx:
            parse_gradebook(HEADER + "s1,quiz1,Trees,8,10\ns1,quiz2,Trees,eight,10\n")
        self.assertEqual(ctx.exception.line, 3)

    def test_missing_column_is_malformed(self):
        with self.assertRaises(MalformedRow):
            parse_gradebook(HEADER + "s1,quiz1,Trees,8\n")

    def test_wrong_header_is_schema_error(self):
        with self.assertRaises(SchemaError):
            parse_gradebook("student,assessment,topic,earned,possible\n")

    def test_empty_file_is_schema_error(self):
        with self.assertRaises(SchemaError):
            parse_gradebook("")


class ResponseParsingTests(SimpleTestCase):
    def test_quoted_answer_with_comma(self):
        rows = parse_responses(
            "student_id,question_id,selected_answer,points_earned,points_possible\n"
            's1,q1,"O(n), then O(1)",1,1\n'
        )
        self.assertEqual(rows[0].selected_answer, "O(n), then O(1)")


class QuestionBankTests(SimpleTestCase):
    def base(self, **overrides):
        question = {
            "question_id": "q1", "quiz_id": "quiz1", "topic": "Trees", "kind": "multiple_choice",
            "text": "Height of a balanced tree?", "options": ["O(1)", "O(log n)"], "correct_answer": "O(log n)",
            "concept_tags": ["height"], "instructor_difficulty": "Easy",
        }
        question.update(overrides)
        return question

    def test_valid_question(self):
        [question] = parse_question_bank(json.dumps([self.base()]))
        self.assertEqual(question.options, ("O(1)", "O(log n)"))
        self.assertEqual(question.concept_tags, ("height",))
        self.assertTrue(question.is_multiple_choice)

    def test_answer_outside_options(self):
        with self.assertRaises(InvalidAnswer) as ctx:
            parse_question_bank(json.dumps([self.base(correct_answer="O(n)")]))
        self.assertEqual(ctx.exception.question_id, "q1")

    def test_short_answer_has_no_options(self):
        [question] = parse_question_bank(json.dumps([self.base(kind="short_answer", options=["x"], correct_answer="n")]))
        self.assertEqual(question.options, ())

    def test_long_fields_are_accepted(self):
        text = "Given the recurrence below, " + "expand one more level and " * 20 + "state the bound."
        [question] = parse_question_bank(json.dumps([self.base(text=text, topic="T" * 300)]))
        self.assertEqual(question.text, text)
        self.assertEqual(len(question.topic), 300)

    def test_unknown_difficulty_is_schema_error(self):
        with self.assertRaises(SchemaError):
            parse_question_bank(json.dumps([self.base(instructor_difficulty="Brutal")]))

    def test_duplicate_ids(self):
        with self.assertRaises(SchemaError):
            parse_question_bank(json.dumps([self.base(), self.base()]))

    def test_not_an_array(self):
        with self.assertRaises(SchemaError):
            parse_question_bank(json.dumps(self.base()))


class PreferenceTests(SimpleTestCase):
    def survey(self, ranking):
        return json.dumps([{"student_id": "s1", "pacing": "self_paced", "modality_ranking": ranking,
                            "extra": {"goal": "pass"}}])

    def test_valid_survey(self):
        [parsed] = parse_preferences(self.survey(["video", "text_pdf", "interactive", "hands_on"]))
        self.assertEqual(parsed.modality_ranking[0], "video")
        self.assertEqual(parsed.extra, {"goal": "pass"})

    def test_duplicate_modality(self):
        with self.assertRaises(DuplicateModality) as ctx:
            parse_preferences(self.survey(["video", "video", "interactive", "hands_on"]))
        self.assertEqual(ctx.exception.modality, "video")

    def test_incomplete_ranking(self):
        with self.assertRaises(SchemaError):
            parse_preferences(self.survey(["video", "text_pdf"]))


class CrossReferenceTests(SimpleTestCase):
    def test_dangling_response_and_missing_exam(self):
        report = check_dataset(
            [mc_question("q1")],
            [response("s1", "q1", "A"), response("s1", "q9", "A"), response("ghost", "q1", "B", 0.0)],
            [entry("s1", "quiz1", "Trees", 1.0)],
            [],
            ["midterm"],
        )
        kinds = sorted(v.kind for v in report.violations)
        self.assertEqual(kinds, ["DanglingReference", "MissingExam", "UnknownStudent"])
        self.assertFalse(report.is_valid)

    def test_survey_only_student_is_on_roster(self):
        result = validate_dataset(
            [mc_question("q1")], [response("s2", "q1", "A")], [entry("s1", "quiz1", "Trees", 1.0)],
            [survey("s2")], [],
        )
        self.assertIsInstance(result, CourseDataset)
        self.assertEqual(result.sorted_students(), ["s1", "s2"])

    def test_topics_are_the_union_of_questions_and_gradebook(self):
        result = validate_dataset(
            [mc_question("q1", topic="Heaps")], [], [entry("s1", "quiz1", "Trees", 1.0)], [], [],
        )
        self.assertEqual(result.topics, ["Heaps", "Trees"])


class BundleTests(SimpleTestCase):
    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp)

    def test_sample_course_loads(self):
        dataset = load_course(SAMPLE_COURSE)
        self.assertEqual(dataset.course_id, "cs-sample")
        self.assertEqual(dataset.sorted_students(), ["s01", "s02", "s03", "s04"])
        self.assertEqual(dataset.exam_assessment_ids, frozenset({"midterm", "final"}))
        self.assertEqual(dataset.topics, ["Big-O Analysis", "Graph Traversal", "Linked Lists"])

    def test_write_then_load_preserves_dataset(self):
        dataset = load_course(SAMPLE_COURSE)
        manifest = write_course(dataset, self.tmp / "copy")
        again = load_course(manifest)
        self.assertEqual(again.questions, dataset.questions)
        self.assertEqual(again.responses, dataset.responses)
        self.assertEqual(again.gradebook, dataset.gradebook)
        self.assertEqual(again.surveys, dataset.surveys)

    def test_invalid_bundle_raises_with_report(self):
        shutil.copytree(SAMPLE_COURSE.parent, self.tmp / "course", ignore=shutil.ignore_patterns("fixtures"))
        manifest = self.tmp / "course" / "course.json"
        data = json.loads(manifest.read_text())
        data["exam_assessment_ids"] = ["midterm", "quiz9"]
        manifest.write_text(json.dumps(data))
        with self.assertRaises(DatasetInvalid) as ctx:
            load_course(manifest)
        self.assertEqual([v.kind for v in ctx.exception.report.violations], ["MissingExam"])


class BlankAnswerTests(SimpleTestCase):
    def test_blank_selected_answer_is_kept_as_empty(self):
        rows = parse_responses(
            "student_id,question_id,selected_answer,points_earned,points_possible\n"
            "s1,q1,,0,1\n"
            "s1,q2, B ,1,1\n"
        )
        self.assertEqual(rows[0].selected_answer, "")
        self.assertEqual(rows[0].points_earned, 0.0)
        self.assertEqual(rows[1].selected_answer, " B ")


class RandomGradebookTests(SimpleTestCase):
    def test_normalized_score_is_earned_over_possible(self):
        from decimal import Decimal

        rng = random.Random(11)
        lines, expected = [], []
        for i in range(200):
            possible = Decimal(rng.randint(1, 100_000)) / 1000
            earned = (possible * Decimal(rng.randint(0, 1000)) / 1000).quantize(Decimal("0.001"))
            earned = min(earned, possible)
            lines.append(f"s{i % 7},quiz{i % 3},Topic {i % 5},{earned},{possible}\n")
            expected.append(float(earned / possible))
        entries = parse_gradebook(HEADER + "".join(lines))
        self.assertEqual(len(entries), 200)
        for parsed, want in zip(entries, expected):
            self.assertAlmostEqual(parsed.normalized_score, want, delta=1e-9)
            self.assertGreaterEqual(parsed.normalized_score, 0.0)
            self.assertLessEqual(parsed.normalized_score, 1.0)


ANSWER_POOL = ["A", "B", "", " spaced ", "O(n), then O(1)", 'say "hi"', "ünïcode", "n log n"]
TOPIC_POOL = ["Trees", "Graphs, weighted", "Höhe und Tiefe"]


def random_dataset(rng, course_id):
    students = [f"s{i}" for i in range(1, rng.randint(2, 5) + 1)]
    questions = []
    for i in range(1, rng.randint(2, 8) + 1):
        topic = rng.choice(TOPIC_POOL)
        quiz = rng.choice(["quiz1", "quiz2", "midterm"])
        difficulty = rng.choice([None, "Easy", "Medium", "Hard"])
        tags = tuple(rng.sample(["height", "rotation", "a, b", "cycle"], rng.randint(0, 2)))
        if rng.random() < 0.6:
            options = tuple(rng.sample(["A", "B", "O(n), then O(1)", 'say "hi"', "ünïcode"], rng.randint(2, 4)))
            questions.append(mc_question(f"q{i}", topic=topic, quiz_id=quiz, correct=rng.choice(options),
                                         options=options, tags=tags, difficulty=difficulty))
        else:
            questions.append(sa_question(f"q{i}", topic=topic, quiz_id=quiz, correct="n log n",
                                         tags=tags, difficulty=difficulty))
    responses = []
    for _ in range(rng.randint(0, 20)):
        earned = float(rng.randint(0, 1))
        responses.append(response(rng.choice(students), rng.choice(questions).question_id,
                                  rng.choice(ANSWER_POOL), earned, 1.0))
    gradebook = [entry(s, "midterm", rng.choice(TOPIC_POOL), rng.randint(0, 40) / 4, 10.0) for s in students]
    for _ in range(rng.randint(0, 10)):
        possible = rng.choice([1.0, 2.5, 10.0, 0.3])
        gradebook.append(GradebookEntry(rng.choice(students), rng.choice(["quiz1", "quiz2"]),
                                        rng.choice(TOPIC_POOL), possible * rng.randint(0, 4) / 4, possible))
    surveys = []
    for student in rng.sample(students, rng.randint(0, len(students))):
        ranking = ["video", "text_pdf", "interactive", "hands_on"]
        rng.shuffle(ranking)
        notes = tuple(sorted(rng.sample([("goal", "pass the final"), ("when", "evenings, mostly"),
                                         ("style", "worked examples")], rng.randint(0, 3))))
        surveys.append(survey(student, ranking=ranking, pacing=rng.choice(["self_paced", "instructor_paced"]),
                              free_text=notes))
    return make_dataset(questions, responses, gradebook, surveys, ["midterm"], course_id=course_id)


class GeneratedRoundTripTests(SimpleTestCase):
    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp)

    def assertRoundTrips(self, dataset, name):
        first = write_course(dataset, self.tmp / name / "a")
        again = load_course(first)
        self.assertEqual(again, dataset)
        second = write_course(again, self.tmp / name / "b")
        for path in sorted(first.parent.iterdir()):
            self.assertEqual((second.parent / path.name).read_bytes(), path.read_bytes(), path.name)

    def test_random_bundles_survive_write_and_load(self):
        rng = random.Random(2024)
        for round_ in range(25):
            with self.subTest(round=round_):
                self.assertRoundTrips(random_dataset(rng, f"gen-{round_}"), f"r{round_}")

    def test_simulated_cohorts_survive_write_and_load(self):
        for seed in (1, 7, 19):
            with self.subTest(seed=seed):
                dataset, _ = generate_cohort(SimConfig(seed=seed, n_students=6, n_topics=3))
                self.assertRoundTrips(dataset, f"sim{seed}")
