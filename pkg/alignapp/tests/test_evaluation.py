import random
from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase

from alignapp.evaluation import (
    ConfusionMatrix,
    compare_label_sets,
    confusion,
    derive_ground_truth,
    emit_chart_data,
    f1_from_pr,
    metrics,
    nest_pairs,
    predicted_bands,
    render_table,
)
from alignapp.exceptions import EmptyIntersection, NoExamData
from alignapp.models import EVALUATED_BANDS, LabelSet
from alignapp.proficiency import BandConfig, compute_proficiency, process_gradebook

from .helpers import entry, make_dataset, mc_question, response


def matrix(rows, classes=EVALUATED_BANDS):
    return ConfusionMatrix(classes=tuple(classes), counts=np.array(rows, dtype=np.int64))


class F1Tests(SimpleTestCase):
    def test_reported_pairs(self):
        pairs = [
            ((0.90, 0.85), 0.87), ((0.87, 0.82), 0.84), ((0.83, 0.79), 0.81),
            ((0.81, 0.76), 0.78), ((0.82, 0.75), 0.78), ((0.75, 0.73), 0.74),
        ]
        for (precision, recall), f1 in pairs:
            with self.subTest(precision=precision, recall=recall):
                self.assertEqual(round(f1_from_pr(precision, recall), 2), f1)

    def test_binary_counts(self):
        # 9 true positives, 1 false positive, no false negatives
        self.assertAlmostEqual(f1_from_pr(9 / 10, 9 / 9), 18 / 19)

    def test_zero(self):
        self.assertEqual(f1_from_pr(0.0, 0.0), 0.0)


class MetricsTests(SimpleTestCase):
    def test_three_class_example(self):
        report = metrics(matrix([[5, 1, 0], [1, 3, 1], [0, 1, 2]]))
        self.assertEqual(report.n, 14)
        self.assertAlmostEqual(report.accuracy, 10 / 14)
        self.assertAlmostEqual(report.macro_precision, 0.7)
        self.assertAlmostEqual(report.macro_recall, 0.7)
        high = report.per_class[0]
        self.assertEqual((high.label, high.support), ("High", 6))
        self.assertAlmostEqual(high.precision, 5 / 6)
        self.assertEqual(report.zero_division, ())

    def test_zero_division_is_flagged(self):
        report = metrics(matrix([[4, 0, 0], [2, 0, 0], [0, 0, 0]]))
        self.assertEqual(report.zero_division, ("precision:Medium", "precision:Low", "recall:Low"))
        self.assertEqual(report.per_class[1].precision, 0.0)
        self.assertEqual(report.per_class[2].recall, 0.0)
        self.assertAlmostEqual(report.accuracy, 4 / 6)

    def test_random_matrices_match_exact_arithmetic(self):
        rng = random.Random(4242)
        for _ in range(1000):
            rows = [[rng.randint(0, 20) for _ in range(3)] for _ in range(3)]
            if not any(map(any, rows)):
                rows[0][0] = 1
            report = metrics(matrix(rows))
            n = sum(map(sum, rows))
            precisions, recalls = [], []
            for i in range(3):
                column = sum(rows[r][i] for r in range(3))
                row = sum(rows[i])
                precisions.append(Fraction(rows[i][i], column) if column else Fraction(0))
                recalls.append(Fraction(rows[i][i], row) if row else Fraction(0))
            self.assertAlmostEqual(report.accuracy, float(Fraction(sum(rows[i][i] for i in range(3)), n)), delta=1e-12)
            self.assertAlmostEqual(report.macro_precision, float(sum(precisions) / 3), delta=1e-12)
            self.assertAlmostEqual(report.macro_recall, float(sum(recalls) / 3), delta=1e-12)
            for c in report.per_class:
                self.assertGreaterEqual(c.f1, 0.0)
                self.assertLessEqual(c.f1, 1.0)
            f1s = [c.f1 for c in report.per_class]
            self.assertLessEqual(min(f1s) - 1e-12, report.macro_f1)
            self.assertLessEqual(report.macro_f1, max(f1s) + 1e-12)

    def test_as_dict_rounds(self):
        data = metrics(matrix([[1, 2, 0], [0, 1, 0], [0, 0, 0]])).as_dict()
        self.assertEqual(data["per_class"][0]["precision"], 1.0)
        self.assertEqual(data["per_class"][0]["recall"], 0.333333)
        self.assertEqual(data["n"], 4)


class ConfusionTests(SimpleTestCase):
    def test_rows_are_truth_and_unshared_pairs_are_skipped(self):
        pred = {("s1", "A"): "High", ("s1", "B"): "Low", ("s2", "A"): "Medium", ("s3", "A"): "High"}
        truth = {("s1", "A"): "High", ("s1", "B"): "Medium", ("s2", "A"): "Medium", ("s2", "B"): "Low"}
        result = confusion(pred, truth)
        self.assertEqual(result.counts.tolist(), [[1, 0, 0], [0, 1, 1], [0, 0, 0]])
        self.assertEqual(result.n, 3)
        self.assertEqual(len(result.skipped), 2)

    def test_unknown_band_is_not_counted(self):
        result = confusion({("s1", "A"): "Unknown", ("s1", "B"): "Low"}, {("s1", "A"): "Low", ("s1", "B"): "Low"})
        self.assertEqual(result.n, 1)

    def test_empty_intersection(self):
        with self.assertRaises(EmptyIntersection):
            confusion({("s1", "A"): "High"}, {("s2", "A"): "High"})


class GroundTruthTests(SimpleTestCase):
    def dataset(self):
        questions = [
            mc_question("q1", topic="Trees"),
            mc_question("x1", topic="Heaps", quiz_id="final"),
            mc_question("x2", topic="Trees", quiz_id="final"),
        ]
        responses = [
            response("s1", "q1", "A"),
            response("s1", "x1", "A", 0.9),
            response("s1", "x2", "A", 1.0),
        ]
        gradebook = [
            entry("s1", "quiz1", "Trees", 1.0),
            entry("s1", "final", "Trees", 0.4),
            entry("s1", "final", "Trees", 0.6),
        ]
        return make_dataset(questions, responses, gradebook, exam_ids=["final"])

    def test_exam_gradebook_rows_then_exam_responses(self):
        truth = derive_ground_truth(self.dataset(), BandConfig())
        self.assertEqual(truth, {("s1", "Heaps"): "High", ("s1", "Trees"): "Low"})
        self.assertEqual(nest_pairs(truth), {"s1": {"Heaps": "High", "Trees": "Low"}})

    def test_no_exams(self):
        dataset = make_dataset([mc_question("q1")], [], [entry("s1", "quiz1", "Trees", 1.0)])
        with self.assertRaises(NoExamData):
            derive_ground_truth(dataset, BandConfig())

    def test_predictions_leave_out_unknown_topics(self):
        topics = ["Heaps", "Trees"]
        vector = compute_proficiency(process_gradebook([entry("s1", "quiz1", "Trees", 0.9)], topics), topics,
                                     BandConfig(), "s1")
        self.assertEqual(predicted_bands([vector]), {("s1", "Trees"): "High"})


class LabelComparisonTests(SimpleTestCase):
    def test_scored_on_jointly_labelled_questions(self):
        reference = LabelSet("instructor", {"q1": "Easy", "q2": "Hard", "q3": "Medium"}, 1.0)
        candidate = LabelSet("model(m)", {"q1": "Easy", "q2": "Medium", "q4": "Hard"}, 0.75)
        report = compare_label_sets(reference, candidate)
        self.assertEqual(report.n, 2)
        self.assertEqual(report.accuracy, 0.5)

    def test_disjoint_label_sets(self):
        with self.assertRaises(EmptyIntersection):
            compare_label_sets(LabelSet("instructor", {"q1": "Easy"}, 1.0), LabelSet("model(m)", {}, 0.0))


class ReportFileTests(SimpleTestCase):
    def test_chart_data(self):
        dataset = make_dataset(
            [mc_question("q1", topic="Trees"), mc_question("q2", topic="Trees"), mc_question("q3", topic="Heaps"),
             mc_question("q4", topic="Heaps")],
            [], [entry("s1", "quiz1", "Trees", 1.0)],
        )
        labels = LabelSet("instructor", {"q1": "Easy", "q2": "Hard", "q3": "Hard"}, 0.75)
        self.assertEqual(
            emit_chart_data(dataset, labels),
            "topic,easy,medium,hard,total\nHeaps,0,0,1,1\nTrees,1,0,1,2\n",
        )

    def test_table(self):
        report = metrics(matrix([[5, 1, 0], [1, 3, 1], [0, 1, 2]]))
        self.assertEqual(render_table([("rules", report)]), "Source,Prec.,Rec.,F1,Acc.\nrules,0.70,0.70,0.70,0.71\n")
