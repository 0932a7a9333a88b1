import pickle
import unittest

import numpy as np

from promptforge.metrics import (
    UNDEFINED,
    ConfusionCounts,
    confusion,
    format_metric,
    is_defined,
    masking_flag,
    metrics_from_counts,
    metrics_from_dict,
    metrics_to_dict,
    selection_f1,
)


class TestUndefined(unittest.TestCase):
    def test_singleton(self):
        self.assertIs(pickle.loads(pickle.dumps(UNDEFINED)), UNDEFINED)
        self.assertFalse(UNDEFINED)
        self.assertEqual(repr(UNDEFINED), "UNDEFINED")

    def test_format(self):
        self.assertEqual(format_metric(UNDEFINED), "UNDEFINED")
        self.assertEqual(format_metric(0.058252), "0.0583")
        self.assertEqual(format_metric(1.0, 2), "1.00")


class TestConfusion(unittest.TestCase):
    def test_counts(self):
        counts = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        self.assertEqual(counts, ConfusionCounts(tp=2, fp=1, tn=1, fn=1))
        self.assertEqual(counts.total, 5)
        self.assertEqual(counts.positives, 3)

    def test_single_class_present(self):
        self.assertEqual(confusion([0, 0, 0], [0, 0, 0]), ConfusionCounts(tp=0, fp=0, tn=3, fn=0))
        self.assertEqual(confusion([0, 0], [1, 1]), ConfusionCounts(tp=0, fp=0, tn=0, fn=2))

    def test_counts_are_plain_ints(self):
        counts = confusion(np.array([1, 0, 1]), np.array([1, 1, 0]))
        self.assertEqual(counts, ConfusionCounts(tp=1, fp=1, tn=0, fn=1))
        self.assertIs(type(counts.tp), int)

    def test_length_mismatch(self):
        with self.assertRaises(ValueError):
            confusion([1, 0], [1])

    def test_empty(self):
        with self.assertRaises(ValueError):
            confusion([], [])

    def test_non_binary(self):
        with self.assertRaises(ValueError):
            confusion([2], [1])
        with self.assertRaises(ValueError):
            confusion([1, 0], [1, "0"])

    def test_negative_count(self):
        with self.assertRaises(ValueError):
            ConfusionCounts(tp=-1, fp=0, tn=0, fn=0)


class TestMetricsFromCounts(unittest.TestCase):
    def test_oracle_random_vectors(self):
        rng = np.random.default_rng(2024)
        for trial in range(20):
            labels = (rng.random(1000) < rng.uniform(0.02, 0.5)).astype(int)
            predictions = (rng.random(1000) < rng.uniform(0.0, 1.0)).astype(int)
            m = metrics_from_counts(confusion(predictions.tolist(), labels.tolist()))
            tp = int(np.sum((predictions == 1) & (labels == 1)))
            fp = int(np.sum((predictions == 1) & (labels == 0)))
            tn = int(np.sum((predictions == 0) & (labels == 0)))
            fn = int(np.sum((predictions == 0) & (labels == 1)))
            with self.subTest(trial=trial):
                self.assertEqual((m.counts.tp, m.counts.fp, m.counts.tn, m.counts.fn), (tp, fp, tn, fn))
                self.assertAlmostEqual(m.sensitivity, tp / (tp + fn))
                self.assertAlmostEqual(m.specificity, tn / (tn + fp))
                self.assertAlmostEqual(m.accuracy, (tp + tn) / 1000)
                if tp + fp:
                    precision = tp / (tp + fp)
                    self.assertAlmostEqual(m.precision, precision)
                    if precision + m.sensitivity:
                        self.assertAlmostEqual(
                            m.f1,
                            2 * precision * m.sensitivity / (precision + m.sensitivity),
                        )

    def test_all_positive_at_low_prevalence(self):
        # 3% prevalence, everything flagged positive
        m = metrics_from_counts(ConfusionCounts(tp=6, fp=194, tn=0, fn=0))
        self.assertEqual(m.sensitivity, 1.0)
        self.assertEqual(m.specificity, 0.0)
        self.assertAlmostEqual(m.f1, 2 * 0.03 / 1.03)
        self.assertEqual(format_metric(m.f1, 3), "0.058")

    def test_no_predicted_positives(self):
        m = metrics_from_counts(ConfusionCounts(tp=0, fp=0, tn=97, fn=3))
        self.assertIs(m.precision, UNDEFINED)
        self.assertEqual(m.f1, 0.0)
        self.assertEqual(m.sensitivity, 0.0)
        self.assertEqual(m.accuracy, 0.97)

    def test_no_positives_at_all(self):
        m = metrics_from_counts(ConfusionCounts(tp=0, fp=0, tn=10, fn=0))
        self.assertIs(m.sensitivity, UNDEFINED)
        self.assertIs(m.f1, UNDEFINED)
        self.assertFalse(is_defined(m.precision))
        self.assertEqual(selection_f1(m), 0.0)
        self.assertEqual(m.specificity, 1.0)

    def test_empty_counts(self):
        with self.assertRaises(ValueError):
            metrics_from_counts(ConfusionCounts(tp=0, fp=0, tn=0, fn=0))

    def test_serialization(self):
        m = metrics_from_counts(ConfusionCounts(tp=0, fp=0, tn=97, fn=3))
        obj = metrics_to_dict(m)
        self.assertIsNone(obj["precision"])
        self.assertEqual(obj["tn"], 97)
        self.assertEqual(metrics_from_dict(obj), m)


class TestMaskingFlag(unittest.TestCase):
    def test_accuracy_masks_collapse(self):
        m = metrics_from_counts(ConfusionCounts(tp=0, fp=0, tn=97, fn=3))
        self.assertTrue(masking_flag(m, prevalence=0.03))

    def test_within_tolerance(self):
        # accuracy 0.95 is exactly 1 - 0.03 - 0.02
        m = metrics_from_counts(ConfusionCounts(tp=0, fp=2, tn=95, fn=3))
        self.assertTrue(masking_flag(m, prevalence=0.03))

    def test_outside_tolerance(self):
        m = metrics_from_counts(ConfusionCounts(tp=0, fp=10, tn=87, fn=3))
        self.assertFalse(masking_flag(m, prevalence=0.03))

    def test_detection_not_masked(self):
        m = metrics_from_counts(ConfusionCounts(tp=1, fp=0, tn=97, fn=2))
        self.assertFalse(masking_flag(m, prevalence=0.03))
