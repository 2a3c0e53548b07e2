import os
import tempfile
import unittest

import numpy as np
from sklearn.metrics import roc_auc_score

from analyze import (ConfusionMatrix, MetricError, confusion, cosine_similarity, fidelity_report,
                     mean_squared_error, roc_auc, squared_euclidean_of_means, utility, utility_from_confusion)
from datasets import LabeledDataset, Origin

# tp, fp, tn, fn -> accuracy, precision, recall, f1, degenerate
CONFUSION_TABLE = [
    ((5, 0, 5, 0), (1.0, 1.0, 1.0, 1.0, ())),
    ((3, 1, 0, 0), (0.75, 0.75, 1.0, 6 / 7, ())),
    ((0, 0, 4, 4), (0.5, 0.0, 0.0, 0.0, ('precision', 'f1'))),
    ((2, 2, 2, 2), (0.5, 0.5, 0.5, 0.5, ())),
    ((1, 0, 0, 3), (0.25, 1.0, 0.25, 0.4, ())),
    ((0, 3, 1, 0), (0.25, 0.0, 0.0, 0.0, ('recall', 'f1'))),
    ((4, 1, 3, 2), (0.7, 0.8, 2 / 3, 8 / 11, ())),
    ((10, 0, 0, 0), (1.0, 1.0, 1.0, 1.0, ())),
    ((0, 0, 10, 0), (1.0, 0.0, 0.0, 0.0, ('precision', 'recall', 'f1'))),
    ((6, 2, 8, 4), (0.7, 0.75, 0.6, 2 / 3, ())),
    ((1, 9, 0, 0), (0.1, 0.1, 1.0, 2 / 11, ())),
    ((9, 1, 9, 1), (0.9, 0.9, 0.9, 0.9, ())),
]


def trapezoid_area(curve):
    return float(np.sum(np.diff(curve.fpr) * (curve.tpr[1:] + curve.tpr[:-1]) / 2))


class ConfusionTests(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(ConfusionMatrix(tp=2, fp=0, tn=2, fn=0), confusion([1, 1, 0, 0], [1, 1, 0, 0]))
        self.assertEqual(ConfusionMatrix(tp=1, fp=1, tn=0, fn=0), confusion([1, 0], [1, 1]))

    def test_tally(self):
        rng = np.random.default_rng(0)
        truth, predicted = rng.integers(0, 2, 100), rng.integers(0, 2, 100)
        cm = confusion(truth, predicted)
        tally = {'tp': 0, 'fp': 0, 'tn': 0, 'fn': 0}
        for t, p in zip(truth, predicted):
            tally[('t' if t == p else 'f') + ('p' if p == 1 else 'n')] += 1
        self.assertEqual(tally, cm.to_dict())
        self.assertEqual(100, cm.total)

    def test_length_mismatch(self):
        with self.assertRaises(MetricError):
            confusion([1, 0], [1])

    def test_non_binary(self):
        with self.assertRaises(MetricError):
            confusion([1, 2], [1, 0])


class UtilityFromConfusionTests(unittest.TestCase):
    def test_table(self):
        for counts, expected in CONFUSION_TABLE:
            tp, fp, tn, fn = counts
            accuracy, precision, recall, f1, degenerate = utility_from_confusion(ConfusionMatrix(tp, fp, tn, fn))
            message = str(counts)
            self.assertAlmostEqual(expected[0], accuracy, places=12, msg=message)
            self.assertAlmostEqual(expected[1], precision, places=12, msg=message)
            self.assertAlmostEqual(expected[2], recall, places=12, msg=message)
            self.assertAlmostEqual(expected[3], f1, places=12, msg=message)
            self.assertEqual(expected[4], degenerate, msg=message)

    def test_recall_ignores_false_positives(self):
        _, _, recall, _, _ = utility_from_confusion(ConfusionMatrix(3, 0, 5, 1))
        _, _, recall_with_fp, _, _ = utility_from_confusion(ConfusionMatrix(3, 7, 5, 1))
        self.assertEqual(recall, recall_with_fp)

    def test_empty(self):
        with self.assertRaises(MetricError):
            utility_from_confusion(ConfusionMatrix(0, 0, 0, 0))


class RocAucTests(unittest.TestCase):
    def test_separated_and_tied(self):
        self.assertEqual(1.0, roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])[0])
        self.assertEqual(0.5, roc_auc([0, 1, 0, 1], [0.3, 0.3, 0.3, 0.3])[0])

    def test_single_class(self):
        with self.assertRaises(MetricError):
            roc_auc([1, 1], [0.2, 0.4])

    def test_matches_reference_and_curve_area(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            truth = np.r_[0, 1, rng.integers(0, 2, 40)]
            scores = np.round(rng.random(42), 1)
            auc, curve = roc_auc(truth, scores)
            self.assertAlmostEqual(roc_auc_score(truth, scores), auc, places=12)
            self.assertAlmostEqual(auc, trapezoid_area(curve), places=12)

    def test_negated_scores_and_monotone_transform(self):
        rng = np.random.default_rng(2)
        truth, scores = np.r_[0, 1, rng.integers(0, 2, 30)], rng.random(32)
        auc, _ = roc_auc(truth, scores)
        self.assertAlmostEqual(1.0, auc + roc_auc(truth, -scores)[0], places=12)
        self.assertAlmostEqual(auc, roc_auc(truth, np.exp(3 * scores))[0], places=12)

    def test_curve_points(self):
        _, curve = roc_auc([1, 0, 1, 0], [0.9, 0.7, 0.7, 0.1])
        np.testing.assert_array_equal([np.inf, 0.9, 0.7, 0.1], curve.thresholds)
        np.testing.assert_allclose([0, 0, 0.5, 1], curve.fpr)
        np.testing.assert_allclose([0, 0.5, 1, 1], curve.tpr)
        with tempfile.TemporaryDirectory() as directory:
            filepath = os.path.join(directory, 'roc.csv')
            curve.to_csv(filepath)
            with open(filepath) as f:
                self.assertEqual('fpr,tpr,threshold', f.readline().strip())

    def test_utility_thresholds_ties_as_positive(self):
        cm, metrics, _ = utility([1, 0, 0], [0.5, 0.5, 0.2], threshold=0.5)
        self.assertEqual(ConfusionMatrix(tp=1, fp=1, tn=1, fn=0), cm)
        self.assertAlmostEqual(2 / 3, metrics['accuracy'])
        self.assertAlmostEqual(0.75, metrics.auc)


class FidelityTests(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(3)
        self.real = LabeledDataset(rng.random((20, 4)), np.r_[np.zeros(10, dtype=int), np.ones(10, dtype=int)],
                                   ['a', 'b', 'c', 'd'])

    def test_vector_metrics(self):
        self.assertAlmostEqual(1.0, cosine_similarity([1, 2, 3], [1, 2, 3]))
        self.assertEqual(0.0, cosine_similarity([1, 0], [0, 1]))
        self.assertEqual(1.0, mean_squared_error([0, 1], [1, 0]))
        self.assertEqual(0.0, mean_squared_error([0.5, 1], [0.5, 1]))
        with self.assertRaises(MetricError):
            cosine_similarity([0, 0], [1, 0])
        with self.assertRaises(MetricError):
            mean_squared_error([0, 1], [0, 1, 2])

    def test_squared_euclidean_of_means(self):
        block = np.full((5, 4), 0.5)
        self.assertAlmostEqual(0.04, squared_euclidean_of_means(block, block + 0.1))
        self.assertEqual(0.0, squared_euclidean_of_means(block, block))
        with self.assertRaises(MetricError):
            squared_euclidean_of_means(np.zeros((0, 4)), block)

    def test_identical(self):
        report = fidelity_report(self.real, self.real.replace_features(self.real.features))
        self.assertEqual([0, 1], [metrics.label for metrics in report])
        for metrics in report:
            self.assertAlmostEqual(1.0, metrics.cosine)
            self.assertEqual(0.0, metrics.mse)
            self.assertEqual(0.0, metrics.euclidean_sq)

    def test_one_shifted_feature(self):
        features = np.array(self.real.features)
        features[self.real.labels == 1, 2] += 0.2
        synthetic = LabeledDataset(features, self.real.labels, self.real.feature_names, Origin.SYNTHETIC)
        negative, positive = fidelity_report(self.real, synthetic)
        self.assertEqual(0.0, negative.euclidean_sq)
        self.assertAlmostEqual(0.04, positive.euclidean_sq)
        self.assertAlmostEqual(0.01, positive.mse)

    def test_symmetric(self):
        synthetic = self.real.replace_features(np.random.default_rng(4).random((20, 4)))
        for forward, backward in zip(fidelity_report(self.real, synthetic), fidelity_report(synthetic, self.real)):
            self.assertAlmostEqual(forward.cosine, backward.cosine, places=12)
            self.assertAlmostEqual(forward.euclidean_sq, backward.euclidean_sq, places=12)
            self.assertAlmostEqual(forward.mse, backward.mse, places=12)

    def test_missing_class(self):
        synthetic = LabeledDataset(np.zeros((3, 4)), [1, 1, 1], self.real.feature_names, Origin.SYNTHETIC)
        with self.assertRaises(MetricError):
            fidelity_report(self.real, synthetic)


if __name__ == '__main__':
    unittest.main()
