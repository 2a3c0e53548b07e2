from fractions import Fraction
import unittest

import numpy as np
from sklearn.datasets import make_moons

from classifiers import (ClassifierError, ClassifierKind, ClassifierParams, GbtParams, ScoreRange, SgdParams,
                         SvmParams, TrainedClassifier, TreeParams, predict, predict_labels, predict_scores,
                         train_classifier)
from classifiers.tree import best_split, logistic_loss
from datasets import LabeledDataset
from datasets.toy import make_xor


def one_dimensional(negative, positive):
    features = np.concatenate([negative, positive])[:, None]
    labels = np.r_[np.zeros(len(negative), dtype=int), np.ones(len(positive), dtype=int)]
    return LabeledDataset(features, labels, ['x'])


def moons(seed, n=400):
    features, labels = make_moons(n_samples=n, noise=0.1, random_state=seed)
    return LabeledDataset(features, labels, ['x', 'y'])


def accuracy(model, dataset):
    return np.mean(predict(model, dataset.features) == dataset.labels)


def gini_decrease(x, y, threshold):
    def weighted_gini(labels):
        if len(labels) == 0:
            return 0.0
        p = np.mean(labels)
        return len(labels) * 2 * p * (1 - p)

    return weighted_gini(y) - weighted_gini(y[x <= threshold]) - weighted_gini(y[x > threshold])


def exhaustive_split(X, y):
    """First (feature, threshold) in scan order with the largest exact decrease in summed squared error."""
    def squared_error(targets):
        total = sum(Fraction(int(t)) for t in targets)
        return total - total * total / len(targets) if len(targets) else Fraction(0)

    best = None
    for feature in range(X.shape[1]):
        values = np.unique(X[:, feature])
        for threshold in (values[:-1] + values[1:]) / 2:
            left = X[:, feature] <= threshold
            gain = squared_error(y) - squared_error(y[left]) - squared_error(y[~left])
            if best is None or gain > best[0]:
                best = (gain, feature, threshold)
    return best


class ParamsTests(unittest.TestCase):
    def test_defaults_valid(self):
        ClassifierParams().validate()

    def test_invalid(self):
        for params in (ClassifierParams(svm=SvmParams(lam=0)), ClassifierParams(tree=TreeParams(max_depth=0)),
                       ClassifierParams(gbt=GbtParams(rounds=-1)), ClassifierParams(sgd=SgdParams(epochs=0))):
            with self.assertRaises(ClassifierError):
                params.validate()

    def test_kind_names(self):
        self.assertEqual(ClassifierKind.GBT, ClassifierKind('gbt'))
        self.assertEqual('LinearSvm', ClassifierKind.SVM.display_name)


class LinearSvmTests(unittest.TestCase):
    def setUp(self):
        self.dataset = one_dimensional(np.linspace(-1, -0.2, 100), np.linspace(0.2, 1, 100))

    def test_separable(self):
        model = train_classifier('svm', self.dataset, ClassifierParams(svm=SvmParams(lam=0.01)), seed=0)
        self.assertEqual(ScoreRange.MARGIN, model.score_range)
        self.assertGreaterEqual(accuracy(model, self.dataset), 0.98)
        self.assertGreater(model.parameters['weights'][0], 0)

    def test_deterministic_in_seed(self):
        params = ClassifierParams(svm=SvmParams(lam=0.01, epochs=5))
        first = train_classifier('svm', self.dataset, params, seed=3)
        second = train_classifier('svm', self.dataset, params, seed=3)
        np.testing.assert_array_equal(first.parameters['weights'], second.parameters['weights'])
        self.assertEqual(first.parameters['bias'], second.parameters['bias'])

    def test_duplicated_rows(self):
        rng = np.random.default_rng(4)
        features = np.concatenate([rng.normal(-2, 0.3, size=(50, 2)), rng.normal(2, 0.3, size=(50, 2))])
        dataset = LabeledDataset(features, np.r_[np.zeros(50, dtype=int), np.ones(50, dtype=int)], ['x', 'y'])
        doubled = dataset.subset(np.r_[np.arange(100), np.arange(100)])
        params = ClassifierParams(svm=SvmParams(lam=0.01, epochs=10))
        once = accuracy(train_classifier('svm', dataset, params, seed=0), dataset)
        twice = accuracy(train_classifier('svm', doubled, params, seed=0), dataset)
        self.assertLessEqual(abs(once - twice), 0.01)

    def test_single_class(self):
        dataset = LabeledDataset(np.zeros((3, 1)), [1, 1, 1], ['x'])
        with self.assertRaises(ClassifierError):
            train_classifier('svm', dataset, ClassifierParams(), seed=0)

    def test_zero_margin_is_malware(self):
        model = TrainedClassifier(ClassifierKind.SVM, {'weights': np.zeros(2), 'bias': 0.0}, ScoreRange.MARGIN, 2)
        np.testing.assert_array_equal([1], predict(model, np.array([[0.3, 0.7]])))


class DecisionTreeTests(unittest.TestCase):
    def test_xor(self):
        dataset = make_xor()
        model = train_classifier('tree', dataset, ClassifierParams(tree=TreeParams(max_depth=2, min_leaf=1)), seed=0)
        self.assertEqual(1.0, accuracy(model, dataset))
        self.assertEqual(2, model.parameters['tree'].depth())
        self.assertEqual(4, model.parameters['tree'].num_leaves)

    def test_pure_input_is_single_leaf(self):
        dataset = LabeledDataset(np.random.default_rng(0).random((10, 3)), np.ones(10, dtype=int), ['a', 'b', 'c'])
        model = train_classifier('tree', dataset, ClassifierParams(), seed=0)
        self.assertEqual(1, model.parameters['tree'].num_nodes)
        np.testing.assert_array_equal(np.ones(10), predict_scores(model, dataset.features))

    def test_depth_limit(self):
        model = train_classifier('tree', moons(0), ClassifierParams(tree=TreeParams(max_depth=3)), seed=0)
        self.assertLessEqual(model.parameters['tree'].depth(), 3)

    def test_split_maximizes_gini_decrease(self):
        rng = np.random.default_rng(2)
        X = rng.random((20, 3))
        y = (X[:, 1] + 0.3 * rng.random(20) > 0.6).astype(float)
        gain, feature, threshold = best_split(X, y, min_leaf=1)
        candidates = []
        for column in range(3):
            values = np.unique(X[:, column])
            for threshold_candidate in (values[:-1] + values[1:]) / 2:
                candidates.append(gini_decrease(X[:, column], y, threshold_candidate))
        self.assertAlmostEqual(max(candidates), 2 * gain, places=9)
        self.assertAlmostEqual(max(candidates), gini_decrease(X[:, feature], y, threshold), places=9)

    def test_split_ties_on_indicator_features(self):
        rng = np.random.default_rng(8)
        for case in range(200):
            X = rng.integers(0, 3, size=(20, 3)).astype(float)
            y = rng.integers(0, 2, size=20).astype(float)
            expected = exhaustive_split(X, y)
            split = best_split(X, y, min_leaf=1)
            if expected is None:
                self.assertIsNone(split, "case %d" % case)
                continue
            gain, feature, threshold = split
            self.assertEqual((expected[1], expected[2]), (feature, threshold), "case %d" % case)
            self.assertAlmostEqual(float(expected[0]), gain, places=12, msg="case %d" % case)

    def test_row_order_invariance(self):
        dataset = moons(1, n=200)
        order = np.random.default_rng(0).permutation(dataset.num_rows)
        params = ClassifierParams(tree=TreeParams(max_depth=6))
        model = train_classifier('tree', dataset, params, seed=0)
        shuffled = train_classifier('tree', dataset.subset(order), params, seed=0)
        np.testing.assert_array_equal(predict_scores(model, dataset.features),
                                      predict_scores(shuffled, dataset.features))


class GradientBoostingTests(unittest.TestCase):
    def test_zero_rounds_predicts_prior(self):
        labels = np.r_[np.ones(3, dtype=int), np.zeros(7, dtype=int)]
        dataset = LabeledDataset(np.arange(10, dtype=float)[:, None], labels, ['x'])
        model = train_classifier('gbt', dataset, ClassifierParams(gbt=GbtParams(rounds=0)), seed=0)
        np.testing.assert_allclose(np.full(10, 0.3), predict_scores(model, dataset.features))
        self.assertAlmostEqual(logistic_loss(np.full(10, np.log(0.3 / 0.7)), labels), model.parameters['losses'][0])

    def test_training_loss_does_not_increase(self):
        model = train_classifier('gbt', moons(0), ClassifierParams(gbt=GbtParams(rounds=30, max_depth=3)), seed=0)
        losses = np.array(model.parameters['losses'])
        self.assertEqual(31, len(losses))
        self.assertTrue(np.all(np.diff(losses) <= 1e-12))

    def test_moons(self):
        model = train_classifier('gbt', moons(0), ClassifierParams(), seed=0)
        self.assertGreaterEqual(accuracy(model, moons(1)), 0.95)
        scores = predict_scores(model, moons(1).features)
        self.assertTrue(np.all((scores > 0) & (scores < 1)))

    def test_serialization(self):
        model = train_classifier('gbt', moons(0, n=100), ClassifierParams(gbt=GbtParams(rounds=5)), seed=0)
        restored = TrainedClassifier.from_dict(model.to_dict())
        features = moons(1, n=50).features
        np.testing.assert_allclose(predict_scores(model, features), predict_scores(restored, features))


class SgdLinearTests(unittest.TestCase):
    def test_threshold_feature(self):
        dataset = one_dimensional(np.linspace(0, 0.45, 50), np.linspace(0.55, 1, 50))
        model = train_classifier('sgd', dataset, ClassifierParams(sgd=SgdParams(epochs=50, learning_rate=0.05)),
                                 seed=0)
        self.assertGreater(model.parameters['weights'][0], 0)
        self.assertGreaterEqual(accuracy(model, dataset), 0.9)
        scores = predict_scores(model, np.array([[-10.0], [10.0]]))
        np.testing.assert_array_equal([0, 1], scores)

    def test_constant_features_learn_prior(self):
        labels = np.r_[np.ones(30, dtype=int), np.zeros(70, dtype=int)]
        dataset = LabeledDataset(np.zeros((100, 2)), labels, ['a', 'b'])
        model = train_classifier('sgd', dataset, ClassifierParams(sgd=SgdParams(epochs=50)), seed=0)
        np.testing.assert_array_equal([0, 0], model.parameters['weights'])
        self.assertAlmostEqual(0.3, model.parameters['bias'], delta=0.05)

    def test_divergence(self):
        dataset = one_dimensional(np.full(10, 50.0), np.full(10, 100.0))
        with self.assertRaises(ClassifierError):
            with np.errstate(all='ignore'):
                train_classifier('sgd', dataset, ClassifierParams(sgd=SgdParams(epochs=5, learning_rate=1.0)),
                                 seed=0)


class PredictTests(unittest.TestCase):
    def test_dimension_mismatch(self):
        model = TrainedClassifier(ClassifierKind.SGD, {'weights': np.zeros(2), 'bias': 0.0}, ScoreRange.PROBABILITY, 2)
        with self.assertRaises(ClassifierError):
            predict_scores(model, np.zeros((3, 4)))

    def test_labels_at_threshold(self):
        np.testing.assert_array_equal([0, 1, 1], predict_labels([0.49, 0.5, 0.9]))
        np.testing.assert_array_equal([0, 1], predict_labels([-0.1, 0.0], threshold=0.0))


if __name__ == '__main__':
    unittest.main()
