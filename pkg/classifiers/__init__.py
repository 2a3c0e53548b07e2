"""
Four supervised learners behind one train/score interface:
linear SVM, CART decision tree, gradient-boosted trees and a squared-loss SGD linear model.
"""
import enum
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

import seeding
from classifiers.linear import fit_least_squares_sgd, fit_pegasos, linear_scores
from classifiers.tree import RegressionTree, boosting_raw_scores, fit_gradient_boosting, grow_tree

logger = logging.getLogger(__name__)


class ClassifierError(ValueError):
    pass


class ClassifierKind(enum.Enum):
    SVM = 'svm'
    TREE = 'tree'
    GBT = 'gbt'
    SGD = 'sgd'

    @property
    def display_name(self):
        return {'svm': 'LinearSvm', 'tree': 'DecisionTree', 'gbt': 'GradientBoostedTrees', 'sgd': 'SgdLinear'}[
            self.value]


class ScoreRange(enum.Enum):
    MARGIN = 'Margin'
    PROBABILITY = 'Probability'


@dataclass
class SvmParams:
    lam: float = 1e-4
    epochs: int = 20


@dataclass
class TreeParams:
    max_depth: int = 16
    min_leaf: int = 2


@dataclass
class GbtParams:
    rounds: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1


@dataclass
class SgdParams:
    epochs: int = 20
    learning_rate: float = 0.01


@dataclass
class ClassifierParams:
    svm: SvmParams = field(default_factory=SvmParams)
    tree: TreeParams = field(default_factory=TreeParams)
    gbt: GbtParams = field(default_factory=GbtParams)
    sgd: SgdParams = field(default_factory=SgdParams)

    def validate(self):
        problems = []
        counts = {'svm.epochs': self.svm.epochs, 'tree.max_depth': self.tree.max_depth,
                  'tree.min_leaf': self.tree.min_leaf, 'gbt.max_depth': self.gbt.max_depth,
                  'sgd.epochs': self.sgd.epochs}
        problems += ["%s must be at least 1, got %s" % (name, value) for name, value in counts.items() if value < 1]
        if self.gbt.rounds < 0:
            problems.append("gbt.rounds must not be negative, got %s" % self.gbt.rounds)
        rates = {'svm.lam': self.svm.lam, 'gbt.learning_rate': self.gbt.learning_rate,
                 'sgd.learning_rate': self.sgd.learning_rate}
        problems += ["%s must be positive, got %s" % (name, value) for name, value in rates.items() if value <= 0]
        if problems:
            raise ClassifierError("invalid classifier params: " + "; ".join(problems))
        return self

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    kind: ClassifierKind
    parameters: dict
    score_range: ScoreRange
    num_features: int

    @property
    def threshold(self):
        return 0.0 if self.score_range == ScoreRange.MARGIN else 0.5

    def to_dict(self):
        if self.kind in (ClassifierKind.SVM, ClassifierKind.SGD):
            parameters = {'weights': self.parameters['weights'].tolist(), 'bias': self.parameters['bias']}
        elif self.kind == ClassifierKind.TREE:
            parameters = {'tree': self.parameters['tree'].to_dict()}
        else:
            parameters = {'base_score': self.parameters['base_score'],
                          'learning_rate': self.parameters['learning_rate'],
                          'trees': [tree.to_dict() for tree in self.parameters['trees']],
                          'losses': list(self.parameters['losses'])}
        return {'kind': self.kind.value, 'score_range': self.score_range.value,
                'num_features': self.num_features, 'parameters': parameters}

    @staticmethod
    def from_dict(d):
        kind = ClassifierKind(d['kind'])
        parameters = dict(d['parameters'])
        if kind in (ClassifierKind.SVM, ClassifierKind.SGD):
            parameters['weights'] = np.asarray(parameters['weights'], dtype=np.float64)
        elif kind == ClassifierKind.TREE:
            parameters['tree'] = RegressionTree.from_dict(parameters['tree'])
        else:
            parameters['trees'] = [RegressionTree.from_dict(tree) for tree in parameters['trees']]
        return TrainedClassifier(kind, parameters, ScoreRange(d['score_range']), int(d['num_features']))


def _require_rows(dataset):
    if dataset.num_rows == 0:
        raise ClassifierError("cannot train on an empty dataset")


def _require_both_classes(dataset, name):
    _require_rows(dataset)
    counts = dataset.class_counts()
    if min(counts.values()) == 0:
        raise ClassifierError("%s needs both classes, got %s" % (name, counts))


def train_linear_svm(dataset, params, seed):
    _require_both_classes(dataset, 'linear SVM')
    params.validate()
    weights, bias = fit_pegasos(dataset.features, dataset.labels, params.svm.lam, params.svm.epochs,
                                seeding.as_generator(seed))
    return TrainedClassifier(ClassifierKind.SVM, {'weights': weights, 'bias': bias}, ScoreRange.MARGIN,
                             dataset.num_features)


def train_decision_tree(dataset, params, seed=None):
    """CART is deterministic; `seed` is accepted for the common trainer signature."""
    _require_rows(dataset)
    params.validate()
    tree = grow_tree(dataset.features, dataset.labels.astype(np.float64), params.tree.max_depth, params.tree.min_leaf)
    return TrainedClassifier(ClassifierKind.TREE, {'tree': tree}, ScoreRange.PROBABILITY, dataset.num_features)


def train_gbt(dataset, params, seed=None):
    _require_both_classes(dataset, 'gradient boosting')
    params.validate()
    base_score, trees, losses = fit_gradient_boosting(dataset.features, dataset.labels.astype(np.float64),
                                                      params.gbt.rounds, params.gbt.max_depth,
                                                      params.gbt.learning_rate)
    return TrainedClassifier(ClassifierKind.GBT,
                             {'base_score': base_score, 'learning_rate': params.gbt.learning_rate,
                              'trees': trees, 'losses': losses},
                             ScoreRange.PROBABILITY, dataset.num_features)


def train_sgd_linear(dataset, params, seed):
    _require_both_classes(dataset, 'SGD linear model')
    params.validate()
    try:
        weights, bias = fit_least_squares_sgd(dataset.features, dataset.labels, params.sgd.epochs,
                                              params.sgd.learning_rate, seeding.as_generator(seed))
    except FloatingPointError as e:
        raise ClassifierError(str(e))
    return TrainedClassifier(ClassifierKind.SGD, {'weights': weights, 'bias': bias}, ScoreRange.PROBABILITY,
                             dataset.num_features)


TRAINERS = {ClassifierKind.SVM: train_linear_svm, ClassifierKind.TREE: train_decision_tree,
            ClassifierKind.GBT: train_gbt, ClassifierKind.SGD: train_sgd_linear}


def train_classifier(kind, dataset, params, seed):
    kind = ClassifierKind(kind)
    logger.debug("Training %s on %d rows", kind.display_name, dataset.num_rows)
    return TRAINERS[kind](dataset, params, seed)


def predict_scores(model, features):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.num_features:
        raise ClassifierError("%s was trained on %d features, got input of shape %s" % (
            model.kind.display_name, model.num_features, features.shape))
    parameters = model.parameters
    if model.kind == ClassifierKind.SVM:
        return linear_scores(parameters['weights'], parameters['bias'], features)
    if model.kind == ClassifierKind.SGD:
        return np.clip(linear_scores(parameters['weights'], parameters['bias'], features), 0, 1)
    if model.kind == ClassifierKind.TREE:
        return parameters['tree'].predict(features)
    return expit(boosting_raw_scores(parameters['base_score'], parameters['trees'], parameters['learning_rate'],
                                     features))


def predict_labels(scores, threshold=0.5):
    """Scores at or above the threshold are malware (1)."""
    return (np.asarray(scores) >= threshold).astype(np.int64)


def predict(model, features):
    return predict_labels(predict_scores(model, features), model.threshold)
