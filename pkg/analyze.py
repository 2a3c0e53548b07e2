"""
Utility metrics of binary predictions and fidelity metrics between real and synthetic datasets.
Class 1 (malware) is the positive class.
"""
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.stats import rankdata

METRICS = ('accuracy', 'precision', 'recall', 'f1', 'auc')


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self):
        return {'tp': self.tp, 'fp': self.fp, 'tn': self.tn, 'fn': self.fn}


@dataclass(frozen=True)
class UtilityMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    degenerate: tuple = field(default_factory=tuple)

    def __getitem__(self, metric):
        return getattr(self, metric)

    def to_dict(self):
        d = {metric: self[metric] for metric in METRICS}
        d['degenerate'] = list(self.degenerate)
        return d


@dataclass(frozen=True)
class FidelityMetrics:
    cosine: float
    euclidean_sq: float
    mse: float
    label: int

    def to_dict(self):
        return {'class': self.label, 'cosine': self.cosine, 'euclidean_sq': self.euclidean_sq, 'mse': self.mse}


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    def to_frame(self):
        return pd.DataFrame({'fpr': self.fpr, 'tpr': self.tpr, 'threshold': self.thresholds})

    def to_csv(self, filepath):
        os.makedirs(os.path.dirname(filepath) or '.', exist_ok=True)
        self.to_frame().to_csv(filepath, index=False)


def _binary(values, name):
    values = np.asarray(values)
    if values.ndim != 1:
        raise MetricError("%s must be a vector" % name)
    if not np.all((values == 0) | (values == 1)):
        raise MetricError("%s must only contain 0 and 1" % name)
    return values.astype(np.int64)


def confusion(truth, predicted):
    truth, predicted = _binary(truth, 'truth'), _binary(predicted, 'predicted')
    if len(truth) != len(predicted):
        raise MetricError("%d truths for %d predictions" % (len(truth), len(predicted)))
    return ConfusionMatrix(tp=int(np.sum((truth == 1) & (predicted == 1))),
                           fp=int(np.sum((truth == 0) & (predicted == 1))),
                           tn=int(np.sum((truth == 0) & (predicted == 0))),
                           fn=int(np.sum((truth == 1) & (predicted == 0))))


def utility_from_confusion(cm):
    """
    :return: accuracy, precision, recall, f1 and the names of the metrics whose
        denominator was zero (reported as 0)
    """
    if cm.total <= 0:
        raise MetricError("empty confusion matrix")
    degenerate = []

    def ratio(name, numerator, denominator):
        if denominator == 0:
            degenerate.append(name)
            return 0.0
        return numerator / denominator

    accuracy = (cm.tp + cm.tn) / cm.total
    precision = ratio('precision', cm.tp, cm.tp + cm.fp)
    recall = ratio('recall', cm.tp, cm.tp + cm.fn)
    f1 = ratio('f1', 2 * precision * recall, precision + recall)
    return accuracy, precision, recall, f1, tuple(degenerate)


def roc_auc(truth, scores):
    """
    Rank-based AUC, (R_pos - n1(n1+1)/2) / (n1 n2) with average ranks, so tied scores get half credit.
    The curve has one point per distinct score (predicting positive at score >= threshold), preceded by (0, 0).
    """
    truth = _binary(truth, 'truth')
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != truth.shape:
        raise MetricError("%d truths for %d scores" % (len(truth), len(scores)))
    positives, negatives = int(np.sum(truth == 1)), int(np.sum(truth == 0))
    if positives == 0 or negatives == 0:
        raise MetricError("AUC needs both classes, got %d positives and %d negatives" % (positives, negatives))
    ranks = rankdata(scores)
    auc = (ranks[truth == 1].sum() - positives * (positives + 1) / 2) / (positives * negatives)

    order = np.argsort(-scores, kind='stable')
    sorted_scores, sorted_truth = scores[order], truth[order]
    last_of_block = np.r_[np.flatnonzero(np.diff(sorted_scores) != 0), len(sorted_scores) - 1]
    true_positives = np.cumsum(sorted_truth)[last_of_block]
    false_positives = (last_of_block + 1) - true_positives
    curve = RocCurve(fpr=np.r_[0.0, false_positives / negatives], tpr=np.r_[0.0, true_positives / positives],
                     thresholds=np.r_[np.inf, sorted_scores[last_of_block]])
    return float(auc), curve


def utility(truth, scores, threshold):
    """All utility metrics of scores thresholded at `threshold` (ties count as positive)."""
    predicted = (np.asarray(scores) >= threshold).astype(np.int64)
    cm = confusion(truth, predicted)
    accuracy, precision, recall, f1, degenerate = utility_from_confusion(cm)
    auc, curve = roc_auc(truth, scores)
    return cm, UtilityMetrics(accuracy, precision, recall, f1, auc, degenerate), curve


def _vectors(x, y):
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError("vectors of shapes %s and %s are not comparable" % (x.shape, y.shape))
    return x, y


def cosine_similarity(x, y):
    x, y = _vectors(x, y)
    norms = np.linalg.norm(x) * np.linalg.norm(y)
    if norms == 0:
        raise MetricError("cosine similarity is undefined for a zero vector")
    return float(np.clip(x @ y / norms, -1, 1))


def squared_euclidean_of_means(real_block, synth_block):
    real_block, synth_block = np.asarray(real_block), np.asarray(synth_block)
    if real_block.shape[0] == 0 or synth_block.shape[0] == 0:
        raise MetricError("empty block")
    if real_block.shape[1] != synth_block.shape[1]:
        raise MetricError("blocks with %d and %d columns" % (real_block.shape[1], synth_block.shape[1]))
    delta = real_block.mean(axis=0) - synth_block.mean(axis=0)
    return float(delta @ delta)


def mean_squared_error(x, y):
    x, y = _vectors(x, y)
    if len(x) == 0:
        raise MetricError("empty vectors")
    return float(np.mean((x - y) ** 2))


def fidelity_report(real, synth):
    """
    Per class, compare the per-feature mean vectors of the real and the synthetic block.
    :return: a list of FidelityMetrics, class 0 first
    """
    if real.num_features != synth.num_features:
        raise MetricError("real data has %d features, synthetic %d" % (real.num_features, synth.num_features))
    report = []
    for label in (0, 1):
        real_block, synth_block = real.class_block(label), synth.class_block(label)
        if len(real_block) == 0 or len(synth_block) == 0:
            raise MetricError("class %d is missing from the %s data" % (label, 'real' if len(real_block) == 0
                                                                         else 'synthetic'))
        real_means, synth_means = real_block.mean(axis=0), synth_block.mean(axis=0)
        report.append(FidelityMetrics(cosine=cosine_similarity(real_means, synth_means),
                                      euclidean_sq=squared_euclidean_of_means(real_block, synth_block),
                                      mse=mean_squared_error(real_means, synth_means),
                                      label=label))
    return report
