"""
CART trees stored as flat node tables, and gradient boosting on the logistic loss.

For 0/1 targets the Gini impurity of a node is twice its target variance, so the
classification tree and the regression trees used by boosting share one split search
on the summed squared error. A row goes left when x[feature] <= threshold.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

logger = logging.getLogger(__name__)

LEAF = -1
# splits whose gain is within rounding of 0 are still taken in impure nodes (XOR needs them)
GAIN_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def num_nodes(self):
        return len(self.value)

    @property
    def num_leaves(self):
        return int(np.sum(self.feature == LEAF))

    def depth(self, node=0):
        if self.feature[node] == LEAF:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            rows = np.flatnonzero(self.feature[node] != LEAF)
            if len(rows) == 0:
                return self.value[node]
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])

    def to_dict(self):
        return {'feature': self.feature.tolist(), 'threshold': self.threshold.tolist(),
                'left': self.left.tolist(), 'right': self.right.tolist(), 'value': self.value.tolist()}

    @staticmethod
    def from_dict(d):
        return RegressionTree(np.asarray(d['feature'], dtype=np.int64), np.asarray(d['threshold'], dtype=np.float64),
                              np.asarray(d['left'], dtype=np.int64), np.asarray(d['right'], dtype=np.int64),
                              np.asarray(d['value'], dtype=np.float64))


def squared_error(y):
    return float(np.sum(y ** 2) - np.sum(y) ** 2 / len(y)) if len(y) else 0.0


def best_split(X, y, min_leaf):
    """
    Exhaustive axis-aligned split search with thresholds at midpoints between consecutive distinct values.
    Ties go to the lowest feature, then the lowest threshold.
    :return: (gain in summed squared error, feature, threshold), or None if no split respects min_leaf
    """
    n, d = X.shape
    parent = squared_error(y)
    # equal gains computed through different cumulative sums differ by rounding only
    tie = GAIN_TOLERANCE * max(1.0, parent)
    best = None
    for feature in range(d):
        order = np.argsort(X[:, feature], kind='stable')
        xs, ys = X[order, feature], y[order]
        left_count = np.arange(1, n)
        left_sum = np.cumsum(ys)[:-1]
        left_squares = np.cumsum(ys ** 2)[:-1]
        right_count = n - left_count
        right_sum = ys.sum() - left_sum
        right_squares = np.sum(ys ** 2) - left_squares
        gains = parent - (left_squares - left_sum ** 2 / left_count) - (right_squares - right_sum ** 2 / right_count)
        valid = (xs[:-1] < xs[1:]) & (left_count >= min_leaf) & (right_count >= min_leaf)
        if not valid.any():
            continue
        gains = np.where(valid, gains, -np.inf)
        position = int(np.flatnonzero(gains >= gains.max() - tie)[0])
        if best is None or gains[position] > best[0] + tie:
            best = (float(gains[position]), feature, (xs[position] + xs[position + 1]) / 2)
    return best


def grow_tree(X, y, max_depth, min_leaf):
    """
    Grow a tree until max_depth, min_leaf or purity stops it; leaves hold the mean target.
    """
    features, thresholds, lefts, rights, values = [], [], [], [], []

    def add_node(rows, depth):
        node = len(values)
        features.append(LEAF)
        thresholds.append(0.0)
        lefts.append(LEAF)
        rights.append(LEAF)
        values.append(float(np.mean(y[rows])))
        targets = y[rows]
        if depth >= max_depth or len(rows) < 2 * min_leaf or np.all(targets == targets[0]):
            return node
        split = best_split(X[rows], targets, min_leaf)
        if split is None or split[0] < -GAIN_TOLERANCE:
            return node
        _, feature, threshold = split
        go_left = X[rows, feature] <= threshold
        features[node] = feature
        thresholds[node] = threshold
        lefts[node] = add_node(rows[go_left], depth + 1)
        rights[node] = add_node(rows[~go_left], depth + 1)
        return node

    if len(y) == 0:
        raise ValueError("cannot grow a tree on no rows")
    add_node(np.arange(len(y)), 0)
    return RegressionTree(np.asarray(features, dtype=np.int64), np.asarray(thresholds, dtype=np.float64),
                          np.asarray(lefts, dtype=np.int64), np.asarray(rights, dtype=np.int64),
                          np.asarray(values, dtype=np.float64))


def logistic_loss(raw, y):
    """Mean logistic loss of raw scores (log-odds) against 0/1 targets."""
    return float(np.mean(np.logaddexp(0, raw) - y * raw))


def fit_gradient_boosting(X, y, rounds, max_depth, learning_rate):
    """
    F_0 is the prior log-odds; round m fits a regression tree to the negative gradient y - sigmoid(F)
    and adds learning_rate times its leaf means.
    :return: base score, trees and the training loss after 0..rounds rounds
    """
    positive = float(np.mean(y))
    base_score = float(np.log(positive / (1 - positive)))
    raw = np.full(len(y), base_score)
    trees, losses = [], [logistic_loss(raw, y)]
    for round_index in range(rounds):
        tree = grow_tree(X, y - expit(raw), max_depth, min_leaf=1)
        raw = raw + learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(logistic_loss(raw, y))
        logger.debug("Boosting round %d: loss %.6f, %d leaves", round_index + 1, losses[-1], tree.num_leaves)
    return base_score, trees, losses


def boosting_raw_scores(base_score, trees, learning_rate, X):
    raw = np.full(X.shape[0], base_score)
    for tree in trees:
        raw += learning_rate * tree.predict(X)
    return raw
