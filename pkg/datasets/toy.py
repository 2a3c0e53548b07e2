"""
Small generated datasets with known structure, used by the `toy` subcommand and the tests.
"""
import numpy as np

import seeding
from datasets import LabeledDataset, Origin, feature_names


def make_toy_dataset(seed, rows_per_class=2000, num_features=16, separation=0.3, noise=0.05):
    """
    Two classes of near-binary indicator features. Every feature has a per-class
    probability of being set; the two probabilities differ by at least `separation`.
    Set values are jittered down from 1 and unset values up from 0 by up to `noise`.
    """
    rng = seeding.generator(seed, 0)
    gap = rng.uniform(separation, min(separation + 0.2, 0.9), size=num_features)
    base = rng.uniform(0.05, 0.95 - gap)
    flip = rng.random(num_features) < 0.5
    p_benign = np.where(flip, base + gap, base)
    p_malware = np.where(flip, base, base + gap)
    rows, labels = [], []
    for label, probabilities in ((0, p_benign), (1, p_malware)):
        bits = rng.random((rows_per_class, num_features)) < probabilities
        jitter = rng.uniform(0, noise, size=bits.shape)
        rows.append(np.where(bits, 1 - jitter, jitter))
        labels.append(np.full(rows_per_class, label))
    return LabeledDataset(np.concatenate(rows), np.concatenate(labels), feature_names(num_features), Origin.REAL)


def make_planted_clusters(seed, sizes=(150, 100, 50), spread=0.3, distance=6.0, num_features=2):
    """
    Isotropic Gaussian blobs around well separated centers. All rows are labelled malware.
    :return: the dataset and the planted cluster index of every row
    """
    rng = seeding.generator(seed, 1)
    points, planted = [], []
    for cluster, size in enumerate(sizes):
        angle = 2 * np.pi * cluster / max(len(sizes), 1)
        center = np.zeros(num_features)
        center[:2] = distance * np.cos(angle), distance * np.sin(angle)
        points.append(center + rng.normal(0, spread, size=(size, num_features)))
        planted.append(np.full(size, cluster))
    points = np.concatenate(points)
    dataset = LabeledDataset(points, np.ones(len(points), dtype=np.int64), feature_names(num_features), Origin.REAL)
    return dataset, np.concatenate(planted)


def make_xor(repeats=5):
    corners = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.float64)
    features = np.tile(corners, (repeats, 1))
    labels = np.logical_xor(features[:, 0], features[:, 1]).astype(np.int64)
    return LabeledDataset(features, labels, feature_names(2), Origin.REAL)
