"""
PCA projection to two dimensions and k-means clustering of malware rows.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import comb

import seeding

logger = logging.getLogger(__name__)

POWER_TOLERANCE = 1e-10
POWER_MAX_ITERATIONS = 10000
LLOYD_MAX_ITERATIONS = 300
ELBOW_THRESHOLD = 0.15
GAP_REFERENCES = 10


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Projection2D:
    points: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray
    total_variance: float

    def project(self, features):
        return (np.asarray(features, dtype=np.float64) - self.mean) @ self.components.T


@dataclass(frozen=True, eq=False)
class Clustering:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int = 0

    def sizes(self):
        return np.bincount(self.assignments, minlength=self.k)


@dataclass(frozen=True)
class KChoice:
    k: int
    inertias: dict = field(default_factory=dict)
    single_cluster_by_gap: bool = False

    def to_dict(self):
        return {'k': self.k, 'inertias': {str(k): v for k, v in self.inertias.items()},
                'single_cluster_by_gap': self.single_cluster_by_gap}


def _sign_convention(vector):
    return vector if vector[np.argmax(np.abs(vector))] >= 0 else -vector


def _power_iteration(matrix, start, previous):
    def orthogonalize(v):
        for u in previous:
            v = v - (v @ u) * u
        return v

    vector = orthogonalize(start)
    if np.linalg.norm(vector) < 1e-12:
        # start parallel to an earlier eigenvector: begin at the least represented axis
        vector = orthogonalize(np.eye(len(start))[np.argmin(np.abs(previous[0]))])
    vector /= np.linalg.norm(vector)
    for _ in range(POWER_MAX_ITERATIONS):
        candidate = orthogonalize(matrix @ vector)
        norm = np.linalg.norm(candidate)
        if norm == 0:
            break
        candidate /= norm
        converged = min(np.linalg.norm(candidate - vector), np.linalg.norm(candidate + vector)) < POWER_TOLERANCE
        vector = candidate
        if converged:
            break
    return vector


def pca_2d(features):
    """
    Top-2 eigenpairs of the sample covariance by deflated power iteration from a fixed start vector.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2 or features.shape[1] < 2:
        raise ClusteringError("PCA needs at least 2 rows and 2 columns, got shape %s" % (features.shape,))
    mean = features.mean(axis=0)
    centered = features - mean
    covariance = centered.T @ centered / (len(features) - 1)
    total_variance = float(np.trace(covariance))
    if total_variance <= 0:
        raise ClusteringError("data has zero variance")
    start = np.linspace(1, 2, features.shape[1])
    start /= np.linalg.norm(start)
    deflated = covariance.copy()
    vectors, values = [], []
    for _ in range(2):
        vector = _power_iteration(deflated, start, vectors)
        value = float(vector @ covariance @ vector)
        deflated -= value * np.outer(vector, vector)
        vectors.append(vector)
        values.append(max(value, 0.0))
    order = np.argsort(values, kind='stable')[::-1]
    components = np.stack([_sign_convention(vectors[i]) for i in order])
    explained = np.asarray([values[i] for i in order])
    return Projection2D(centered @ components.T, components, explained, mean, total_variance)


def _squared_distances(points, centroids):
    return np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)


def kmeans_plus_plus(points, k, rng):
    chosen = [int(rng.integers(len(points)))]
    for _ in range(1, k):
        distances = _squared_distances(points, points[chosen]).min(axis=1)
        if distances.sum() == 0:
            remaining = np.setdiff1d(np.arange(len(points)), chosen)
            chosen.append(int(rng.choice(remaining)))
        else:
            chosen.append(int(rng.choice(len(points), p=distances / distances.sum())))
    return points[chosen].copy()


def _update_centroids(points, assignments, k, distances):
    """Means of the clusters; an empty cluster takes over the point farthest from its centroid."""
    assignments = assignments.copy()
    cost = distances[np.arange(len(points)), assignments].copy()
    for cluster in range(k):
        if np.any(assignments == cluster):
            continue
        counts = np.bincount(assignments, minlength=k)
        movable = counts[assignments] > 1
        farthest = int(np.argmax(np.where(movable, cost, -1)))
        logger.debug("Re-seeding empty cluster %d with point %d", cluster, farthest)
        assignments[farthest] = cluster
        cost[farthest] = 0
    centroids = np.stack([points[assignments == cluster].mean(axis=0) for cluster in range(k)])
    return centroids, assignments


def kmeans(points, k, seed):
    """
    k-means++ seeding followed by Lloyd iterations until the assignment no longer changes.
    """
    points = np.asarray(points, dtype=np.float64)
    if k < 1 or k > len(points):
        raise ClusteringError("k must be in [1, %d], got %d" % (len(points), k))
    rng = seeding.as_generator(seed)
    centroids = kmeans_plus_plus(points, k, rng)
    assignments = None
    previous_inertia = np.inf
    iteration = 0
    for iteration in range(1, LLOYD_MAX_ITERATIONS + 1):
        distances = _squared_distances(points, centroids)
        candidate = np.argmin(distances, axis=1)
        inertia = float(distances[np.arange(len(points)), candidate].sum())
        assert inertia <= previous_inertia + 1e-9 * (1 + abs(inertia)), \
            "inertia increased from %s to %s" % (previous_inertia, inertia)
        previous_inertia = inertia
        if assignments is not None and np.array_equal(candidate, assignments):
            break
        centroids, assignments = _update_centroids(points, candidate, k, distances)
    inertia = float(np.sum((points - centroids[assignments]) ** 2))
    return Clustering(k, assignments, centroids, inertia, iteration)


def _gap_prefers_single_cluster(points, inertias, seed):
    """
    Gap comparison of k=1 and k=2 against uniform samples from the bounding box:
    a single cluster if Gap(1) >= Gap(2) - s_2.
    """
    low, high = points.min(axis=0), points.max(axis=0)
    observed = np.log([inertias[1], inertias[2]])
    references = np.zeros((GAP_REFERENCES, 2))
    for b in range(GAP_REFERENCES):
        reference = seeding.generator(seed, 100, b).uniform(low, high, size=points.shape)
        references[b] = [np.log(kmeans(reference, k, seeding.generator(seed, 100, b, k)).inertia) for k in (1, 2)]
    gaps = references.mean(axis=0) - observed
    spread = references[:, 1].std() * np.sqrt(1 + 1 / GAP_REFERENCES)
    return gaps[0] >= gaps[1] - spread


def choose_k(points, k_range, seed=0):
    """
    Elbow rule: the smallest k whose inertia drop to k+1, relative to the one-cluster inertia,
    is below ELBOW_THRESHOLD; the largest k of the range if none is.
    When 1 and 2 are both candidates, a gap comparison decides whether the data is a single cluster.
    """
    points = np.asarray(points, dtype=np.float64)
    candidates = sorted(k for k in k_range if 1 <= k <= len(points))
    if not candidates:
        raise ClusteringError("no k in %s fits %d points" % (list(k_range), len(points)))
    inertias = {k: kmeans(points, k, seeding.generator(seed, k)).inertia for k in candidates}
    if len(candidates) == 1:
        return KChoice(candidates[0], inertias)
    if candidates[0] == 1 and 2 in inertias and inertias[2] > 0 and _gap_prefers_single_cluster(points, inertias, seed):
        return KChoice(1, inertias, single_cluster_by_gap=True)
    scale = float(np.sum((points - points.mean(axis=0)) ** 2))
    for k, following in zip(candidates, candidates[1:]):
        if scale == 0 or (inertias[k] - inertias[following]) / scale < ELBOW_THRESHOLD:
            return KChoice(k, inertias)
    return KChoice(candidates[-1], inertias)


def adjusted_rand_index(labels_true, labels_pred):
    labels_true, labels_pred = np.asarray(labels_true), np.asarray(labels_pred)
    if labels_true.shape != labels_pred.shape:
        raise ClusteringError("partitions of %d and %d points" % (len(labels_true), len(labels_pred)))
    _, true_codes = np.unique(labels_true, return_inverse=True)
    _, pred_codes = np.unique(labels_pred, return_inverse=True)
    table = np.zeros((true_codes.max() + 1, pred_codes.max() + 1), dtype=np.int64)
    np.add.at(table, (true_codes, pred_codes), 1)
    pairs = comb(table, 2).sum()
    rows, cols = comb(table.sum(axis=1), 2).sum(), comb(table.sum(axis=0), 2).sum()
    expected = rows * cols / comb(len(labels_true), 2)
    maximum = (rows + cols) / 2
    if maximum == expected:
        return 1.0
    return float((pairs - expected) / (maximum - expected))
