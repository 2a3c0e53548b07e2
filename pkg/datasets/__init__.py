import enum
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import seeding

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    pass


class Origin(enum.Enum):
    REAL = 'Real'
    SYNTHETIC = 'Synthetic'


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Row-major feature matrix plus binary labels (0 benign, 1 malware).
    The arrays are read-only after construction.
    """
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    origin: Origin = Origin.REAL

    def __post_init__(self):
        features = _frozen(self.features, np.float64)
        if features.ndim == 1 and features.size == 0:
            features = _frozen(np.zeros((0, len(self.feature_names))), np.float64)
        labels = _frozen(self.labels, np.int64).reshape(-1)
        if features.ndim != 2:
            raise DatasetError("features must be a matrix, got shape %s" % (features.shape,))
        if len(labels) != features.shape[0]:
            raise DatasetError("%d labels for %d rows" % (len(labels), features.shape[0]))
        if not set(np.unique(labels)).issubset({0, 1}):
            raise DatasetError("labels must be 0 or 1, got %s" % sorted(set(np.unique(labels)) - {0, 1}))
        names = tuple(str(name) for name in self.feature_names)
        if len(names) != features.shape[1]:
            raise DatasetError("%d feature names for %d columns" % (len(names), features.shape[1]))
        if len(set(names)) != len(names):
            raise DatasetError("duplicate feature names")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain non-finite values")
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'feature_names', names)

    @property
    def num_rows(self):
        return self.features.shape[0]

    @property
    def num_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return {0: int(np.sum(self.labels == 0)), 1: int(np.sum(self.labels == 1))}

    def is_normalized(self):
        return bool(np.all((self.features >= 0) & (self.features <= 1)))

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices], self.feature_names, self.origin)

    def select_columns(self, columns):
        columns = list(columns)
        return LabeledDataset(self.features[:, columns], self.labels,
                              [self.feature_names[c] for c in columns], self.origin)

    def class_block(self, label):
        return self.features[self.labels == label]

    def replace_features(self, features):
        return LabeledDataset(features, self.labels, self.feature_names, self.origin)

    def to_frame(self, label_column='class'):
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        frame[label_column] = self.labels
        return frame


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def eval_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def fold_sizes(self):
        return np.bincount(self.assignments, minlength=self.k)

    def to_dict(self):
        return {'k': self.k, 'seed': self.seed, 'assignments': [int(a) for a in self.assignments]}

    @staticmethod
    def from_dict(d):
        return FoldPlan(int(d['k']), np.asarray(d['assignments'], dtype=np.int64), int(d['seed']))


@dataclass(frozen=True)
class BalanceReport:
    kept_per_class: int
    dropped_indices: tuple = field(default_factory=tuple)
    seed: int = 0

    def to_dict(self):
        return {'kept_per_class': self.kept_per_class, 'seed': self.seed,
                'dropped_indices': list(self.dropped_indices)}

    @staticmethod
    def from_dict(d):
        return BalanceReport(int(d['kept_per_class']), tuple(int(i) for i in d['dropped_indices']), int(d['seed']))


def feature_names(num_features, prefix='f'):
    return ['%s%d' % (prefix, i + 1) for i in range(num_features)]


def validate_datasets(dataset_paths):
    exist = [os.path.isfile(path) for path in dataset_paths]
    if not all(exist):
        raise DatasetError("dataset does not exist: %s" % ", ".join(
            path for (path, exists) in zip(dataset_paths, exist) if not exists))


def __is_positive(value, positive_label):
    if value == positive_label:
        return True
    try:
        return float(value) == float(positive_label)
    except ValueError:
        return False


def load_csv(path, label_column='class', positive_label='1'):
    validate_datasets([path])
    try:
        header = pd.read_csv(path, header=None, nrows=1, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DatasetError("%s is empty" % path)
    if header.empty:
        raise DatasetError("%s is empty" % path)
    columns = [str(c).strip() for c in header.iloc[0].tolist()]
    duplicates = sorted(set(c for c in columns if columns.count(c) > 1))
    if duplicates:
        raise DatasetError("duplicate columns in %s: %s" % (path, ", ".join(duplicates)))
    if label_column not in columns:
        raise DatasetError("label column '%s' not in %s" % (label_column, path))
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    frame.columns = columns
    if len(frame) == 0:
        raise DatasetError("%s contains no rows" % path)
    feature_names = [c for c in columns if c != label_column]
    numeric = frame[feature_names].apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DatasetError("non-numeric value '%s' in row %d, column '%s' of %s" % (
            frame.iloc[row][feature_names[col]], row + 1, feature_names[col], path))
    label_values = [value.strip() for value in frame[label_column]]
    if '' in label_values:
        raise DatasetError("empty label in row %d of %s" % (label_values.index('') + 1, path))
    labels = [1 if __is_positive(value, str(positive_label)) else 0 for value in label_values]
    dataset = LabeledDataset(numeric.to_numpy(dtype=np.float64), labels, feature_names, Origin.REAL)
    logger.info("Loaded %s: %d rows, %d features, class counts %s",
                path, dataset.num_rows, dataset.num_features, dataset.class_counts())
    return dataset


def write_csv(dataset, path, label_column='class'):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    dataset.to_frame(label_column).to_csv(path, index=False)


def min_max_normalize(dataset, bounds=None):
    """
    Map every column to [0,1] by (v - min) / (max - min).
    Constant columns map to 0. Values outside supplied bounds are clipped, so
    an evaluation fold normalized with training bounds stays within [0,1].
    :return: the normalized dataset and the (d, 2) bounds that were used
    """
    features = dataset.features
    if bounds is None:
        if dataset.num_rows == 0:
            raise DatasetError("cannot compute bounds of an empty dataset")
        bounds = np.stack([features.min(axis=0), features.max(axis=0)], axis=1)
    else:
        bounds = np.asarray(bounds, dtype=np.float64)
        if bounds.shape != (dataset.num_features, 2):
            raise DatasetError("bounds must have shape (%d, 2), got %s" % (dataset.num_features, bounds.shape))
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise DatasetError("bounds with min > max for columns %s" % np.flatnonzero(bounds[:, 0] > bounds[:, 1]))
    lower, upper = bounds[:, 0], bounds[:, 1]
    span = upper - lower
    constant = span == 0
    scaled = (features - lower) / np.where(constant, 1, span)
    scaled[:, constant] = 0
    scaled = np.clip(scaled, 0, 1)
    return dataset.replace_features(scaled), bounds


def balance_by_undersampling(dataset, seed):
    """
    Randomly drop majority-class rows until both classes have the minority count.
    Surviving rows keep their original order.
    """
    counts = dataset.class_counts()
    if min(counts.values()) == 0:
        raise DatasetError("cannot balance a single-class dataset: %s" % counts)
    minority = min(counts.values())
    dropped = []
    if counts[0] != counts[1]:
        majority_label = 0 if counts[0] > counts[1] else 1
        majority_indices = np.flatnonzero(dataset.labels == majority_label)
        rng = seeding.generator(seed, seeding.BALANCE)
        shuffled = rng.permutation(majority_indices)
        dropped = np.sort(shuffled[minority:])
    keep = np.setdiff1d(np.arange(dataset.num_rows), dropped)
    report = BalanceReport(minority, tuple(int(i) for i in dropped), int(seed))
    logger.info("Balanced to %d rows per class, dropped %d", minority, len(dropped))
    return dataset.subset(keep), report


def stratified_kfold(dataset, k, seed):
    """
    Assign every row to one of k folds. Each class is shuffled and the classes are
    laid out one after the other; position modulo k is the fold, so both the fold
    sizes and the per-class fold counts differ by at most one.
    """
    if k < 2:
        raise DatasetError("k must be at least 2, got %d" % k)
    counts = dataset.class_counts()
    too_small = [label for label, count in counts.items() if 0 < count < k]
    if too_small:
        raise DatasetError("classes %s have fewer than k=%d members: %s" % (too_small, k, counts))
    rng = seeding.generator(seed, seeding.FOLDS)
    order = np.concatenate([rng.permutation(np.flatnonzero(dataset.labels == label)) for label in (0, 1)])
    assignments = np.empty(dataset.num_rows, dtype=np.int64)
    assignments[order] = np.arange(len(order)) % k
    return FoldPlan(int(k), assignments, int(seed))


def chi_square_scores(dataset, threshold=0.5):
    """
    Chi-square statistic of the 2x2 table (feature >= threshold) x label per column.
    Columns with an empty margin score 0.
    """
    present = dataset.features >= threshold
    positive = dataset.labels == 1
    n = float(dataset.num_rows)
    a = np.sum(present & positive[:, None], axis=0).astype(np.float64)
    b = np.sum(present & ~positive[:, None], axis=0).astype(np.float64)
    c = np.sum(~present & positive[:, None], axis=0).astype(np.float64)
    d = np.sum(~present & ~positive[:, None], axis=0).astype(np.float64)
    denominator = (a + b) * (c + d) * (a + c) * (b + d)
    with np.errstate(divide='ignore', invalid='ignore'):
        scores = np.where(denominator > 0, n * (a * d - b * c) ** 2 / denominator, 0.0)
    return scores


def chi_square_select(dataset, top_m):
    """
    Keep the top_m columns by chi-square score, highest first; ties go to the lower column index.
    :return: the reduced dataset and the selected column indices in rank order
    """
    if top_m <= 0:
        raise DatasetError("top_m must be positive, got %d" % top_m)
    if top_m > dataset.num_features:
        raise DatasetError("top_m=%d exceeds the %d features" % (top_m, dataset.num_features))
    scores = chi_square_scores(dataset)
    ranking = np.lexsort((np.arange(dataset.num_features), -scores))
    selected = [int(i) for i in ranking[:top_m]]
    return dataset.select_columns(selected), selected
