"""
Two-sided nonparametric tests (Wilcoxon signed-rank, Mann-Whitney U) and p-value aggregation.

Exact null distributions are computed by dynamic programming over doubled ranks. Average ranks
are multiples of 1/2, so doubled ranks are integers and ties are handled exactly.
"""
import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import comb
from scipy.stats import norm, rankdata

WILCOXON_EXACT_LIMIT = 25
MANN_WHITNEY_EXACT_LIMIT = 20
SIGNIFICANCE = 0.05


class StatsError(ValueError):
    pass


class Method(enum.Enum):
    EXACT = 'Exact'
    NORMAL_APPROX = 'NormalApprox'


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: Method
    n_effective: int
    degenerate: bool = False

    def to_dict(self):
        return {'statistic': self.statistic, 'p_value': self.p_value, 'method': self.method.value,
                'n_effective': self.n_effective, 'degenerate': self.degenerate}

    @staticmethod
    def from_dict(d):
        return TestResult(float(d['statistic']), float(d['p_value']), Method(d['method']), int(d['n_effective']),
                          bool(d.get('degenerate', False)))


def _use_exact(method, size, limit):
    if method not in ('auto', 'exact', 'approx'):
        raise StatsError("method must be auto, exact or approx, got %s" % method)
    return method == 'exact' or (method == 'auto' and size <= limit)


def _doubled(ranks):
    return np.rint(2 * np.asarray(ranks)).astype(np.int64)


def _two_sided(distribution, observed):
    """p from counts over doubled-rank sums and the observed doubled sum."""
    total = distribution.sum()
    lower = distribution[:observed + 1].sum() / total
    upper = distribution[observed:].sum() / total
    return float(min(1.0, 2 * min(lower, upper)))


def _normal_p(deviation, variance):
    if variance <= 0:
        return 1.0
    z = max(abs(deviation) - 0.5, 0) / np.sqrt(variance)
    return float(min(1.0, 2 * norm.sf(z)))


def signed_rank_distribution(doubled_ranks):
    """Number of sign assignments giving each doubled positive-rank sum."""
    counts = np.zeros(int(np.sum(doubled_ranks)) + 1)
    counts[0] = 1
    for rank in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[rank:] = counts[:len(counts) - rank]
        counts = counts + shifted
    return counts


def rank_sum_distribution(doubled_ranks, subset_size):
    """Number of size-`subset_size` subsets of the pooled sample giving each doubled rank sum."""
    counts = np.zeros((subset_size + 1, int(np.sum(doubled_ranks)) + 1))
    counts[0, 0] = 1
    for rank in doubled_ranks:
        for size in range(subset_size, 0, -1):
            counts[size, rank:] += counts[size - 1, :counts.shape[1] - rank]
    return counts[subset_size]


def wilcoxon_signed_rank(a, b, method='auto'):
    """
    Paired test on a - b. Zero differences are dropped, tied |differences| share their average rank.
    The statistic is min(W+, W-).
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) == 0:
        raise StatsError("paired samples must be non-empty vectors of equal length, got %s and %s" % (
            a.shape, b.shape))
    differences = a - b
    differences = differences[differences != 0]
    n = len(differences)
    if n == 0:
        return TestResult(0.0, 1.0, Method.EXACT, 0, degenerate=True)
    ranks = rankdata(np.abs(differences))
    w_plus = float(ranks[differences > 0].sum())
    w_minus = float(ranks[differences < 0].sum())
    if _use_exact(method, n, WILCOXON_EXACT_LIMIT):
        p = _two_sided(signed_rank_distribution(_doubled(ranks)), int(np.rint(2 * w_plus)))
        return TestResult(min(w_plus, w_minus), p, Method.EXACT, n)
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24 - np.sum(tie_counts ** 3 - tie_counts) / 48
    p = _normal_p(w_plus - n * (n + 1) / 4, variance)
    return TestResult(min(w_plus, w_minus), p, Method.NORMAL_APPROX, n)


def mann_whitney_u(a, b, method='auto'):
    """
    Unpaired rank-sum test; the statistic is U of `a`, R_a - n_a(n_a+1)/2 on average ranks of the pooled sample.
    """
    a, b = np.asarray(a, dtype=np.float64).reshape(-1), np.asarray(b, dtype=np.float64).reshape(-1)
    if len(a) == 0 or len(b) == 0:
        raise StatsError("both samples must be non-empty, got sizes %d and %d" % (len(a), len(b)))
    n1, n2 = len(a), len(b)
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    rank_sum = float(ranks[:n1].sum())
    u = rank_sum - n1 * (n1 + 1) / 2
    if _use_exact(method, n1 + n2, MANN_WHITNEY_EXACT_LIMIT):
        distribution = rank_sum_distribution(_doubled(ranks), n1)
        assert np.isclose(distribution.sum(), comb(n1 + n2, n1, exact=True))
        return TestResult(u, _two_sided(distribution, int(np.rint(2 * rank_sum))), Method.EXACT, n1 + n2)
    total = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    variance = n1 * n2 / 12 * ((total + 1) - np.sum(tie_counts ** 3 - tie_counts) / (total * (total - 1)))
    return TestResult(u, _normal_p(u - n1 * n2 / 2, variance), Method.NORMAL_APPROX, total)


def aggregate_p(per_metric_p, significance=SIGNIFICANCE):
    """
    :return: the mean p-value and whether H0 (no difference) is rejected, i.e. mean < significance
    """
    p_values = np.asarray(per_metric_p, dtype=np.float64)
    if p_values.size == 0:
        raise StatsError("no p-values to aggregate")
    if np.any((p_values < 0) | (p_values > 1)) or not np.all(np.isfinite(p_values)):
        raise StatsError("p-values must lie in [0,1], got %s" % p_values.tolist())
    mean_p = float(np.mean(p_values))
    return mean_p, mean_p < significance
