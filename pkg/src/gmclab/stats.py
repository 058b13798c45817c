"""Estimator statistics: robust standard errors, intervals, log-log fits."""

import numpy as np


def batch_means_se(samples, n_batches: int = 100):
    """Standard error of the mean via batch means.

    Splits the replica stream into `n_batches` contiguous batches and uses
    the spread of batch averages.  More honest than the plain i.i.d. SE for
    the heavy-tailed lognormal-sum estimators near the moment boundary.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    n_batches = max(2, min(n_batches, n))
    usable = (n // n_batches) * n_batches
    means = samples[:usable].reshape(n_batches, -1).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(n_batches)


def median_of_means(samples, n_batches: int = 100):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    n_batches = max(2, min(n_batches, n))
    usable = (n // n_batches) * n_batches
    return float(np.median(samples[:usable].reshape(n_batches, -1).mean(axis=1)))


def wilson_interval(successes: int, n: int, z: float = 1.96):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = (z / denom) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def least_squares_fit(x, y, sigma=None):
    """Weighted least-squares line fit.

    Returns (slope, intercept, slope_se).  `sigma` gives per-point standard
    deviations; omitted means an ordinary fit with slope_se estimated from
    residuals.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points to fit a line")
    if sigma is None:
        w = np.ones_like(x)
    else:
        sigma = np.asarray(sigma, dtype=float)
        w = 1.0 / np.maximum(sigma, 1e-300) ** 2
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    slope = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - slope * xbar
    if sigma is None:
        if x.size > 2:
            resid = y - (intercept + slope * x)
            s2 = (resid**2).sum() / (x.size - 2)
        else:
            s2 = 0.0
        slope_se = np.sqrt(s2 / sxx)
    else:
        slope_se = np.sqrt(1.0 / sxx)
    return float(slope), float(intercept), float(slope_se)


class RunningMoments:
    """Associative accumulator for mean/SE of a stream of replica vectors.

    Merging two accumulators in any grouping gives identical statistics up
    to floating-point reassociation; the runners always merge in replica
    order so results do not depend on the worker count.
    """

    def __init__(self, dim: int):
        self.n = 0
        self.sum = np.zeros(dim)
        self.sumsq = np.zeros(dim)

    def add_block(self, block):
        block = np.atleast_2d(np.asarray(block, dtype=float))
        self.n += block.shape[0]
        self.sum += block.sum(axis=0)
        self.sumsq += (block**2).sum(axis=0)

    def merge(self, other: "RunningMoments"):
        self.n += other.n
        self.sum += other.sum
        self.sumsq += other.sumsq
        return self

    @property
    def mean(self):
        return self.sum / self.n

    @property
    def var(self):
        m = self.mean
        return np.maximum(self.sumsq / self.n - m * m, 0.0) * self.n / max(self.n - 1, 1)

    @property
    def se(self):
        return np.sqrt(self.var / self.n)
