"""Least-squares fits and small estimator helpers."""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    stderr: float
    r2: float


def linear_fit(x, y):
    """Ordinary least squares ``y ~ slope * x + intercept``.

    ``stderr`` is the standard error of the slope; it is 0 when only two
    points are given (no residual degrees of freedom).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateFit("x and y must be 1-D arrays of equal length")
    if np.unique(x).size < 2:
        raise DegenerateFit("need at least two distinct x values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateFit("non-finite data")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    sse = float(np.sum(resid ** 2))
    sst = float(np.sum((y - ym) ** 2))
    dof = x.size - 2
    stderr = float(np.sqrt(sse / dof / sxx)) if dof > 0 else 0.0
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return LinearFit(float(slope), float(intercept), stderr, float(r2))


def fit_exponent(points):
    """Slope, intercept and slope stderr of log y against log x."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateFit("points must be (x, y) pairs")
    if np.any(pts <= 0):
        raise DegenerateFit("log-log fit needs positive x and y")
    fit = linear_fit(np.log(pts[:, 0]), np.log(pts[:, 1]))
    return fit.slope, fit.intercept, fit.stderr


def mean_se(values):
    """Sample mean and its standard error (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty sample")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def variance_se(values):
    """Unbiased sample variance and a large-sample standard error for it."""
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 2:
        raise ValueError("need at least two values")
    var = float(v.var(ddof=1))
    m4 = float(np.mean((v - v.mean()) ** 4))
    return var, float(np.sqrt(max(m4 - var * var, 0.0) / n))


def frequency_se(indicators):
    p = float(np.mean(indicators))
    return p, float(np.sqrt(p * (1.0 - p) / len(indicators)))


def bootstrap_slope(groups, x, rng, resamples=1000, level=0.95):
    """Percentile bootstrap CI for the log-log slope of group means.

    ``groups[i]`` holds the per-replica values observed at ``x[i]``; each
    resample redraws replicas within every group independently.
    """
    x = np.asarray(x, dtype=float)
    logx = np.log(x)
    slopes = np.empty(resamples)
    for b in range(resamples):
        means = [np.mean(g[rng.integers(0, len(g), len(g))]) for g in groups]
        slopes[b] = linear_fit(logx, np.log(means)).slope
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(slopes, [tail, 1.0 - tail])
    return float(lo), float(hi), slopes
