import numpy as np
import pytest

from bandlab.errors import DegenerateFit
from bandlab.fitting import (
    bootstrap_slope,
    fit_exponent,
    frequency_se,
    linear_fit,
    mean_se,
    variance_se,
)


def test_exact_power_law():
    slope, intercept, se = fit_exponent([(1, 1), (2, 1 / 8), (4, 1 / 64)])
    assert slope == pytest.approx(-3.0)
    assert intercept == pytest.approx(0.0, abs=1e-14)
    assert se == pytest.approx(0.0, abs=1e-14)


def test_two_points_have_zero_stderr():
    fit = linear_fit([0.0, 1.0], [1.0, 3.0])
    assert (fit.slope, fit.intercept, fit.stderr, fit.r2) == (2.0, 1.0, 0.0, 1.0)


@pytest.mark.parametrize("points", [[(1, 1)], [(2, 1), (2, 3)], [(1, 1), (2, -1)]])
def test_degenerate_inputs(points):
    with pytest.raises(DegenerateFit):
        fit_exponent(points)


def test_noisy_fit_is_calibrated():
    # the true slope should land within 3 stderr in nearly every trial
    rng = np.random.default_rng(0)
    x = np.linspace(0, 5, 12)
    misses = 0
    for _ in range(400):
        fit = linear_fit(x, -1.5 * x + 2 + rng.normal(0, 0.3, x.size))
        misses += abs(fit.slope + 1.5) > 3 * fit.stderr
    assert misses <= 8


def test_estimator_standard_errors():
    rng = np.random.default_rng(1)
    v = rng.normal(size=40000)
    mean, se = mean_se(v)
    assert se == pytest.approx(1 / 200, rel=0.02)
    var, var_se = variance_se(v)
    assert var == pytest.approx(1.0, abs=4 * var_se)
    assert var_se == pytest.approx(np.sqrt(2 / v.size), rel=0.05)
    p, pse = frequency_se(v > 0)
    assert pse == pytest.approx(np.sqrt(p * (1 - p) / v.size))
    assert mean_se([3.0]) == (3.0, 0.0)


def test_bootstrap_ci_shrinks_with_more_replicas():
    x = [8.0, 16.0, 32.0]

    def width(n):
        rng = np.random.default_rng(5)
        groups = [np.exp(rng.normal(-3 * np.log(m), 0.5, n)) for m in x]
        lo, hi, _ = bootstrap_slope(groups, x, np.random.default_rng(6), resamples=600)
        assert lo < -3 < hi
        return hi - lo

    ratio = width(4000) / width(2000)
    assert 0.55 < ratio < 0.9


def test_listed_fit_examples():
    assert fit_exponent([(1, 1), (2, 2)])[0] == pytest.approx(1.0, abs=1e-15)
    pts = [(x, 7 * x ** -3.0) for x in (1.0, 2.0, 5.0, 9.0)]
    slope, intercept, _ = fit_exponent(pts)
    assert slope == pytest.approx(-3.0, abs=1e-12)
    assert intercept == pytest.approx(np.log(7), abs=1e-12)
    Ms = [8, 16, 32, 64]
    assert linear_fit(np.log(Ms), np.log([M ** -3.0 for M in Ms])).slope == pytest.approx(
        -3.0, abs=1e-12)
