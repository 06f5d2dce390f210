import math

import pytest
from scipy import special as sps

from bandlab.special import chi_log_variance, generalized_gamma_log_variance, trigamma


@pytest.mark.parametrize("x", [0.05, 0.5, 1.0, 2.5, 5.0, 11.9, 12.0, 40.0, 1e4])
def test_trigamma_agrees_with_polygamma(x):
    assert trigamma(x) == pytest.approx(float(sps.polygamma(1, x)), rel=1e-13)


def test_trigamma_closed_forms():
    assert trigamma(1.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-14)
    assert trigamma(0.5) == pytest.approx(math.pi ** 2 / 2, rel=1e-14)
    # 1/4 trigamma(5) is the log-variance for exponent 9
    assert 0.25 * trigamma(5.0) == pytest.approx(0.0553307389, abs=1e-10)


def test_trigamma_rejects_nonpositive():
    with pytest.raises(ValueError):
        trigamma(0.0)


def test_variance_identities():
    assert chi_log_variance(1) == pytest.approx(math.pi ** 2 / 8)
    assert generalized_gamma_log_variance(9) == pytest.approx(0.25 * trigamma(5.0))
    assert chi_log_variance(10) == pytest.approx(generalized_gamma_log_variance(9))
