"""Trigamma function for the analytic log-variance identities.

If Y has density proportional to y^(n-1) exp(-c y^2) on (0, inf), then c Y^2 is
Gamma(n/2) distributed and Var(log Y) = trigamma(n/2) / 4.
"""

# Bernoulli-number coefficients of the asymptotic series
# trigamma(x) ~ 1/x + 1/(2x^2) + sum_k B_{2k} / x^(2k+1).
_ASYMPTOTIC = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6)


def trigamma(x):
    """Second derivative of log Gamma for real x > 0."""
    if not x > 0:
        raise ValueError("trigamma is only implemented for x > 0")
    acc = 0.0
    while x < 12.0:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    power = inv * inv2
    for b in _ASYMPTOTIC:
        series += b * power
        power *= inv2
    return acc + inv + 0.5 * inv2 + series


def chi_log_variance(n):
    """Var(log Y) for Y the norm of a standard Gaussian vector in R^n."""
    return 0.25 * trigamma(0.5 * n)


def generalized_gamma_log_variance(exponent):
    """Var(log s) under density proportional to s^exponent exp(-c s^2)."""
    return 0.25 * trigamma(0.5 * (exponent + 1.0))


__all__ = ["trigamma", "chi_log_variance", "generalized_gamma_log_variance"]
