"""Conditional law of the chain norm S_k given its direction and neighbours.

Write ``s`` for the ratio of a candidate norm to the realized one, so the
candidate matrix is ``s * D_k``. Up to a normalizing constant the negative log
density of ``S = s * S_k`` is

    phi(s) = a1 s^2 + a2 (s-1)^2 - 2 a3 s (s-1) + a4
             + a5 (1/s - 1)^2 + 2 a6 (1/s - 1) - a7 log(S_k s)

where, with ``Q = lam + B_{k-1}^T D_{k-1}^{-1} B_{k-1}`` and
``P = B_k^T D_k^{-1} B_k``,

    a1 = M/4 ||A_kk||_F^2          a4 = M/4 ||A_{k+1,k+1}||_F^2
    a2 = M/4 ||Q||_F^2             a5 = M/4 ||P||_F^2
    a3 = M/4 tr(A_kk Q)            a6 = M/4 tr(A_{k+1,k+1} P)
    a7 = (M^2 + M - 2) / 2         (dimension of symmetric M x M, minus one)

``phi_prime`` and ``phi_double_prime`` are derivatives in ``s``, i.e.
``S_k phi'(S_k s)`` and ``S_k^2 phi''(S_k s)`` in the absolute variable.

Moments of ``log s`` are computed in ``t = log s``. Every stationary point of
``g(t) = -phi(e^t) + t`` is a positive root of the quartic
``s^2 (s phi'(s) - 1)``, which gives exact breakpoints for the quadrature
and an exact piecewise-constant envelope for rejection sampling.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import linalg
from .errors import DomainError, IntegrabilityError
from .quadrature import integrate

WINDOW_LOG_CUTOFF = 60.0


@dataclass(frozen=True)
class AlphaCoefficients:
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a7: float
    M: Optional[int] = None
    Sk: float = 1.0

    def __post_init__(self):
        if self.M is not None and 2 * self.a7 != self.M * self.M + self.M - 2:
            raise ValueError(f"a7={self.a7} inconsistent with M={self.M}")
        if not self.Sk > 0:
            raise ValueError("Sk must be positive")

    @classmethod
    def for_block_size(cls, M, a1, a2, a3, a4, a5, a6, Sk=1.0):
        return cls(a1, a2, a3, a4, a5, a6, alpha7(M), M=M, Sk=Sk)


@dataclass(frozen=True)
class LogMoments:
    mean_log: float
    var_log: float
    quad_error: float
    support_window: tuple


def alpha7(M):
    return (M * M + M - 2) / 2


def alpha_coefficients(Akk, Ak1k1, Bprev, Bk, Dprev, Dk, lam):
    """The seven expansion coefficients for the chain at index k.

    ``Bprev`` and ``Bk`` are the chain's B matrices (minus the band
    off-diagonal blocks). Raises NearSingular if ``Dprev`` or ``Dk`` is
    numerically singular.
    """
    M = Akk.shape[0]
    eye = np.eye(M)
    Q = lam * eye + linalg.symmetrize(Bprev.T @ linalg.sym_solve(Dprev, Bprev))
    P = linalg.symmetrize(Bk.T @ linalg.sym_solve(Dk, Bk))
    c = M / 4.0
    return AlphaCoefficients(
        a1=c * float(np.sum(Akk * Akk)),
        a2=c * float(np.sum(Q * Q)),
        a3=c * linalg.trace_product(Akk, Q),
        a4=c * float(np.sum(Ak1k1 * Ak1k1)),
        a5=c * float(np.sum(P * P)),
        a6=c * linalg.trace_product(Ak1k1, P),
        a7=alpha7(M),
        M=M,
        Sk=linalg.operator_norm(Dk),
    )


def _positive(s):
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("phi is defined for s > 0 only")
    return s


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def phi(s, alpha):
    s = _positive(s)
    u = 1.0 / s - 1.0
    val = (alpha.a1 * s * s + alpha.a2 * (s - 1.0) ** 2 - 2.0 * alpha.a3 * s * (s - 1.0)
           + alpha.a4 + alpha.a5 * u * u + 2.0 * alpha.a6 * u
           - alpha.a7 * np.log(alpha.Sk * s))
    return _scalar(val)


def phi_prime(s, alpha):
    s = _positive(s)
    inv = 1.0 / s
    val = (2.0 * alpha.a1 * s + 2.0 * alpha.a2 * (s - 1.0) - 2.0 * alpha.a3 * (2.0 * s - 1.0)
           + 2.0 * alpha.a5 * (inv ** 2 - inv ** 3) - 2.0 * alpha.a6 * inv ** 2
           - alpha.a7 * inv)
    return _scalar(val)


def phi_double_prime(s, alpha):
    s = _positive(s)
    inv = 1.0 / s
    val = (2.0 * alpha.a1 + 2.0 * alpha.a2 - 4.0 * alpha.a3
           + 2.0 * alpha.a5 * (3.0 * inv ** 4 - 2.0 * inv ** 3)
           + 4.0 * alpha.a6 * inv ** 3 + alpha.a7 * inv ** 2)
    return _scalar(val)


def phi_direct(s, Dk, Dnext, Bprev, Bk, Dprev, lam):
    """phi evaluated literally from the chain matrices (no expansion).

    Independent of ``alpha_coefficients``: uses ``D_{k+1}`` itself rather than
    ``A_{k+1,k+1}``, and explicit inverses rather than solves.
    """
    if not s > 0:
        raise DomainError("phi is defined for s > 0 only")
    M = Dk.shape[0]
    eye = np.eye(M)
    left = s * Dk + lam * eye + Bprev.T @ np.linalg.inv(Dprev) @ Bprev
    right = Dnext + lam * eye + (Bk.T @ np.linalg.inv(Dk) @ Bk) / s
    Sk = np.linalg.norm(Dk, 2)
    return (M / 4.0 * np.sum(left * left) + M / 4.0 * np.sum(right * right)
            - alpha7(M) * np.log(s * Sk))


class ScalarDensity:
    """The normalized density of ``s`` proportional to ``exp(-phi(s))``.

    Construction locates every stationary point of the log-coordinate
    integrand and the window outside which it is below ``exp(-60)`` times its
    maximum.
    """

    def __init__(self, alpha):
        self.alpha = alpha
        self._check_integrable()
        self.critical_t = self._critical_points()
        self.g_max = float(np.max(self._g_raw(self.critical_t)))
        self.t_lo, self.t_hi = self._window()
        inside = self.critical_t[(self.critical_t > self.t_lo) & (self.critical_t < self.t_hi)]
        self.breakpoints = np.unique(np.concatenate([[self.t_lo, self.t_hi], inside]))
        self.t_mode = float(self.critical_t[np.argmax(self._g_raw(self.critical_t))])
        self._moments = None
        self._z = None

    def _check_integrable(self):
        a = self.alpha
        lead = a.a1 + a.a2 - 2.0 * a.a3
        if not lead > 0:
            raise IntegrabilityError(
                f"coefficient of s^2 is {lead:g} <= 0: density not integrable at infinity")
        if a.a5 < 0 or (a.a5 == 0 and (a.a6 < 0 or (a.a6 == 0 and not a.a7 > -1))):
            raise IntegrabilityError("density not integrable at s -> 0")

    def _g_raw(self, t):
        """log of the integrand in t, up to the constant -a4 + a7 log S_k."""
        a = self.alpha
        t = np.asarray(t, dtype=float)
        s = np.exp(t)
        u = np.exp(-t) - 1.0
        return -(a.a1 * s * s + a.a2 * (s - 1.0) ** 2 - 2.0 * a.a3 * s * (s - 1.0)
                 + a.a5 * u * u + 2.0 * a.a6 * u) + (a.a7 + 1.0) * t

    def log_weight(self, t):
        return self._g_raw(t) - self.g_max

    def weight(self, t):
        return np.exp(self.log_weight(t))

    def _critical_points(self):
        a = self.alpha
        # s^2 * (s * phi'(s) - 1), highest degree first
        coeffs = np.array([
            2.0 * (a.a1 + a.a2 - 2.0 * a.a3),
            2.0 * (a.a3 - a.a2),
            -(a.a7 + 1.0),
            2.0 * (a.a5 - a.a6),
            -2.0 * a.a5,
        ])
        roots = np.roots(coeffs)
        tol = 1e-6 * np.maximum(1.0, np.abs(roots))
        real = roots[(np.abs(roots.imag) <= tol)].real
        real = real[real > 0]
        deriv = np.polyder(coeffs)
        polished = []
        for r in real:
            for _ in range(3):
                d = np.polyval(deriv, r)
                if d == 0:
                    break
                step = np.polyval(coeffs, r) / d
                if not np.isfinite(step) or abs(step) > 0.5 * r:
                    break
                r -= step
            polished.append(r)
        if not polished:
            raise IntegrabilityError("no stationary point found for the log density")
        return np.sort(np.log(np.array(polished)))

    def _window(self):
        target = -WINDOW_LOG_CUTOFF

        def f(t):
            return float(self.log_weight(t)) - target

        def outward(t0, direction):
            step = 0.25
            t1 = t0 + direction * step
            while f(t1) > 0:
                step *= 2.0
                t1 = t0 + direction * step
                if step > 1e3:
                    raise IntegrabilityError("failed to bracket the support window")
            return brentq(f, min(t0, t1), max(t0, t1), xtol=1e-12, rtol=1e-14)

        lo = outward(float(self.critical_t[0]), -1.0)
        hi = outward(float(self.critical_t[-1]), 1.0)
        return lo, hi

    def _moment_integrand(self, t):
        w = self.weight(t)
        d = t - self.t_mode
        return np.vstack([w, d * w, d * d * w])

    def log_moments(self, rtol=1e-11):
        if self._moments is None:
            res = integrate(self._moment_integrand, self.breakpoints, rtol=rtol)
            (m0, m1, m2), (e0, e1, e2) = res.value, res.error
            self._z = float(m0)
            mean_c = m1 / m0
            var = max(m2 / m0 - mean_c * mean_c, 0.0)
            err = (e2 / m0 + m2 * e0 / m0 ** 2
                   + 2.0 * abs(mean_c) * (e1 / m0 + abs(m1) * e0 / m0 ** 2))
            self._moments = LogMoments(
                mean_log=float(self.t_mode + mean_c),
                var_log=float(var),
                quad_error=float(err),
                support_window=(float(self.t_lo), float(self.t_hi)),
            )
        return self._moments

    @property
    def normalizer(self):
        """Integral of the window-relative weight over the support window."""
        if self._z is None:
            self.log_moments()
        return self._z

    def mass(self, rtol=1e-13):
        """Integral of the normalized density over the window (should be 1)."""
        res = integrate(lambda t: self.weight(t)[None, :], self.breakpoints, rtol=rtol)
        return float(res.value[0] / self.normalizer)

    def cdf(self, s, rtol=1e-12):
        """P(S/S_k <= s) for each entry of ``s`` by quadrature."""
        s = _positive(s)
        t = np.clip(np.log(np.atleast_1d(s)), self.t_lo, self.t_hi)
        edges = np.unique(np.concatenate([self.breakpoints, t]))
        res = integrate(lambda x: self.weight(x)[None, :], edges, rtol=rtol)
        cum = np.concatenate([[0.0], np.cumsum(res.panel_values[0])])
        out = np.interp(t, res.edges, cum / cum[-1])
        return _scalar(out.reshape(np.shape(s)))

    def sample(self, rng, n, bins=64):
        """``n`` i.i.d. draws of ``s`` by rejection under a step envelope in ``t``.

        Stationary points are bin edges, so the integrand is monotone on every
        bin and the larger endpoint value bounds it.
        """
        edges = np.unique(np.concatenate([np.linspace(self.t_lo, self.t_hi, bins + 1),
                                          self.breakpoints]))
        w_edges = self.weight(edges)
        heights = np.maximum(w_edges[:-1], w_edges[1:]) * (1.0 + 1e-9)
        widths = np.diff(edges)
        area = heights * widths
        prob = area / area.sum()
        acceptance = self.normalizer / area.sum()
        out = np.empty(0)
        while out.size < n:
            need = n - out.size
            draw = max(64, int(1.3 * need / max(acceptance, 1e-3)))
            idx = rng.choice(prob.size, size=draw, p=prob)
            t = edges[idx] + widths[idx] * rng.random(draw)
            u = rng.random(draw)
            accepted = t[u * heights[idx] < self.weight(t)]
            out = np.concatenate([out, accepted[:need]])
        return np.exp(out)

def log_moments(alpha):
    """Mean and variance of ``log s`` under the density proportional to exp(-phi(s))."""
    return ScalarDensity(alpha).log_moments()


def sample_density(alpha, rng, n):
    return ScalarDensity(alpha).sample(rng, n)


@dataclass(frozen=True)
class ConcavityReport:
    right_ok: bool
    left_ok: bool
    curvature_ok: bool
    right_range: tuple
    left_range: tuple
    curvature_range: tuple

    def __iter__(self):
        return iter((self.right_ok, self.left_ok, self.curvature_ok))


def logconcavity_check(alpha, epsilon, points=1000):
    """Test the three growth inequalities on log-spaced grids.

    Checks ``phi'(s) >= M^(2-eps) s`` for ``s >= M^eps``,
    ``phi'(s) <= -M^(2-eps) s^-3`` for ``s <= M^-eps``, and
    ``|phi''(s)| <= M^(3+eps) (1 + s^-4)`` for all s. Unbounded ranges are
    truncated to ``[M^-2, M^2]``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if alpha.M is None:
        raise ValueError("logconcavity_check needs the block size M")
    M = float(alpha.M)
    lo, hi = M ** -2.0, M ** 2.0
    grow = M ** (2.0 - epsilon)

    right_range = (M ** epsilon, hi)
    s = np.geomspace(*right_range, points)
    right_ok = bool(np.all(phi_prime(s, alpha) >= grow * s))

    left_range = (lo, M ** -epsilon)
    s = np.geomspace(*left_range, points)
    left_ok = bool(np.all(phi_prime(s, alpha) <= -grow * s ** -3.0))

    curvature_range = (lo, hi)
    s = np.geomspace(*curvature_range, points)
    curvature_ok = bool(np.all(np.abs(phi_double_prime(s, alpha))
                               <= M ** (3.0 + epsilon) * (1.0 + s ** -4.0)))
    return ConcavityReport(right_ok, left_ok, curvature_ok,
                           right_range, left_range, curvature_range)


def norm_direction_selftest(n):
    """Var(log |X|) for standard Gaussian X in R^n through the density machinery.

    The radial law ``y^(n-1) exp(-y^2/2)`` is the expansion with a1 = 1/2,
    a7 = n - 1 and all other coefficients zero; the result must equal
    ``trigamma(n/2) / 4``.
    """
    from .special import chi_log_variance

    if n < 1:
        raise ValueError("dimension must be >= 1")
    alpha = AlphaCoefficients(0.5, 0.0, 0.0, 0.0, 0.0, 0.0, float(n - 1))
    dens = ScalarDensity(alpha)
    mom = dens.log_moments()
    expected = chi_log_variance(n)
    return {
        "n": n,
        "var_log": mom.var_log,
        "expected": expected,
        "abs_err": abs(mom.var_log - expected),
        "mass": dens.mass(),
        "ok": abs(mom.var_log - expected) <= 1e-6,
    }
