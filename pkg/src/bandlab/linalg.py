"""Dense real-matrix primitives and the Gaussian block ensemble.

Blocks are plain ``numpy`` float64 arrays. Symmetric blocks are built so that
``H[i, j] == H[j, i]`` holds bit-for-bit, not just to rounding.

Block variances follow from expanding the band-matrix weight
``exp(-(M/4) tr a^T a)``: each off-diagonal block appears twice in the trace,
so its entries are N(0, 1/M); a diagonal block contributes
``(M/4)(sum_i a_ii^2 + 2 sum_{i<j} a_ij^2)``, giving variance 2/M on the
diagonal and 1/M off it. ``(E + E^T)/sqrt(2)`` with E ~ N(0, 1/M) has exactly
this law.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import NearSingular

PIVOT_FLOOR = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self):
        return self.hi - self.lo


def sample_gaussian_block(M, rng):
    """M x M matrix of i.i.d. N(0, 1/M) entries."""
    return rng.standard_normal((M, M)) / np.sqrt(M)


def sample_goe_block(M, rng):
    """Symmetric block with diagonal variance 2/M and off-diagonal variance 1/M."""
    E = sample_gaussian_block(M, rng)
    # E + E.T is exactly symmetric: floating-point addition commutes.
    return (E + E.T) / np.sqrt(2.0)


def symmetrize(H):
    return 0.5 * (H + H.T)


def frobenius_norm(H):
    return float(np.sqrt(np.sum(np.square(H))))


def operator_norm(H):
    """Largest singular value (LAPACK SVD, so reproducible to the last bit)."""
    H = np.asarray(H, dtype=float)
    if H.size == 0:
        return 0.0
    return float(np.linalg.norm(H, 2))


def trace_product(G, H):
    """tr(G H) without forming the product."""
    G = np.asarray(G)
    H = np.asarray(H)
    if G.shape[1] != H.shape[0] or G.shape[0] != H.shape[1]:
        raise ValueError(f"shape mismatch {G.shape} vs {H.shape}")
    return float(np.einsum("ij,ji->", G, H))


def _bunch_kaufman(H):
    """Lower Bunch-Kaufman factorization ``P L D L^T P^T`` of a symmetric matrix.

    Returns the LAPACK factor, the 1-based pivot vector, and the list of
    diagonal pivot blocks of D (1x1 or 2x2 arrays). Raises NearSingular when a
    pivot block has an eigenvalue below ``PIVOT_FLOOR * ||H||_F``.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    ldu, ipiv, info = lapack.dsytrf(H, lower=1)
    if info < 0:
        raise ValueError(f"dsytrf: illegal argument {-info}")
    scale = frobenius_norm(H)
    floor = PIVOT_FLOOR * scale
    blocks = []
    k = 0
    while k < n:
        if ipiv[k] > 0:
            d = ldu[k:k + 1, k:k + 1].copy()
            step = 1
        else:
            a, b, c = ldu[k, k], ldu[k + 1, k], ldu[k + 1, k + 1]
            d = np.array([[a, b], [b, c]])
            step = 2
        smallest = np.min(np.abs(np.linalg.eigvalsh(d))) if step == 2 else abs(d[0, 0])
        if not smallest > floor:
            raise NearSingular(
                f"pivot {smallest:.3e} below floor {floor:.3e}", pivot=smallest, scale=scale
            )
        blocks.append(d)
        k += step
    return ldu, ipiv, blocks


def sym_solve(H, B):
    """Solve ``H X = B`` for symmetric H with the pivot floor applied."""
    ldu, ipiv, _ = _bunch_kaufman(H)
    B = np.asarray(B, dtype=float)
    rhs = B.reshape(B.shape[0], -1)
    X, info = lapack.dsytrs(ldu, ipiv, rhs, lower=1)
    if info != 0:
        raise ValueError(f"dsytrs: info={info}")
    return X.reshape(B.shape)


def sym_inverse(H):
    """Inverse of a symmetric matrix, exactly symmetrized.

    Raises NearSingular if a Bunch-Kaufman pivot falls below
    ``1e-12 * ||H||_F``; such samples have probability zero and are resampled
    by the caller.
    """
    n = np.asarray(H).shape[0]
    return symmetrize(sym_solve(H, np.eye(n)))


def inertia(H):
    """(negative, zero, positive) eigenvalue counts by Sylvester's law.

    Counts come from the signs of the Bunch-Kaufman pivot blocks; the zero
    count is always 0 because tiny pivots raise NearSingular instead.
    """
    _, _, blocks = _bunch_kaufman(H)
    neg = pos = 0
    for d in blocks:
        if d.shape[0] == 1:
            if d[0, 0] < 0:
                neg += 1
            else:
                pos += 1
        else:
            det = d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]
            if det < 0:
                neg += 1
                pos += 1
            elif d[0, 0] + d[1, 1] < 0:
                neg += 2
            else:
                pos += 2
    return neg, 0, pos


def _count_below(H, x, strict):
    """Eigenvalues < x (strict) or <= x, retrying once with a nudged shift."""
    n = H.shape[0]
    eye = np.eye(n)
    try:
        neg, _, pos = inertia(H - x * eye)
    except NearSingular:
        # well above the pivot floor, far below any eigenvalue spacing we resolve
        nudge = 1e3 * PIVOT_FLOOR * max(1.0, abs(x), frobenius_norm(H))
        # an eigenvalue sits at x: move the shift to the side that keeps it counted
        x = x - nudge if strict else x + nudge
        neg, _, pos = inertia(H - x * eye)
    return neg if strict else n - pos


def eigen_count_in_interval(H, interval):
    """Number of eigenvalues of symmetric H in the closed interval [lo, hi]."""
    H = np.asarray(H, dtype=float)
    if not isinstance(interval, Interval):
        interval = Interval(*interval)
    return _count_below(H, interval.hi, strict=False) - _count_below(H, interval.lo, strict=True)
