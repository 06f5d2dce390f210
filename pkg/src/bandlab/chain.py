"""Block tridiagonal band model and its Schur-complement transfer chain.

For ``A - lam`` with diagonal blocks ``A_kk`` and upper blocks ``A_{k,k+1}``,
Gaussian elimination gives

    D_1     = A_11 - lam
    B_k     = -A_{k,k+1}
    D_{k+1} = A_{k+1,k+1} - lam - B_k^T D_k^{-1} B_k

and the corner block of the resolvent is the product
``D_1^{-1} B_1 D_2^{-1} B_2 ... B_{N-1} D_N^{-1}``. The product decays
exponentially in N, so it is carried with unit operator norm and its
logarithmic scale is accumulated separately.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg

DENSE_ORACLE_LIMIT = 2048


@dataclass
class BlockTridiagonal:
    diag: np.ndarray     # (N, M, M), each exactly symmetric
    offdiag: np.ndarray  # (N - 1, M, M), the upper blocks A_{k,k+1}

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        self.offdiag = np.asarray(self.offdiag, dtype=float).reshape(-1, *self.diag.shape[1:])
        if self.diag.ndim != 3 or self.diag.shape[1] != self.diag.shape[2]:
            raise ValueError("diag must have shape (N, M, M)")
        if self.offdiag.shape[0] != self.diag.shape[0] - 1:
            raise ValueError("need exactly N - 1 off-diagonal blocks")
        if not np.array_equal(self.diag, np.swapaxes(self.diag, 1, 2)):
            raise ValueError("diagonal blocks must be exactly symmetric")

    @property
    def N(self):
        return self.diag.shape[0]

    @property
    def M(self):
        return self.diag.shape[1]

    def dense(self):
        """The flattened NM x NM symmetric matrix."""
        N, M = self.N, self.M
        out = np.zeros((N * M, N * M))
        for k in range(N):
            out[k * M:(k + 1) * M, k * M:(k + 1) * M] = self.diag[k]
        for k in range(N - 1):
            blk = self.offdiag[k]
            out[k * M:(k + 1) * M, (k + 1) * M:(k + 2) * M] = blk
            out[(k + 1) * M:(k + 2) * M, k * M:(k + 1) * M] = blk.T
        return out


def sample_band_matrix(N, M, rng):
    """Sample the Gaussian block tridiagonal model.

    Blocks are drawn in the order ``A_11, A_12, A_22, A_23, ...`` so a matrix
    with N blocks is a prefix of one with more blocks from the same stream.
    """
    if N < 1 or M < 1:
        raise ValueError("N and M must be >= 1")
    diag = np.empty((N, M, M))
    offdiag = np.empty((N - 1, M, M))
    for k in range(N):
        diag[k] = linalg.sample_goe_block(M, rng)
        if k < N - 1:
            offdiag[k] = linalg.sample_gaussian_block(M, rng)
    return BlockTridiagonal(diag, offdiag)


@dataclass
class ChainState:
    """Chain variables at index ``k`` (1-based).

    ``scaled_product`` is ``D_1^{-1} B_1 ... D_k^{-1}`` divided by its
    operator norm; ``log_norm`` is the log of that norm.
    """
    k: int
    Dk: np.ndarray
    Sk: float
    barDk: np.ndarray
    Dk_inv: np.ndarray
    scaled_product: np.ndarray
    log_norm: float
    Bprev: Optional[np.ndarray] = field(default=None, repr=False)


def _state(k, Dk, product, log_norm, Bprev=None):
    Dk_inv = linalg.sym_inverse(Dk)
    Sk = linalg.operator_norm(Dk)
    product = product @ Dk_inv if product is not None else Dk_inv
    scale = linalg.operator_norm(product)
    if scale > 0:
        product = product / scale
        log_norm = log_norm + float(np.log(scale))
    else:
        # an exactly zero coupling block: the corner vanishes identically
        log_norm = -np.inf
    return ChainState(
        k=k,
        Dk=Dk,
        Sk=Sk,
        barDk=Dk / Sk,
        Dk_inv=Dk_inv,
        scaled_product=product,
        log_norm=log_norm,
        Bprev=Bprev,
    )


def chain_init(A11, lam):
    M = A11.shape[0]
    return _state(1, A11 - lam * np.eye(M), None, 0.0)


def chain_step(state, A_next, A_off, lam):
    """Advance from index k to k + 1 given ``A_{k+1,k+1}`` and ``A_{k,k+1}``."""
    M = A_next.shape[0]
    B = -A_off
    P = linalg.symmetrize(B.T @ state.Dk_inv @ B)
    D_next = A_next - lam * np.eye(M) - P
    return _state(state.k + 1, D_next, state.scaled_product @ B, state.log_norm, Bprev=B)


def iterate_chain(A, lam, stop=None):
    """Yield chain states for k = 1, ..., stop (default N)."""
    stop = A.N if stop is None else stop
    state = chain_init(A.diag[0], lam)
    yield state
    for k in range(1, stop):
        state = chain_step(state, A.diag[k], A.offdiag[k - 1], lam)
        yield state


@dataclass(frozen=True)
class StepSummary:
    k: int
    Sk: float
    log_norm: float


def corner_log_norm(A, lam, verbose=False):
    """log of the operator norm of the (1, N) block of (A - lam)^{-1}.

    Returns ``(log_norm, trace)`` where ``trace`` holds one StepSummary per
    index, or the full ChainState objects when ``verbose`` is set.
    """
    trace = []
    state = None
    for state in iterate_chain(A, lam):
        trace.append(state if verbose else StepSummary(state.k, state.Sk, state.log_norm))
    return state.log_norm, trace


def corner_direct(A, lam):
    """The (1, N) block of (A - lam)^{-1} by dense inversion (small N M only)."""
    N, M = A.N, A.M
    if N * M > DENSE_ORACLE_LIMIT:
        raise ValueError(f"N*M = {N * M} exceeds the dense oracle limit {DENSE_ORACLE_LIMIT}")
    H = A.dense() - lam * np.eye(N * M)
    inv = linalg.sym_inverse(H)
    return inv[:M, (N - 1) * M:]
