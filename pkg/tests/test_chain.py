import numpy as np
import pytest
from scipy import stats

from bandlab import chain, linalg
from bandlab.seeding import replica_rng


def test_dense_layout(band_factory):
    A = band_factory(3, 2)
    H = A.dense()
    assert np.array_equal(H, H.T)
    assert np.array_equal(H[0:2, 2:4], A.offdiag[0])
    assert np.all(H[0:2, 4:6] == 0)


def test_smaller_band_is_prefix_of_larger():
    small = chain.sample_band_matrix(3, 4, replica_rng(5, 2))
    big = chain.sample_band_matrix(6, 4, replica_rng(5, 2))
    assert np.array_equal(small.diag, big.diag[:3])
    assert np.array_equal(small.offdiag, big.offdiag[:2])


def test_rejects_asymmetric_diagonal():
    diag = np.zeros((2, 2, 2))
    diag[0, 0, 1] = 1.0
    with pytest.raises(ValueError):
        chain.BlockTridiagonal(diag, np.zeros((1, 2, 2)))


def test_two_block_schur_complement(band_factory):
    A = band_factory(2, 3, seed=4)
    lam = 0.3
    s1, s2 = chain.iterate_chain(A, lam)
    B = -A.offdiag[0]
    D1 = A.diag[0] - lam * np.eye(3)
    expected = A.diag[1] - lam * np.eye(3) - B.T @ np.linalg.inv(D1) @ B
    assert np.allclose(s2.Dk, expected, atol=1e-12)
    assert s2.Sk == pytest.approx(np.linalg.norm(expected, 2))
    assert np.allclose(s2.barDk * s2.Sk, s2.Dk)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("M", [1, 2, 4])
def test_corner_matches_dense_inverse(N, M):
    for r in range(10):
        A = chain.sample_band_matrix(N, M, replica_rng(11, r))
        ln, trace = chain.corner_log_norm(A, 0.1)
        direct = np.linalg.inv(A.dense() - 0.1 * np.eye(N * M))[:M, (N - 1) * M:]
        assert ln == pytest.approx(np.log(np.linalg.norm(direct, 2)), abs=1e-9)
        assert len(trace) == N


def test_corner_of_single_block_is_inverse():
    A = chain.sample_band_matrix(1, 3, replica_rng(0, 0))
    ln, _ = chain.corner_log_norm(A, 0.0)
    assert ln == pytest.approx(np.log(np.linalg.norm(np.linalg.inv(A.diag[0]), 2)))


def test_long_chain_stays_finite():
    A = chain.sample_band_matrix(400, 2, replica_rng(1, 0))
    ln, _ = chain.corner_log_norm(A, 0.0)
    assert np.isfinite(ln) and ln < 0


def test_verbose_trace_carries_states(band_factory):
    _, trace = chain.corner_log_norm(band_factory(4, 2), 0.0, verbose=True)
    assert [s.k for s in trace] == [1, 2, 3, 4]
    assert all(isinstance(s, chain.ChainState) for s in trace)
    for s in trace:
        assert linalg.operator_norm(s.scaled_product) == pytest.approx(1.0)


def test_first_scalar_at_m1_is_half_normal():
    # at M=1, D_1 = A_11 ~ N(0, 2), so S_1 = |D_1|
    s = [next(chain.iterate_chain(chain.sample_band_matrix(1, 1, replica_rng(3, r)), 0.0)).Sk
         for r in range(10000)]
    res = stats.kstest(s, stats.halfnorm(scale=np.sqrt(2)).cdf)
    assert res.statistic < 1.628 / np.sqrt(len(s))  # 1% critical value


def test_dense_oracle_refuses_large_inputs():
    A = chain.BlockTridiagonal(np.zeros((3, 700, 700)), np.zeros((2, 700, 700)))
    with pytest.raises(ValueError):
        chain.corner_direct(A, 0.0)


def test_scalar_examples():
    A = chain.BlockTridiagonal(np.array([[[2.0]], [[1.0]]]), np.array([[[-1.0]]]))
    s1 = chain.chain_init(A.diag[0], 0.5)
    assert s1.Dk[0, 0] == 1.5 and s1.Sk == 1.5
    # d' = a - lam - b^2 / d with a = 1, b = 1, d = 2
    s2 = chain.chain_step(chain.chain_init(np.array([[2.0]]), 0.0), A.diag[1], A.offdiag[0], 0.0)
    assert s2.Dk[0, 0] == pytest.approx(0.5)


def test_zero_coupling_decouples(band_factory):
    A = band_factory(2, 3)
    s1 = chain.chain_init(A.diag[0], 0.2)
    s2 = chain.chain_step(s1, A.diag[1], np.zeros((3, 3)), 0.2)
    assert np.array_equal(s2.Dk, A.diag[1] - 0.2 * np.eye(3))
    assert s2.log_norm == -np.inf


def test_state_invariants_and_determinism(band_factory):
    A = band_factory(12, 4, seed=2)
    for s in chain.iterate_chain(A, 0.3):
        assert s.Sk > 0
        assert linalg.operator_norm(s.barDk) == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(s.Sk * s.barDk, s.Dk, atol=1e-10)
    assert chain.corner_log_norm(A, 0.3)[0] == chain.corner_log_norm(A, 0.3)[0]


def test_direct_inverse_residual(band_factory):
    A = band_factory(4, 3, seed=6)
    H = A.dense() - 0.1 * np.eye(12)
    assert np.abs(H @ linalg.sym_inverse(H) - np.eye(12)).max() < 1e-9
    for r in range(100):
        A = chain.sample_band_matrix(4, 3, replica_rng(77, r))
        ln, _ = chain.corner_log_norm(A, 0.0)
        assert ln == pytest.approx(np.log(linalg.operator_norm(chain.corner_direct(A, 0.0))),
                                   abs=1e-8)
