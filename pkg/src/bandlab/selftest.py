"""Oracle and analytic consistency checks run by ``bandlab selftest``."""
import math

import numpy as np

from . import chain
from .experiments import conditional_alpha
from .records import ResultRecord
from .scalar_density import (
    AlphaCoefficients,
    ScalarDensity,
    norm_direction_selftest,
    phi,
    phi_direct,
    phi_double_prime,
    phi_prime,
)
from .seeding import replica_rng
from .special import trigamma


def _trigamma_checks():
    # closed forms at integers and half-integers
    yield "trigamma_1", trigamma(1.0), math.pi ** 2 / 6, 1e-12
    yield "trigamma_half", trigamma(0.5), math.pi ** 2 / 2, 1e-12
    yield "trigamma_5", trigamma(5.0), math.pi ** 2 / 6 - sum(1 / j ** 2 for j in range(1, 5)), 1e-12
    yield ("trigamma_5_5", trigamma(5.5),
           math.pi ** 2 / 2 - 4 * sum(1 / (2 * j - 1) ** 2 for j in range(1, 6)), 1e-12)


def _density_checks():
    for n in (1, 2, 5):
        rep = norm_direction_selftest(n)
        yield f"chi_log_variance_n{n}", rep["var_log"], rep["expected"], 1e-6
        yield f"chi_mass_n{n}", rep["mass"], 1.0, 1e-9
    alpha = AlphaCoefficients.for_block_size(4, 2.5, 0, 0, 0, 0, 0)
    yield ("generalized_gamma_a7_9", ScalarDensity(alpha).log_moments().var_log,
           0.25 * trigamma(5.0), 1e-6)


def _chain_states(cfg, count, M=4, N=6):
    """Random chain configurations (A, states, k) at the middle even index."""
    k = 2 * (N // 4)
    for i in range(count):
        rng = replica_rng(cfg.master_seed, i)
        while True:
            try:
                A = chain.sample_band_matrix(N, M, rng)
                states = list(chain.iterate_chain(A, cfg.lam, stop=k + 1))
                break
            except ArithmeticError:
                continue
        yield A, states, k


def _expansion_checks(cfg):
    worst_phi = worst_d1 = worst_d2 = 0.0
    for i, (A, states, k) in enumerate(_chain_states(cfg, 20)):
        alpha = conditional_alpha(A, states, k, cfg.lam)
        rng = replica_rng(cfg.master_seed, 10_000 + i)
        for s in np.exp(rng.uniform(-1.0, 1.0, 5)):
            direct = phi_direct(s, states[k - 1].Dk, states[k].Dk, -A.offdiag[k - 2],
                                -A.offdiag[k - 1], states[k - 2].Dk, cfg.lam)
            val = phi(s, alpha)
            worst_phi = max(worst_phi, abs(val - direct) / (1.0 + abs(direct)))
            h = 1e-6 * s
            fd1 = (phi(s + h, alpha) - phi(s - h, alpha)) / (2 * h)
            d1 = phi_prime(s, alpha)
            worst_d1 = max(worst_d1, abs(fd1 - d1) / max(abs(d1), 1.0))
            fd2 = (phi_prime(s + h, alpha) - phi_prime(s - h, alpha)) / (2 * h)
            d2 = phi_double_prime(s, alpha)
            worst_d2 = max(worst_d2, abs(fd2 - d2) / max(abs(d2), 1.0))
    yield "phi_expansion_vs_direct", worst_phi, 0.0, 1e-8
    yield "phi_prime_vs_fd", worst_d1, 0.0, 1e-5
    yield "phi_double_prime_vs_fd", worst_d2, 0.0, 1e-5


def _corner_checks(cfg):
    for M in cfg.M_list:
        for N in cfg.N_list:
            if N * M > chain.DENSE_ORACLE_LIMIT:
                continue
            worst = 0.0
            for r in range(cfg.replicas):
                A = chain.sample_band_matrix(N, M, replica_rng(cfg.master_seed, r))
                try:
                    ln, _ = chain.corner_log_norm(A, cfg.lam)
                    direct = np.log(np.linalg.norm(chain.corner_direct(A, cfg.lam), 2))
                except ArithmeticError:
                    continue
                worst = max(worst, abs(ln - direct))
            yield f"corner_oracle_M{M}_N{N}", worst, 0.0, 1e-8, M, N


def run_checks(cfg):
    checks = []
    for item in _trigamma_checks():
        checks.append(item + (0, 0))
    for item in _density_checks():
        checks.append(item + (0, 0))
    for item in _expansion_checks(cfg):
        checks.append(item + (4, 6))
    checks.extend(_corner_checks(cfg))
    records = []
    for i, (name, value, expected, tol, M, N) in enumerate(checks):
        err = abs(value - expected)
        records.append(ResultRecord("selftest", i, cfg.master_seed, M, N, {
            f"{name}.value": float(value),
            f"{name}.abs_err": float(err),
            f"{name}.tolerance": float(tol),
            f"{name}.passed": float(err <= tol),
        }))
    return records


def failed(records):
    return [name.rsplit(".", 1)[0] for r in records for name, v in r.stats.items()
            if name.endswith(".passed") and v != 1.0]
