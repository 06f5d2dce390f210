"""Monte Carlo drivers for the band-model estimates.

Every replica is a pure function of ``(config, M, N, replica index)``: its
random stream is seeded from the master seed and the replica index only, so
results are identical for any worker count. Aggregates are computed after
sorting replica rows by ``(M, N, replica)``.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache, partial

import numpy as np
from scipy.special import logsumexp

from . import chain, linalg
from .errors import ConfigError, ExclusionRateExceeded, NearSingular
from .fitting import bootstrap_slope, frequency_se, linear_fit, mean_se, variance_se
from .records import SUMMARY_REPLICA, ResultRecord
from .scalar_density import ScalarDensity, alpha_coefficients, logconcavity_check
from .seeding import STREAM_BOOTSTRAP, STREAM_FIXED_H, replica_rng, replica_seed

log = logging.getLogger(__name__)

MAX_RESAMPLES = 100
EXCLUSION_LIMIT = 1e-3
EXCLUSION_MIN_M = 4
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass
class RunResult:
    records: list
    exclusions: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)

    def all_records(self):
        return self.records + self.summary


def mid_index(N):
    """Largest even index <= N/2, and at least 2 (needs N >= 3)."""
    if N < 3:
        raise ConfigError(f"N = {N} too small: need 1 < k < N with k even", field="N_list")
    return max(2, 2 * (N // 4))


def _draw(rng, make):
    """Call ``make(rng)`` until it does not raise NearSingular."""
    flags = 0
    while True:
        try:
            return make(rng), flags
        except NearSingular as exc:
            flags += 1
            log.info("near-singular sample (%s); resampling", exc)
            if flags >= MAX_RESAMPLES:
                raise


def _run_tasks(worker, cfg, tasks, workers):
    fn = partial(worker, cfg)
    if workers <= 1 or len(tasks) <= 1:
        out = [fn(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (8 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(fn, tasks, chunksize=chunk))
    return sorted(out, key=lambda r: (r.M, r.N, r.replica))


def _tasks(cfg, N_values=None):
    N_values = cfg.N_list if N_values is None else N_values
    return [(M, N, r) for M in cfg.M_list for N in N_values for r in range(cfg.replicas)]


def _record(cfg, experiment, task, stats, flags):
    M, N, r = task
    return ResultRecord(experiment, r, replica_seed(cfg.master_seed, r), M, N, stats, flags)


def _summary(cfg, experiment, M, N, stats, flags=0):
    return ResultRecord(f"{experiment}_summary", SUMMARY_REPLICA, cfg.master_seed, M, N,
                        stats, flags)


def _groups(records):
    out = {}
    for rec in records:
        out.setdefault((rec.M, rec.N), []).append(rec)
    return out


def _column(recs, name):
    return np.array([r.stats[name] for r in recs])


def _mean_se_stats(stats, recs, name, prefix=None):
    mean, se = mean_se(_column(recs, name))
    prefix = prefix or name
    stats[f"{prefix}_mean"] = mean
    stats[f"{prefix}_se"] = se


def check_exclusions(records, kind):
    """Count flagged replicas per M; abort when the rate exceeds the limit."""
    counts = {}
    totals = {}
    for rec in records:
        totals[rec.M] = totals.get(rec.M, 0) + 1
        counts[rec.M] = counts.get(rec.M, 0) + (rec.flags > 0)
    for M, flagged in counts.items():
        rate = flagged / totals[M]
        if M >= EXCLUSION_MIN_M and flagged and rate >= EXCLUSION_LIMIT:
            raise ExclusionRateExceeded(
                f"{kind}: {flagged}/{totals[M]} replicas at M={M} hit near-singular "
                f"factorizations (limit {EXCLUSION_LIMIT:.1%})")
    return {str(M): counts[M] for M in sorted(counts)}


# -- sample ------------------------------------------------------------------

def _sample_replica(cfg, task):
    M, N, r = task
    A = chain.sample_band_matrix(N, M, replica_rng(cfg.master_seed, r))
    frob_sq = np.sum(A.diag ** 2, axis=(1, 2))
    stats = {
        "frob_sq_A11": float(frob_sq[0]),
        "frob_sq_diag_mean": float(frob_sq.mean()),
    }
    if N > 1:
        stats["frob_sq_offdiag_mean"] = float(np.sum(A.offdiag ** 2, axis=(1, 2)).mean())
    dense = A.dense()
    stats["symmetric"] = float(np.array_equal(dense, dense.T))
    return _record(cfg, "sample", task, stats, 0)


def run_sample(cfg, workers=1):
    records = _run_tasks(_sample_replica, cfg, _tasks(cfg), workers)
    summary = []
    for (M, N), recs in _groups(records).items():
        stats = {"frob_sq_expected": M + 1.0}
        _mean_se_stats(stats, recs, "frob_sq_A11")
        _mean_se_stats(stats, recs, "frob_sq_diag_mean")
        summary.append(_summary(cfg, "sample", M, N, stats))
    return RunResult(records, check_exclusions(records, "sample"), summary)


# -- random full-matrix estimates ----------------------------------------------

@lru_cache(maxsize=64)
def fixed_perturbations(M, master_seed):
    """Deterministic symmetric test matrices H for the full-matrix estimates."""
    rng = replica_rng(master_seed, STREAM_FIXED_H + M)
    goe = linalg.sample_goe_block(M, rng)
    v = rng.standard_normal(M)
    v /= np.linalg.norm(v)
    return {
        "zero": np.zeros((M, M)),
        "identity": np.eye(M),
        "goe": goe,
        "rank1": np.outer(v, v),
    }


def _lemma21_sample(cfg, M, rng):
    E = linalg.sample_gaussian_block(M, rng)
    G = (E + E.T) / np.sqrt(2.0)
    interval = linalg.Interval(*cfg.interval)
    stats = {"op_norm_E": linalg.operator_norm(E)}
    for name, H in fixed_perturbations(M, cfg.master_seed).items():
        GH = G + H
        count = linalg.eigen_count_in_interval(GH, interval)
        stats[f"wegner_ratio_{name}"] = count / (M * interval.length)
        stats[f"inv_frob_{name}"] = linalg.frobenius_norm(linalg.sym_inverse(GH))
        hf = linalg.frobenius_norm(H)
        if hf > 0:
            stats[f"dot_ratio_{name}"] = linalg.trace_product(G, H) ** 2 * M / (2.0 * hf * hf)
            stats[f"conj_frob_{name}"] = linalg.frobenius_norm(E.T @ H @ E) / hf
    return stats


def _lemma21_replica(cfg, task):
    M, N, r = task
    stats, flags = _draw(replica_rng(cfg.master_seed, r), partial(_lemma21_sample, cfg, M))
    return _record(cfg, "lemma21", task, stats, flags)


INV_FROB_TAIL_MULTIPLES = (1, 10)
OP_NORM_THRESHOLD = 3.0
CONJ_FROB_THRESHOLD = 0.1


def run_lemma21(cfg, workers=1):
    """Full-matrix estimates: eigenvalue counts, inverse norms, trace products."""
    tasks = [(M, 0, r) for M in cfg.M_list for r in range(cfg.replicas)]
    records = _run_tasks(_lemma21_replica, cfg, tasks, workers)
    summary = []
    for (M, N), recs in _groups(records).items():
        stats = {}
        for name in recs[0].stats:
            _mean_se_stats(stats, recs, name)
        for h in fixed_perturbations(M, cfg.master_seed):
            inv = _column(recs, f"inv_frob_{h}")
            for mult in INV_FROB_TAIL_MULTIPLES:
                t = mult * M
                p, se = frequency_se(inv >= t)
                stats[f"inv_frob_tail_{h}_t{mult}M"] = p * t / M
                stats[f"inv_frob_tail_{h}_t{mult}M_se"] = se * t / M
            if f"conj_frob_{h}" in recs[0].stats:
                p, se = frequency_se(_column(recs, f"conj_frob_{h}") <= CONJ_FROB_THRESHOLD)
                stats[f"conj_frob_small_{h}_freq"] = p
                stats[f"conj_frob_small_{h}_se"] = se
        p, se = frequency_se(_column(recs, "op_norm_E") >= OP_NORM_THRESHOLD)
        stats["op_norm_tail_freq"] = p
        stats["op_norm_tail_se"] = se
        summary.append(_summary(cfg, "lemma21", M, N, stats, sum(r.flags for r in recs)))
    return RunResult(records, check_exclusions(records, "lemma21"), summary)


# -- chain-size events -----------------------------------------------------------

LEMMA22_EVENTS = ("ev_frob_A", "ev_frob_P", "ev_trace_lam_P", "ev_trace_P")


def lemma22_events(stats, M, epsilon):
    """Indicator of each bracket event at a given epsilon from raw statistics."""
    lo, hi, top = M ** (0.5 - epsilon), M ** (0.5 + epsilon), M ** (1.0 + epsilon)
    return {
        "ev_frob_A": float(lo <= stats["frob_A_next"] <= hi),
        "ev_frob_P": float(lo <= stats["frob_P"] <= top),
        "ev_trace_lam_P": float(stats["trace_lam_P"] <= hi),
        "ev_trace_P": float(stats["trace_P"] <= hi),
    }


def _lemma22_sample(cfg, M, N, rng):
    A = chain.sample_band_matrix(N, M, rng)
    k = mid_index(N)
    *_, state = chain.iterate_chain(A, cfg.lam, stop=k)
    B = -A.offdiag[k - 1]
    P = linalg.symmetrize(B.T @ state.Dk_inv @ B)
    A_next = A.diag[k]
    return {
        "frob_A_next": linalg.frobenius_norm(A_next),
        "frob_P": linalg.frobenius_norm(P),
        "trace_lam_P": abs(linalg.trace_product(A_next, cfg.lam * np.eye(M) + P)),
        "trace_P": abs(linalg.trace_product(A_next, P)),
    }


def _lemma22_replica(cfg, task):
    M, N, r = task
    stats, flags = _draw(replica_rng(cfg.master_seed, r), partial(_lemma22_sample, cfg, M, N))
    stats.update(lemma22_events(stats, M, cfg.epsilon))
    return _record(cfg, "lemma22", task, stats, flags)


def run_lemma22(cfg, workers=1):
    for N in cfg.N_list:
        mid_index(N)
    records = _run_tasks(_lemma22_replica, cfg, _tasks(cfg), workers)
    summary = []
    for (M, N), recs in _groups(records).items():
        stats = {"k": float(mid_index(N))}
        for ev in LEMMA22_EVENTS:
            p, se = frequency_se(_column(recs, ev))
            stats[f"{ev}_freq"] = p
            stats[f"{ev}_se"] = se
        summary.append(_summary(cfg, "lemma22", M, N, stats, sum(r.flags for r in recs)))
    return RunResult(records, check_exclusions(records, "lemma22"), summary)


# -- conditional scalar fluctuations ------------------------------------------------

def conditional_alpha(A, states, k, lam):
    """Expansion coefficients at index k from a chain run (states[j] is index j+1)."""
    return alpha_coefficients(
        A.diag[k - 1], A.diag[k],
        -A.offdiag[k - 2], -A.offdiag[k - 1],
        states[k - 2].Dk, states[k - 1].Dk, lam,
    )


def _fluctuation_sample(cfg, M, N, rng):
    A = chain.sample_band_matrix(N, M, rng)
    k = mid_index(N)
    states = list(chain.iterate_chain(A, cfg.lam, stop=k + 1))
    alpha = conditional_alpha(A, states, k, cfg.lam)
    mom = ScalarDensity(alpha).log_moments()
    report = logconcavity_check(alpha, cfg.epsilon)
    return {
        "var_log": mom.var_log,
        "mean_log": mom.mean_log,
        "S_k": alpha.Sk,
        "right_ok": float(report.right_ok),
        "left_ok": float(report.left_ok),
        "curvature_ok": float(report.curvature_ok),
    }


def _fluctuation_replica(experiment, cfg, task):
    M, N, r = task
    stats, flags = _draw(replica_rng(cfg.master_seed, r),
                         partial(_fluctuation_sample, cfg, M, N))
    return _record(cfg, experiment, task, stats, flags)


def _fluctuation_summary(cfg, experiment, M, N, recs):
    v = _column(recs, "var_log")
    bound = M ** (-3.0 - cfg.epsilon)
    stats = {"k": float(mid_index(N)), "lower_bound": bound}
    _mean_se_stats(stats, recs, "var_log")
    for q, val in zip(QUANTILES, np.quantile(v, QUANTILES)):
        stats[f"var_log_q{int(round(q * 100)):02d}"] = float(val)
    stats["mean_above_bound"] = float(stats["var_log_mean"] >= bound)
    stats["frac_above_bound"] = float(np.mean(v >= bound))
    for name in ("right_ok", "left_ok", "curvature_ok"):
        stats[f"{name}_freq"] = float(np.mean(_column(recs, name)))
    stats["all_ok_freq"] = float(np.mean(
        _column(recs, "right_ok") * _column(recs, "left_ok") * _column(recs, "curvature_ok")))
    stats["excluded"] = float(sum(r.flags > 0 for r in recs))
    return _summary(cfg, experiment, M, N, stats, sum(r.flags for r in recs))


def run_fluctuations(cfg, workers=1):
    for N in cfg.N_list:
        mid_index(N)
    records = _run_tasks(partial(_fluctuation_replica, "fluctuations"), cfg, _tasks(cfg), workers)
    summary = [_fluctuation_summary(cfg, "fluctuations", M, N, recs)
               for (M, N), recs in _groups(records).items()]
    return RunResult(records, check_exclusions(records, "fluctuations"), summary)


def run_conjecture_scan(cfg, workers=1):
    """Log-log slope of the mean conditional variance against M, with bootstrap CI."""
    if len(set(cfg.M_list)) < 3:
        raise ConfigError("need at least 3 distinct M values", field="M_list")
    if not abs(cfg.lam) < cfg.epsilon:
        raise ConfigError(f"the scan assumes |lambda| < epsilon = {cfg.epsilon}", field="lambda")
    for N in cfg.N_list:
        mid_index(N)
    records = _run_tasks(partial(_fluctuation_replica, "conjecture_scan"), cfg, _tasks(cfg),
                         workers)
    groups = _groups(records)
    summary = [_fluctuation_summary(cfg, "conjecture_scan", M, N, recs)
               for (M, N), recs in groups.items()]
    rng = replica_rng(cfg.master_seed, STREAM_BOOTSTRAP)
    for N in cfg.N_list:
        Ms = sorted(set(cfg.M_list))
        per_M = [_column(groups[(M, N)], "var_log") for M in Ms]
        fit = linear_fit(np.log(Ms), np.log([v.mean() for v in per_M]))
        lo, hi, _ = bootstrap_slope(per_M, Ms, rng, resamples=cfg.bootstrap)
        stats = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "slope_stderr": fit.stderr,
            "slope_ci_lo": lo,
            "slope_ci_hi": hi,
            "slope_ci_width": hi - lo,
            "r2": fit.r2,
        }
        summary.append(_summary(cfg, "conjecture_scan", 0, N, stats))
    return RunResult(records, check_exclusions(records, "conjecture_scan"), summary)


# -- resolvent decay ---------------------------------------------------------------

def _decay_sample(cfg, M, N, rng):
    A = chain.sample_band_matrix(N, M, rng)
    ln, _ = chain.corner_log_norm(A, cfg.lam)
    stats = {"log_norm": ln, "log_norm_per_N": ln / N}
    if cfg.cross_check and N * M <= chain.DENSE_ORACLE_LIMIT:
        direct = np.log(linalg.operator_norm(chain.corner_direct(A, cfg.lam)))
        stats["oracle_abs_err"] = abs(ln - direct)
    return stats


def _decay_replica(cfg, task):
    M, N, r = task
    stats, flags = _draw(replica_rng(cfg.master_seed, r), partial(_decay_sample, cfg, M, N))
    return _record(cfg, "decay", task, stats, flags)


def run_decay(cfg, workers=1):
    """Corner log-norms against N and the fitted exponential decay rate per M."""
    records = _run_tasks(_decay_replica, cfg, _tasks(cfg), workers)
    groups = _groups(records)
    summary = []
    for (M, N), recs in groups.items():
        ln = _column(recs, "log_norm")
        stats = {}
        _mean_se_stats(stats, recs, "log_norm")
        stats["rate_mean"] = -stats["log_norm_mean"] / N
        # log E exp((1 - eps) log_norm), i.e. the fractional moment, kept in log space
        stats["log_frac_moment"] = float(logsumexp((1.0 - cfg.epsilon) * ln) - np.log(ln.size))
        if "oracle_abs_err" in recs[0].stats:
            stats["oracle_abs_err_max"] = float(_column(recs, "oracle_abs_err").max())
        summary.append(_summary(cfg, "decay", M, N, stats, sum(r.flags for r in recs)))
    Ns = sorted(set(cfg.N_list))
    if len(Ns) >= 2:
        for M in sorted(set(cfg.M_list)):
            means = [np.mean(_column(groups[(M, N)], "log_norm")) for N in Ns]
            fit = linear_fit(Ns, means)
            summary.append(_summary(cfg, "decay", M, 0, {
                "mu": -fit.slope,
                "mu_stderr": fit.stderr,
                "intercept": fit.intercept,
                "r2": fit.r2,
                "mu_reference": float(M) ** -3.0,
                "mu_above_reference": float(-fit.slope >= float(M) ** -3.0),
            }))
    return RunResult(records, check_exclusions(records, "decay"), summary)


# -- variance decomposition -------------------------------------------------------

def even_interior(N):
    return [k for k in range(2, N) if k % 2 == 0]


def _decomposition_sample(cfg, M, N, rng):
    A = chain.sample_band_matrix(N, M, rng)
    states = list(chain.iterate_chain(A, cfg.lam))
    stats = {"log_norm": states[-1].log_norm}
    total = 0.0
    for k in even_interior(N):
        v = ScalarDensity(conditional_alpha(A, states, k, cfg.lam)).log_moments().var_log
        stats[f"var_log_k{k}"] = v
        total += v
    stats["var_log_sum"] = total
    return stats


def _decomposition_replica(cfg, task):
    M, N, r = task
    stats, flags = _draw(replica_rng(cfg.master_seed, r),
                         partial(_decomposition_sample, cfg, M, N))
    return _record(cfg, "decomposition", task, stats, flags)


def run_decomposition(cfg, workers=1):
    """Variance of the corner log-norm against the summed conditional variances."""
    for N in cfg.N_list:
        if not even_interior(N):
            raise ConfigError(f"N = {N} has no even 1 < k < N", field="N_list")
    if cfg.replicas < 2:
        raise ConfigError("need at least 2 replicas for a variance", field="replicas")
    records = _run_tasks(_decomposition_replica, cfg, _tasks(cfg), workers)
    summary = []
    for (M, N), recs in _groups(records).items():
        lhs, lhs_se = variance_se(_column(recs, "log_norm"))
        rhs, rhs_se = mean_se(_column(recs, "var_log_sum"))
        combined = math.hypot(lhs_se, rhs_se)
        summary.append(_summary(cfg, "decomposition", M, N, {
            "lhs": lhs,
            "lhs_se": lhs_se,
            "rhs": rhs,
            "rhs_se": rhs_se,
            "combined_se": combined,
            "holds": float(lhs >= rhs - 3.0 * combined),
            "rhs_per_N": rhs / N,
            "terms": float(len(even_interior(N))),
        }, sum(r.flags for r in recs)))
    return RunResult(records, check_exclusions(records, "decomposition"), summary)


def run_selftest(cfg, workers=1):
    from .selftest import run_checks

    records = run_checks(cfg)
    return RunResult(records, {}, [])


RUNNERS = {
    "sample": run_sample,
    "lemma21": run_lemma21,
    "lemma22": run_lemma22,
    "fluctuations": run_fluctuations,
    "conjecture_scan": run_conjecture_scan,
    "decay": run_decay,
    "decomposition": run_decomposition,
    "selftest": run_selftest,
}


def run_experiment(cfg, workers=1):
    return RUNNERS[cfg.kind](cfg, workers=workers)
