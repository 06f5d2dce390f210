import numpy as np
import pytest

from bandlab.config import config_from_dict
from bandlab.errors import ConfigError, ExclusionRateExceeded
from bandlab.experiments import (
    check_exclusions,
    lemma22_events,
    mid_index,
    run_experiment,
)
from bandlab.records import SUMMARY_REPLICA, ResultRecord, render_csv


def cfg(kind, **kw):
    data = {"M_list": [2, 4], "N_list": [4], "replicas": 6, "master_seed": 3, "bootstrap": 20}
    data.update(kw)
    return config_from_dict(data, kind=kind)


def summary(result, **match):
    return [r for r in result.summary if all(getattr(r, k) == v for k, v in match.items())]


def test_mid_index():
    assert [mid_index(N) for N in (3, 4, 8, 9, 16)] == [2, 2, 4, 4, 8]
    with pytest.raises(ConfigError):
        mid_index(2)


@pytest.mark.parametrize("kind", ["sample", "decay", "fluctuations", "lemma21", "lemma22",
                                  "decomposition", "conjecture_scan"])
def test_worker_count_does_not_change_output(kind):
    c = cfg(kind, M_list=[2, 3, 4])
    one = run_experiment(c, workers=1).all_records()
    two = run_experiment(c, workers=2).all_records()
    assert render_csv(one) == render_csv(two)


def test_replica_rows_sorted_and_seeded():
    res = run_experiment(cfg("decay", N_list=[3, 5]))
    keys = [(r.M, r.N, r.replica) for r in res.records]
    assert keys == sorted(keys)
    assert all(r.replica == SUMMARY_REPLICA for r in res.summary)
    # replica streams depend on the index only
    by_index = {}
    for r in res.records:
        by_index.setdefault(r.replica, set()).add(r.seed)
    assert all(len(s) == 1 for s in by_index.values())


def test_decay_fit_rows():
    res = run_experiment(cfg("decay", N_list=[4, 8, 16], replicas=20, cross_check=True))
    fits = summary(res, N=0)
    assert [r.M for r in fits] == [2, 4]
    for r in fits:
        assert r.stats["mu"] > 0
    for r in summary(res, N=8):
        assert r.stats["oracle_abs_err_max"] < 1e-9


def test_sample_frobenius_mean():
    res = run_experiment(cfg("sample", M_list=[8], replicas=3000, N_list=[1]))
    s = summary(res)[0].stats
    assert abs(s["frob_sq_A11_mean"] - 9.0) < 4 * s["frob_sq_A11_se"]


def test_lemma21_dot_ratio_and_wegner():
    res = run_experiment(cfg("lemma21", M_list=[8], replicas=2000))
    s = summary(res)[0].stats
    for h in ("identity", "goe", "rank1"):
        assert abs(s[f"dot_ratio_{h}_mean"] - 1.0) < 4 * s[f"dot_ratio_{h}_se"]
    assert "dot_ratio_zero_mean" not in s


def test_wegner_ratio_near_semicircle_value():
    res = run_experiment(cfg("lemma21", M_list=[64], replicas=200))
    s = summary(res)[0].stats
    assert s["wegner_ratio_zero_mean"] == pytest.approx(1 / np.pi, rel=0.1)


def test_conjugated_norm_rarely_small():
    res = run_experiment(cfg("lemma21", M_list=[32], replicas=300))
    assert summary(res)[0].stats["conj_frob_small_identity_freq"] < 0.01


def test_lemma22_events_monotone_in_epsilon():
    res = run_experiment(cfg("lemma22", M_list=[64], N_list=[4], replicas=100))
    assert summary(res)[0].stats["ev_frob_A_freq"] >= 0.99
    for rec in res.records:
        small = lemma22_events(rec.stats, 64, 0.1)
        large = lemma22_events(rec.stats, 64, 0.4)
        assert all(large[k] >= small[k] for k in small)


def test_fluctuation_variance_decreases_with_block_size():
    res = run_experiment(cfg("fluctuations", M_list=[2, 8], N_list=[4], replicas=200))
    v = {r.M: r.stats["var_log_mean"] for r in res.summary}
    assert all(rec.stats["var_log"] > 0 for rec in res.records)
    assert v[8] < v[2]


def test_conjecture_scan_requires_three_sizes():
    with pytest.raises(ConfigError):
        run_experiment(cfg("conjecture_scan", M_list=[2, 4]))
    with pytest.raises(ConfigError):
        run_experiment(cfg("conjecture_scan", M_list=[2, 4, 8], **{"lambda": 0.5}))


def test_conjecture_scan_fit_row():
    res = run_experiment(cfg("conjecture_scan", M_list=[2, 4, 8], replicas=40))
    fit = summary(res, M=0)[0].stats
    assert fit["slope_ci_lo"] <= fit["slope"] <= fit["slope_ci_hi"]
    assert fit["slope"] < 0


def test_decomposition_summary():
    res = run_experiment(cfg("decomposition", M_list=[2], N_list=[4, 6], replicas=100))
    for r in res.summary:
        assert r.stats["terms"] == len([k for k in range(2, r.N) if k % 2 == 0])
        assert r.stats["holds"] == 1.0
    with pytest.raises(ConfigError):
        run_experiment(cfg("decomposition", N_list=[2]))


def test_exclusion_limit():
    ok = [ResultRecord("x", i, 0, 4, 4, {}, flags=0) for i in range(2000)]
    assert check_exclusions(ok + [ResultRecord("x", 9, 0, 2, 4, {}, flags=3)], "x") == {
        "2": 1, "4": 0}
    ok[0].flags = 1
    assert check_exclusions(ok, "x") == {"4": 1}
    ok[1].flags = 1
    with pytest.raises(ExclusionRateExceeded):
        check_exclusions(ok, "x")


def test_selftest_passes():
    from bandlab.selftest import failed

    res = run_experiment(cfg("selftest", M_list=[1, 2], N_list=[2, 3]))
    assert failed(res.records) == []


def test_standard_errors_shrink_on_doubling():
    se = [summary(run_experiment(cfg("decay", M_list=[2], N_list=[6], replicas=n)))[0]
          .stats["log_norm_se"] for n in (400, 800)]
    assert 0.55 < se[1] / se[0] < 0.9


def test_decomposition_rhs_per_block_roughly_stable():
    res = run_experiment(cfg("decomposition", M_list=[2], N_list=[6, 12], replicas=150))
    per = [r.stats["rhs_per_N"] for r in res.summary]
    assert all(r.stats["rhs"] >= 0 for r in res.summary)
    assert 0.5 < per[1] / per[0] < 2.0
