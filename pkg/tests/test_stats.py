import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from ewens_pitman import exactmath as em
from ewens_pitman import stats
from ewens_pitman.params import ModelParams
from ewens_pitman.stats import ExperimentConfig, ExperimentError, ks_statistic, moment_estimate, run_experiment

P55 = ModelParams(0.5, 0.5)


@given(st.floats(min_value=-12, max_value=12))
def test_normal_cdf_accuracy(x):
    assert abs(stats.normal_cdf(x) - special.ndtr(x)) <= 1e-12


@pytest.mark.parametrize("lam", [0.2, 0.5, 0.9, 1.0, 1.3, 2.5])
def test_kolmogorov_sf_matches_scipy(lam):
    assert stats.kolmogorov_sf(lam) == pytest.approx(special.kolmogorov(lam), abs=1e-12)


@pytest.mark.parametrize("m", [8, 50, 2000])
def test_ks_perfect_grid(m):
    x = sps.norm.ppf((np.arange(1, m + 1) - 0.5) / m)
    D, _ = ks_statistic(x)
    assert D == pytest.approx(0.5 / m, rel=1e-9)


def test_ks_all_zeros_and_minimum_size():
    D, p = ks_statistic(np.zeros(20))
    assert D == pytest.approx(0.5)
    assert p < 1e-3
    with pytest.raises(ValueError):
        ks_statistic(np.zeros(7))


def test_ks_matches_scipy_distance():
    x = np.random.default_rng(3).standard_normal(500) * 1.1
    ours = ks_statistic(x)
    ref = sps.kstest(x, "norm")
    assert ours.D == pytest.approx(ref.statistic, rel=1e-10)
    assert ours.m == 500


def test_ks_self_test_uniform_under_null():
    rng = np.random.default_rng(20240101)
    ok = sum(ks_statistic(rng.standard_normal(2000)).p > 0.001 for _ in range(100))
    assert ok >= 99


def test_moment_estimate_examples():
    assert moment_estimate([2, 2, 2], 1) == (2.0, 0.0)
    assert moment_estimate([1, 3], 1) == pytest.approx((2.0, 1.0))
    assert moment_estimate([1, 2], 2) == pytest.approx((2.5, 1.5))
    with pytest.raises(ValueError):
        moment_estimate([1.0])


# ---------------------------------------------------------------- experiments


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(P55, 10, (100,), kind="bogus")
    with pytest.raises(ValueError):
        ExperimentConfig(P55, 0, (100,))
    with pytest.raises(ValueError):
        ExperimentConfig(P55, 10, (100, 50))


def test_moments_experiment_and_reference_integrity():
    cfg = ExperimentConfig(P55, 2000, (50, 1000), "moments", (1, 2), seed=5)
    res = run_experiment(cfg)
    assert res.passed
    assert len(res.rows) == 2 * (2 + 2 * 2)
    for row in res.rows:
        assert row.stderr > 0
        if row.reference_fn == "raw_moment_Kn":
            q = int(row.quantity.split("^")[1].rstrip("]"))
            assert row.reference == em.raw_moment_Kn(P55, row.n, q)
        else:
            r = int(row.quantity.split("_")[1].split(",")[0])
            q = int(row.quantity.split("^")[1].rstrip("]"))
            assert row.reference == em.raw_moment_Krn(P55, row.n, r, q)


def test_experiment_deterministic_across_workers():
    cfg = ExperimentConfig(P55, 200, (300,), "clt_krn", (1, 2), seed=9)
    a = run_experiment(cfg, workers=1).to_json()
    b = run_experiment(cfg, workers=4).to_json()
    assert json.dumps(a, sort_keys=True, default=float) == json.dumps(b, sort_keys=True, default=float)
    cfg = ExperimentConfig(P55, 100, (1000,), "cross_moments", (1,), seed=9, horizon=10**5)
    a = run_experiment(cfg, workers=1).to_json()
    b = run_experiment(cfg, workers=3).to_json()
    assert a["rows"] == b["rows"]


def test_small_experiments_of_every_kind():
    base = dict(params=P55, seed=2)
    res = run_experiment(ExperimentConfig(trials=500, checkpoints=(2000,), kind="clt_kn", horizon=10**6, **base))
    assert {r.quantity for r in res.rows} == {"KS clt_Kn_self_norm", "Var clt_Kn_mixed"}
    res = run_experiment(ExperimentConfig(trials=20, checkpoints=(10**4,), kind="lil", horizon=10**5, **base))
    assert 0.0 <= res.rows[0].estimate <= 1.0
    assert len(res.meta["lil_final_max_over_shat"]) == 20
    res = run_experiment(ExperimentConfig(trials=500, checkpoints=(10**5,), kind="shat_moments", **base))
    assert res.row("E[S_hat^1]").reference == em.limit_moment_S(P55, 1)
    res = run_experiment(ExperimentConfig(trials=100, checkpoints=(10**4,), kind="alpha_estimator", **base))
    assert abs(res.rows[0].estimate - 0.5) < 0.1


def test_alpha_zero_moments_have_no_reference():
    cfg = ExperimentConfig(ModelParams(0.0, 1.0), 100, (100,), "moments", seed=1)
    res = run_experiment(cfg)
    assert all(math.isnan(r.reference) and r.passed is None for r in res.rows)


def test_result_outputs():
    cfg = ExperimentConfig(P55, 50, (100,), "moments", seed=77)
    res = run_experiment(cfg)
    buf = io.StringIO()
    res.write_json(buf)
    doc = json.loads(buf.getvalue())
    assert doc["seed"] == 77 and doc["config"]["params"] == {"alpha": 0.5, "theta": 0.5}
    assert doc["version"].startswith("0.1.0")
    assert "tolerances" in doc["meta"]
    buf = io.StringIO()
    res.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# ewens_pitman") and "seed=77" in lines[0]
    assert lines[1].startswith("quantity,n,estimate")
    assert len(lines) == 2 + len(res.rows)


def test_failed_trajectory_reports_seed_and_index():
    K = np.array([[3], [0], [2]])
    with pytest.raises(ExperimentError) as info:
        stats._check_states(K, seed=11, start=40)
    assert info.value.seed == 11 and info.value.index == 41
    assert "seed=11" in str(info.value)
