import math
import warnings
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ewens_pitman import exactmath as em
from ewens_pitman.params import ModelParams, ParameterError

from .conftest import GRID, model_params

P55 = ModelParams(0.5, 0.5)
P50 = ModelParams(0.5, 0.0)


def test_stirling2():
    assert em.stirling2(5, 5) == 1
    assert em.stirling2(3, 2) == 3
    assert em.stirling2(4, 2) == 7
    with pytest.raises(ValueError):
        em.stirling2(2, 3)


@pytest.mark.parametrize("p", range(1, 9))
def test_stirling2_matches_alternating_sum(p):
    for k in range(0, p + 1):
        alt = sum((-1) ** (k - j) * math.comb(k, j) * j**p for j in range(k + 1)) // math.factorial(k)
        assert em.stirling2(p, k) == alt


def test_p_alpha():
    assert em.p_alpha(0.5, 1) == pytest.approx(0.5)
    assert em.p_alpha(0.5, 2) == pytest.approx(0.5 * 0.5 / 2)
    assert em.p_alpha(0.3, 3) == pytest.approx(0.3 * 0.7 * 1.7 / 6)


# ---------------------------------------------------------------- gfc


def test_gfc_table_examples():
    t = em.gfc_table(3, P50)
    assert t(1, 1) == pytest.approx(0.5, rel=1e-15)
    assert t(2, 1) == pytest.approx(0.25, rel=1e-15)
    assert t(2, 2) == pytest.approx(0.25, rel=1e-15)
    assert t(3, 2) == pytest.approx(0.375, rel=1e-15)
    with pytest.raises(ValueError):
        em.gfc_table(0, P50)


def test_gfc_oracle_examples():
    assert em.gfc_oracle(2, 2, Fraction(1, 2)) == Fraction(1, 4)
    assert em.gfc_oracle(3, 1, Fraction(1, 2)) == Fraction(3, 8)
    assert em.gfc_oracle(3, 3, Fraction(1, 2)) == Fraction(1, 8)
    with pytest.raises(ValueError):
        em.gfc_oracle(26, 1, Fraction(1, 2))


def test_gfc_matches_rational_oracle():
    worst, where = em.gfc_oracle_check()
    assert worst <= 1e-12, where


def test_gfc_table_positive_and_bounded():
    t = em.gfc_table(200, ModelParams(0.8, 0.0))
    for n in (1, 50, 200):
        assert np.all(np.isfinite(t.log_values[n, 1 : n + 1]))


@pytest.mark.parametrize("params", GRID, ids=str)
def test_row_sum_identity(params):
    n = 150
    t = em.gfc_table(n, params)
    a, th = params.alpha, params.theta
    if th == 0.0:
        # θ → 0 limit of the identity divided by θ
        total = math.fsum(math.exp(math.lgamma(k) + t.log(n, k) - math.log(a) - math.lgamma(n)) for k in range(1, n + 1))
        assert total == pytest.approx(1.0, rel=1e-10)
        return
    terms = [em.rising_factorial(th / a, k) * em.SignedLogValue(1, t.log(n, k)) for k in range(1, n + 1)]
    total, _ = em.signed_sum(terms)
    target = em.rising_factorial(th, n)
    assert total.sign == target.sign
    assert total.log_abs == pytest.approx(target.log_abs, abs=1e-10)


# ---------------------------------------------------------------- b sequences


def test_b_seq_examples():
    assert float(em.b_seq("block", P55, 2)) == pytest.approx(0.75)
    assert float(em.b_seq("size_r", P55, 2, r=1)) == pytest.approx(1.5)
    assert float(em.b_seq("block_p", P50, 2, p=2)) == pytest.approx(2.0)
    for kind, kw in (("block", {}), ("block_p", {"p": 3}), ("size_r", {"r": 2})):
        assert float(em.b_seq(kind, P55, 1, **kw)) == 1.0


@given(model_params(), st.integers(min_value=2, max_value=400))
def test_b_block_matches_product(params, n):
    a, t = params.alpha, params.theta
    prod = math.prod((k + t) / (k + a + t) for k in range(1, n))
    assert float(em.b_seq("block", params, n)) == pytest.approx(prod, rel=1e-11)
    prod_p = math.prod((k + 2 * a + t) / (k + t) for k in range(1, n))
    assert float(em.b_seq("block_p", params, n, p=2)) == pytest.approx(prod_p, rel=1e-11)


@given(model_params(), st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=300))
def test_b_size_ratio_is_beta(params, r, m):
    # consecutive ratio b_{r,n}/b_{r,n+1} = (n-r+α+θ)/(n+θ) for n >= r
    n = r + m
    ratio = float(em.b_seq("size_r", params, n, r=r) / em.b_seq("size_r", params, n + 1, r=r))
    assert ratio == pytest.approx((n - r + params.alpha + params.theta) / (n + params.theta), rel=1e-11)


# ---------------------------------------------------------------- moments of K_n


def test_mean_examples():
    assert em.mean_Kn_exact(P55, 1) == pytest.approx(1.0, rel=1e-15)
    assert em.mean_Kn_exact(P50, 3) == pytest.approx(1.875, rel=1e-14)
    assert em.mean_Kn_exact(P55, 2) == pytest.approx(5 / 3, rel=1e-14)


def test_falling_moment_examples():
    assert em.falling_moment_Kn(P50, 3, 2) == pytest.approx(2.25, rel=1e-13)
    assert em.falling_moment_Kn(P55, 1, 2) == 0.0
    assert em.falling_moment_Kn(P55, 2, 1) == pytest.approx(5 / 3, rel=1e-14)


def test_raw_moment_examples():
    assert em.raw_moment_Kn(P50, 3, 2) == pytest.approx(4.125, rel=1e-13)
    for p in (1, 2, 3, 5):
        assert em.raw_moment_Kn(P55, 1, p) == pytest.approx(1.0, rel=1e-13)
    assert em.raw_moment_Kn(P50, 2, 1) == pytest.approx(1.5, rel=1e-14)


@pytest.mark.parametrize("params", GRID, ids=str)
def test_moments_match_exact_law(params):
    for n in (1, 7, 60, 200):
        dist = em.dp_dist_oracle(params, n)
        assert em.raw_moment_Kn(params, n, 1) == em.mean_Kn_exact(params, n)
        for p in (1, 2, 3):
            assert em.raw_moment_Kn(params, n, p) == pytest.approx(dist.moment(p), rel=1e-9)


@pytest.mark.parametrize("params", GRID, ids=str)
def test_sum_of_sizes_is_n(params):
    for n in (1, 2, 10, 50):
        total = math.fsum(r * em.falling_moment_Krn(params, n, r, 1) for r in range(1, n + 1))
        assert total == pytest.approx(n, rel=1e-9)
        blocks = math.fsum(em.falling_moment_Krn(params, n, r, 1) for r in range(1, n + 1))
        assert blocks == pytest.approx(em.mean_Kn_exact(params, n), rel=1e-9)


def test_Krn_examples():
    assert em.falling_moment_Krn(P55, 2, 1, 1) == pytest.approx(4 / 3, rel=1e-14)
    assert em.falling_moment_Krn(P55, 1, 1, 1) == pytest.approx(1.0, rel=1e-14)
    assert em.falling_moment_Krn(P50, 3, 2, 2) == 0.0
    assert em.raw_moment_Krn(P55, 2, 1, 2) == pytest.approx(8 / 3, rel=1e-14)
    assert em.raw_moment_Krn(P55, 1, 1, 3) == pytest.approx(1.0, rel=1e-14)
    assert em.raw_moment_Krn(P55, 2, 2, 1) == pytest.approx(1 / 3, rel=1e-14)


@pytest.mark.parametrize("params", GRID + [ModelParams(0.0, 1.0), ModelParams(0.4, 2.5)], ids=str)
def test_moments_match_joint_enumeration(params):
    for n in range(1, em.ENUMERATION_MAX_N + 1):
        table = em.enumerate_joint_oracle(params, n)
        assert math.fsum(table.values()) == pytest.approx(1.0, abs=1e-12)
        marginal = np.zeros(n)
        for counts, prob in table.items():
            marginal[sum(counts) - 1] += prob
        np.testing.assert_allclose(marginal, em.dp_dist_oracle(params, n).probabilities, atol=1e-12)
        if params.alpha == 0.0:
            continue
        for p in (1, 2, 3):
            ref = em.joint_moment(table, lambda c: sum(c) ** p)
            assert em.raw_moment_Kn(params, n, p) == pytest.approx(ref, rel=1e-10, abs=1e-12)
            for r in range(1, n + 1):
                ref = em.joint_moment(table, lambda c: c[r - 1] ** p)
                assert em.raw_moment_Krn(params, n, r, p) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_joint_oracle_examples():
    t = em.enumerate_joint_oracle(P55, 2)
    assert t[(2, 0)] == pytest.approx(2 / 3, rel=1e-14)
    assert t[(0, 1)] == pytest.approx(1 / 3, rel=1e-14)
    assert em.enumerate_joint_oracle(P55, 1) == {(1,): pytest.approx(1.0)}
    assert em.enumerate_joint_oracle(P50, 3)[(3, 0, 0)] == pytest.approx(0.25, rel=1e-14)
    with pytest.raises(ValueError):
        em.enumerate_joint_oracle(P55, 9)


def test_negative_theta_moments_positive():
    params = ModelParams(0.3, -0.1)
    for n in (2, 10, 1000, 10**6):
        for p in (1, 2, 3, 4):
            assert (em.falling_moment_Kn(params, n, p) > 0.0) == (p <= n)


def test_cancellation_flagged():
    # tiny alpha makes the alternating sum cancel almost completely
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        em.falling_moment_Kn(ModelParams(1e-6, 1.0), 30, 4)
    assert any(issubclass(w.category, em.PrecisionWarning) for w in caught)


# ---------------------------------------------------------------- limits


def _limit_moment_mpmath(a, t, p):
    a, t = mpmath.mpf(a), mpmath.mpf(t)
    if t == 0:
        return mpmath.gamma(p) / (a * mpmath.gamma(a * p))
    return mpmath.gamma(t + 1) / (t * mpmath.gamma(a * p + t)) * mpmath.rf(t / a, p)


def test_limit_moment_examples():
    assert em.limit_moment_S(P50, 2) == pytest.approx(2.0, rel=1e-14)
    assert em.limit_moment_S(P50, 1) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-14)
    assert em.limit_moment_S(P55, 1) == pytest.approx(math.sqrt(math.pi), rel=1e-14)


@given(model_params(), st.integers(min_value=1, max_value=6))
def test_limit_moment_matches_mpmath(params, p):
    ref = float(_limit_moment_mpmath(params.alpha, params.theta, p))
    assert em.limit_moment_S(params, p) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("params", GRID, ids=str)
def test_limit_consistency(params):
    n = 10**6
    for p in (1, 2, 3):
        ratio = em.raw_moment_Kn(params, n, p) / n ** (params.alpha * p) / em.limit_moment_S(params, p)
        assert abs(ratio - 1.0) < 0.05


def test_theta_zero_branch_is_continuous():
    for a in (0.3, 0.5, 0.8):
        z, eps = ModelParams(a, 0.0), ModelParams(a, 1e-9)
        for n in (1, 5, 300):
            assert em.mean_Kn_exact(z, n) == pytest.approx(em.mean_Kn_exact(eps, n), rel=1e-6)
            assert em.falling_moment_Kn(z, n, 2) == pytest.approx(em.falling_moment_Kn(eps, n, 2), rel=1e-6)
            assert em.falling_moment_Krn(z, n, 1, 1) == pytest.approx(em.falling_moment_Krn(eps, n, 1, 1), rel=1e-6)
        assert em.limit_moment_S(z, 2) == pytest.approx(em.limit_moment_S(eps, 2), rel=1e-6)


# ---------------------------------------------------------------- cross moments


def _tower_cross(params, table_iter, weight):
    """E[X E[S | F_n]] with E[S | F_n] = M_n / lim m^α b_m, via mpmath."""
    a, t = mpmath.mpf(params.alpha), mpmath.mpf(params.theta)
    total = mpmath.mpf(0)
    for n, k, x, prob in table_iter:
        b_n = mpmath.gammaprod([t + n, a + t + 1], [t + 1, n + a + t])
        c = mpmath.gamma(a + t + 1) / mpmath.gamma(t + 1)
        total += prob * x * b_n * (k + t / a) / c
    return float(total)


def test_cross_moment_consistency():
    for params in GRID + [P55, P50]:
        s1 = em.limit_moment_S(params, 1)
        assert em.cross_moment_KnS(params, 1) == pytest.approx(s1, rel=1e-12)
        assert em.cross_moment_KrnS(params, 1, 1) == pytest.approx(s1, rel=1e-12)
    assert em.cross_moment_KnS(P55, 1) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert em.cross_moment_KnS(P50, 1) == pytest.approx(2 / math.sqrt(math.pi), rel=1e-12)
    assert em.cross_moment_KrnS(P55, 2, 3) == 0.0


@pytest.mark.parametrize("params", GRID + [P55], ids=str)
def test_cross_moment_KnS_matches_tower_oracle(params):
    for n in (2, 10, 100):
        dist = em.dp_dist_oracle(params, n)
        rows = ((n, k, k, pk) for k, pk in dist.rows())
        assert em.cross_moment_KnS(params, n) == pytest.approx(_tower_cross(params, rows, None), rel=1e-10)


@pytest.mark.parametrize("params", GRID + [P55], ids=str)
def test_cross_moment_KrnS_matches_tower_oracle(params):
    for n in (2, 3, 8):
        table = em.enumerate_joint_oracle(params, n)
        for r in range(1, n + 1):
            rows = ((n, sum(c), c[r - 1], pr) for c, pr in table.items())
            ref = _tower_cross(params, rows, None)
            assert em.cross_moment_KrnS(params, n, r) == pytest.approx(ref, rel=1e-10, abs=1e-14)


# ---------------------------------------------------------------- exact laws


def test_exact_dist_examples():
    np.testing.assert_allclose(em.exact_dist_Kn(P50, 2).probabilities, [0.5, 0.5], rtol=1e-14)
    np.testing.assert_allclose(em.exact_dist_Kn(P50, 3).probabilities, [0.375, 0.375, 0.25], rtol=1e-14)
    np.testing.assert_allclose(em.exact_dist_Kn(P55, 1).probabilities, [1.0])
    np.testing.assert_allclose(em.dp_dist_oracle(P50, 3).probabilities, [0.375, 0.375, 0.25], rtol=1e-14)
    np.testing.assert_allclose(em.dp_dist_oracle(ModelParams(0.0, 1.0), 2).probabilities, [0.5, 0.5])
    np.testing.assert_allclose(em.dp_dist_oracle(P55, 1).probabilities, [1.0])


@pytest.mark.parametrize("params", GRID, ids=str)
def test_exact_dist_matches_dp_oracle(params):
    for n in (1, 2, 17, 100, 200):
        exact = em.exact_dist_Kn(params, n).probabilities
        dp = em.dp_dist_oracle(params, n).probabilities
        assert abs(exact.sum() - 1.0) <= 1e-10
        assert np.max(np.abs(exact - dp)) <= 1e-10


def test_exact_dist_refuses_alpha_zero_and_large_n():
    with pytest.raises(ParameterError):
        em.exact_dist_Kn(ModelParams(0.0, 1.0), 5)
    with pytest.raises(ValueError):
        em.exact_dist_Kn(P55, em.TABLE_MAX_N + 1)


def test_parameter_validation_message():
    with pytest.raises(ParameterError, match="α∈\\[0,1\\), θ>−α"):
        ModelParams(1.2, 0.0)
    with pytest.raises(ParameterError):
        ModelParams(0.5, -0.5)
