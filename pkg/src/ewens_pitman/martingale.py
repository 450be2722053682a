"""Martingales of the Ewens-Pitman block counts and their fluctuation statistics.

M_n = b_n (K_n + theta/alpha) and M_{r,n} = b_{r,n} K_{r,n} - A_{r,n}, where
A_{r,n+1} = A_{r,n} + b_{r,n+1} p_{r,n}.  The accumulators are carried in the
rescaled form A_{r,n}/b_{r,n}, which obeys

    Ã_{n+1} = beta_{r,n} Ã_n + p_{r,n},   beta_{r,n} = (n - r + theta + alpha)/(n + theta),

so every stored number stays O(n^alpha).  Functions taking a ``state`` accept
anything with ``n``, ``k_blocks`` and ``K_r(r)``: a
:class:`~ewens_pitman.partition.PartitionState` or a :class:`CountState`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exactmath import b_seq, log_b_block, log_b_size, p_alpha
from .records import FluctuationSample, TrajectoryRecord

LIL_START = 16
LIL_GROWTH = 1.5
SHAT_HORIZON_CAP = 10**8


class ContractError(RuntimeError):
    """An online accumulator was fed out of order."""


@dataclass(frozen=True)
class CountState:
    """Plain (n, K_n, {r: K_{r,n}}) snapshot."""

    n: int
    k_blocks: int
    size_counts: dict = field(default_factory=dict)

    def K_r(self, r):
        return self.size_counts.get(r, 0)

    @classmethod
    def from_sizes(cls, sizes):
        counts = {}
        for s in sizes:
            counts[int(s)] = counts.get(int(s), 0) + 1
        return cls(int(sum(sizes)), len(sizes), counts)


def _kr(state, r):
    return int(state.K_r(r))


def _b_block(params, n):
    return float(b_seq("block", params, n))


def _b_ratio_block(params, n):
    """b_{n+1}/b_n."""
    return (n + params.theta) / (n + params.alpha + params.theta)


def _b_next_block(params, n):
    return _b_block(params, n) * _b_ratio_block(params, n)


def _b_size(params, n, r):
    return float(b_seq("size_r", params, n, r=r))


# --------------------------------------------------------------------------
# one-step laws


def p_new(state, params):
    """p_n = (alpha K_n + theta)/(n + theta), the law of xi_{n+1}."""
    return (params.alpha * state.k_blocks + params.theta) / (state.n + params.theta)


def pq_size(state, params, r):
    """(p_{r,n}, q_{r,n}): probabilities that K_{r,n} moves up / down."""
    a, t, n = params.alpha, params.theta, state.n
    if r == 1:
        p = p_new(state, params)
    else:
        p = (r - 1 - a) * _kr(state, r - 1) / (n + t)
    q = (r - a) * _kr(state, r) / (n + t)
    return p, q


def beta_size(params, n, r):
    return (n - r + params.theta + params.alpha) / (n + params.theta)


def _require_n(state):
    if state.n < 1:
        raise ValueError("martingale quantities are defined for n >= 1")


# --------------------------------------------------------------------------
# M_n


def m_value(state, params):
    """M_n = b_n (K_n + theta/alpha)."""
    params.require_positive_alpha()
    _require_n(state)
    return _b_block(params, state.n) * (state.k_blocks + params.theta_over_alpha)


def _block_outcomes(state, params):
    p = p_new(state, params)
    return ((1.0 - p, 0), (p, 1))


def martingale_identity_check(state, params, r=None, a_tilde=0.0):
    """E[M_{n+1} | F_n] - M_n by enumeration of the one-step outcomes.

    For ``r=None`` this is the K_n martingale.  For a size r the residual is
    reported in units of b_{r,n+1} (b_{r,n} grows like n^{r-alpha}), with the
    accumulator at n given as ``a_tilde`` = A_{r,n}/b_{r,n}.  For n >= r the
    identity holds for any value of it; for n < r the only reachable value is 0.
    """
    params.require_positive_alpha()
    _require_n(state)
    n, K = state.n, state.k_blocks
    if r is None:
        b_n = _b_block(params, n)
        b_next = b_n * _b_ratio_block(params, n)
        c = params.theta_over_alpha
        expected = math.fsum(prob * b_next * (K + xi + c) for prob, xi in _block_outcomes(state, params))
        return expected - b_n * (K + c)
    if n < r and a_tilde != 0.0:
        raise ValueError(f"A_{{r,n}} = 0 for n < r; got a_tilde={a_tilde} at n={n}, r={r}")
    p, q = pq_size(state, params, r)
    beta = beta_size(params, n, r)
    Kr = _kr(state, r)
    a_next = beta * a_tilde + p
    outcomes = ((p, 1), (q, -1), (1.0 - p - q, 0))
    expected = math.fsum(prob * (Kr + d - a_next) for prob, d in outcomes)
    # M_{r,n}/b_{r,n+1} = beta (K_{r,n} - Ã_n) for n >= r; below r both sides vanish
    current = beta * (Kr - a_tilde) if n >= r else Kr - a_tilde
    return expected - current


# --------------------------------------------------------------------------
# conditional increments


def qv_increment_Kn(state, params):
    """E[(ΔM_{n+1})^2 | F_n] = b_{n+1}^2 (theta + alpha K)(n - alpha K)/(n + theta)^2."""
    params.require_positive_alpha()
    _require_n(state)
    a, t, n, K = params.alpha, params.theta, state.n, state.k_blocks
    b = _b_next_block(params, n)
    return b * b * (t + a * K) * (n - a * K) / (n + t) ** 2


def qv_increment_Kn_bruteforce(state, params):
    params.require_positive_alpha()
    b = _b_next_block(params, state.n)
    p = p_new(state, params)
    return math.fsum(prob * (b * (xi - p)) ** 2 for prob, xi in _block_outcomes(state, params))


def e_coefficients(state, params):
    """Coefficients e_n(0..4) of E[(ΔM_{n+1})^4 | F_n] = b_{n+1}^4 Σ e_n(p) K_n^p."""
    a, t, n = params.alpha, params.theta, float(state.n)
    d4 = (n + t) ** 4
    return (
        n * t * (n * n - n * t + t * t) / d4,
        a * (n - t) * (n * n - 4 * n * t + t * t) / d4,
        -2 * a * a * (2 * n - t) * (n - 2 * t) / d4,
        6 * a**3 * (n - t) / d4,
        -3 * a**4 / d4,
    )


def fourth_increment_Kn(state, params):
    params.require_positive_alpha()
    _require_n(state)
    b = _b_next_block(params, state.n)
    K = float(state.k_blocks)
    e = e_coefficients(state, params)
    return b**4 * math.fsum(e[p] * K**p for p in range(5))


def fourth_increment_Kn_bruteforce(state, params):
    params.require_positive_alpha()
    b = _b_next_block(params, state.n)
    p = p_new(state, params)
    return math.fsum(prob * (b * (xi - p)) ** 4 for prob, xi in _block_outcomes(state, params))


def _size_outcomes(state, params, r):
    p, q = pq_size(state, params, r)
    return p, q, ((p, 1), (q, -1), (1.0 - p - q, 0))


def qv_increment_Krn(state, params, r):
    """b_{r,n+1}^2 (p + q - (p - q)^2)."""
    params.require_positive_alpha()
    _require_n(state)
    p, q = pq_size(state, params, r)
    b = _b_size(params, state.n + 1, r)
    return b * b * (p + q - (p - q) ** 2)


def qv_increment_Krn_bruteforce(state, params, r):
    params.require_positive_alpha()
    p, q, outcomes = _size_outcomes(state, params, r)
    b = _b_size(params, state.n + 1, r)
    return math.fsum(prob * (b * (d - (p - q))) ** 2 for prob, d in outcomes)


def e_size_coefficients(state, params, r):
    """e_{r,n}(1..4) as a tuple."""
    p, q = pq_size(state, params, r)
    s, d = p + q, p - q
    return (s, -4 * d * d, 6 * s * d * d, -3 * d**4)


def fourth_increment_Krn(state, params, r):
    params.require_positive_alpha()
    _require_n(state)
    b = _b_size(params, state.n + 1, r)
    return b**4 * math.fsum(e_size_coefficients(state, params, r))


def fourth_increment_Krn_bruteforce(state, params, r):
    params.require_positive_alpha()
    p, q, outcomes = _size_outcomes(state, params, r)
    b = _b_size(params, state.n + 1, r)
    return math.fsum(prob * (b * (d - (p - q))) ** 4 for prob, d in outcomes)


# --------------------------------------------------------------------------
# A accumulators


@dataclass(frozen=True)
class AAccumulator:
    """A_{r,n} carried as ``a_tilde`` = A_{r,n}/b_{r,n} at time ``n``."""

    r: int
    n: int = 1
    a_tilde: float = 0.0

    def A(self, params):
        return math.exp(log_b_size(params, self.n, self.r)) * self.a_tilde


def a_accumulator_update(acc, state, params, r=None):
    """Advance the accumulator from n to n+1 using the state at time n."""
    r = acc.r if r is None else r
    if r != acc.r:
        raise ContractError(f"accumulator tracks r={acc.r}, called with r={r}")
    if state.n != acc.n:
        raise ContractError(f"accumulator is at n={acc.n} but the state is at n={state.n}")
    _require_n(state)
    p, _ = pq_size(state, params, r)
    return AAccumulator(r, acc.n + 1, beta_size(params, state.n, r) * acc.a_tilde + p)


# --------------------------------------------------------------------------
# fluctuation statistics


def _n_alpha(n, params):
    return float(n) ** params.alpha


def clt_stat_Krn(record, params, r, form="self_norm"):
    """Self-normalized (K_{r,n} - Ã)/sqrt(K_{r,n}) or mixed (K_{r,n} - Ã)/n^{alpha/2}."""
    K_r = record.K_r[r]
    dev = K_r - record.a_tilde[r]
    if form == "self_norm":
        if K_r == 0:
            return FluctuationSample("clt_Krn_self_norm", math.nan, record.trajectory_id, record.n, r, valid=False)
        return FluctuationSample("clt_Krn_self_norm", dev / math.sqrt(K_r), record.trajectory_id, record.n, r)
    if form == "mixed":
        return FluctuationSample("clt_Krn_mixed", dev / math.sqrt(_n_alpha(record.n, params)),
                                 record.trajectory_id, record.n, r)
    raise ValueError(f"unknown form {form!r}")


def clt_stat_Kn(record, s_hat, params, form="self_norm"):
    """(K_n - n^alpha Ŝ)/sqrt(K_n) or sqrt(n^alpha)(K_n/n^alpha - Ŝ)."""
    if not s_hat > 0:
        raise ValueError("S_hat must be positive")
    na = _n_alpha(record.n, params)
    dev = record.K - na * s_hat
    if form == "self_norm":
        return FluctuationSample("clt_Kn_self_norm", dev / math.sqrt(record.K), record.trajectory_id, record.n)
    if form == "mixed":
        return FluctuationSample("clt_Kn_mixed", dev / math.sqrt(na), record.trajectory_id, record.n)
    raise ValueError(f"unknown form {form!r}")


def clt_values_Krn(K_r, a_tilde, n, params, form="self_norm"):
    """Vectorized statistic; returns (values of valid samples, excluded count)."""
    K_r = np.asarray(K_r, dtype=float)
    dev = K_r - np.asarray(a_tilde, dtype=float)
    if form == "mixed":
        return dev / math.sqrt(_n_alpha(n, params)), 0
    ok = K_r > 0
    return dev[ok] / np.sqrt(K_r[ok]), int((~ok).sum())


def clt_values_Kn(K, s_hat, n, params, form="self_norm"):
    K = np.asarray(K, dtype=float)
    dev = K - _n_alpha(n, params) * np.asarray(s_hat, dtype=float)
    if form == "mixed":
        return dev / math.sqrt(_n_alpha(n, params))
    return dev / np.sqrt(K)


def s_hat_terminal(record, params):
    """Ŝ = K_N/N^alpha at the horizon record."""
    params.require_positive_alpha()
    if record.n < 1:
        raise ValueError("N must be >= 1")
    return record.K / _n_alpha(record.n, params)


def s_hat_values(K_N, N, params):
    return np.asarray(K_N, dtype=float) / _n_alpha(N, params)


def shat_horizon(n, params):
    """N = min(n 10^ceil(2/alpha), 10^8)."""
    params.require_positive_alpha()
    return int(min(int(n) * 10 ** math.ceil(2.0 / params.alpha), SHAT_HORIZON_CAP))


def lil_checkpoints(n_max):
    """ceil(16 * 1.5^j) up to n_max, without repeats."""
    out = []
    j = 0
    while True:
        n = math.ceil(LIL_START * LIL_GROWTH**j)
        if n > n_max:
            return out
        if not out or n > out[-1]:
            out.append(n)
        j += 1


def lil_normalizer(n, params):
    return 2.0 * _n_alpha(n, params) * math.log(math.log(n))


@dataclass(frozen=True)
class LILSeries:
    n: np.ndarray
    ratio: np.ndarray
    running_max: np.ndarray

    @property
    def final_max(self):
        return float(self.running_max[-1])


def lil_tracker(ns, values, params, s_hat=None):
    """LIL ratio dev^2/(2 n^alpha log log n) and its running maximum.

    With ``s_hat`` the values are K_n and dev = K_n - n^alpha Ŝ; otherwise the
    values are already centered (e.g. K_{r,n} - Ã).  Points with n < 16 are
    dropped.
    """
    ns = np.asarray(ns, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    keep = ns >= LIL_START
    ns, values = ns[keep], values[keep]
    dev = values if s_hat is None else values - ns.astype(float) ** params.alpha * s_hat
    norm = np.array([lil_normalizer(int(n), params) for n in ns])
    ratio = dev * dev / norm
    return LILSeries(ns, ratio, np.maximum.accumulate(ratio) if ratio.size else ratio)


def alpha_estimator(state):
    """K_{1,n}/K_n, consistent for alpha."""
    if isinstance(state, TrajectoryRecord):
        K, K1 = state.K, state.K_r[1]
    else:
        K, K1 = state.k_blocks, _kr(state, 1)
    if K == 0:
        raise ValueError("alpha estimator needs K_n > 0")
    return K1 / K


# --------------------------------------------------------------------------
# reference constants


def b_block_limit(params):
    """lim n^alpha b_n = Gamma(alpha+theta+1)/Gamma(theta+1)."""
    a, t = params.alpha, params.theta
    return math.exp(math.lgamma(a + t + 1.0) - math.lgamma(t + 1.0))


def lambda_surrogate(n, s_hat, params):
    """Asymptotic value of the tail variance Λ_n, from n^alpha Λ_n -> c^2 S."""
    return b_block_limit(params) ** 2 * s_hat / _n_alpha(n, params)


def s2_block_limit(params):
    """lim n^alpha s_n^2 = ((alpha+theta)/alpha) Gamma(alpha+theta+1)/Gamma(theta+1)."""
    params.require_positive_alpha()
    return (params.alpha + params.theta) / params.alpha * b_block_limit(params)


def s2_size_limit(params, r):
    """lim s_{r,n}^2 / n^{2r-alpha} = (p_alpha(r)/alpha) Gamma(alpha+theta)/Gamma(theta+1)."""
    params.require_positive_alpha()
    a, t = params.alpha, params.theta
    return p_alpha(a, r) / a * math.exp(math.lgamma(a + t) - math.lgamma(t + 1.0))


def m_values_from_K(K, n, params):
    """Vectorized M_n over trajectories."""
    params.require_positive_alpha()
    return math.exp(log_b_block(params, n)) * (np.asarray(K, dtype=float) + params.theta_over_alpha)
