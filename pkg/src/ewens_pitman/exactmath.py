"""Exact combinatorics and moment formulas of the Ewens-Pitman model.

Everything here is a pure function of its inputs.  Quantities that overflow in
linear space (rising factorials, generalized factorial coefficients) are carried
as :class:`~ewens_pitman.signedlog.SignedLogValue` or as plain log arrays, and
the ``theta == 0`` cases are evaluated through their own limit formulas.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .params import ModelParams, ParameterError
from .signedlog import (
    SignedLogValue,
    falling_factorial,
    log_gamma_ratio,
    rising_factorial,
    signed_sum,
)

TABLE_MAX_N = 10_000
ORACLE_MAX_N = 25
ENUMERATION_MAX_N = 8
CANCELLATION_DIGITS = 10.0
_LOG_TINY = math.log(np.finfo(float).tiny)


class PrecisionWarning(RuntimeWarning):
    """Signals catastrophic cancellation or underflow in an exact formula."""


@dataclass(frozen=True)
class ExactDistribution:
    """Law of K_n: ``probabilities[k-1] == P(K_n = k)`` for k = 1..n."""

    n: int
    probabilities: np.ndarray

    def __getitem__(self, k):
        return float(self.probabilities[k - 1])

    def mean(self):
        ks = np.arange(1, self.n + 1)
        return float(np.dot(ks, self.probabilities))

    def moment(self, p):
        ks = np.arange(1, self.n + 1, dtype=float)
        return float(np.dot(ks**p, self.probabilities))

    def rows(self):
        return [(k, float(pk)) for k, pk in enumerate(self.probabilities, start=1)]


# --------------------------------------------------------------------------
# elementary combinatorics


@lru_cache(maxsize=None)
def _stirling2_row(p):
    if p == 0:
        return (1,)
    prev = _stirling2_row(p - 1)
    row = [0] * (p + 1)
    for k in range(1, p + 1):
        left = prev[k - 1]
        right = prev[k] if k < len(prev) else 0
        row[k] = k * right + left
    return tuple(row)


def stirling2(p, k):
    """Stirling number of the second kind via S(p,k) = k S(p-1,k) + S(p-1,k-1)."""
    p, k = int(p), int(k)
    if p < 0 or k < 0 or k > p:
        raise ValueError(f"stirling2 requires 0 <= k <= p, got p={p}, k={k}")
    return _stirling2_row(p)[k]


def p_alpha(alpha, r):
    """Limit frequency α(1-α)^{(r-1)}/r! of blocks of size r."""
    return alpha * float(rising_factorial(1.0 - alpha, r - 1)) / math.factorial(r)


def _log_p_alpha(alpha, r):
    return math.log(alpha) + rising_factorial(1.0 - alpha, r - 1).log_abs - math.lgamma(r + 1.0)


# --------------------------------------------------------------------------
# generalized factorial coefficients


def _gfc_next_row(log_row, m, alpha, log_alpha):
    """Row m+1 of log C(., k; alpha) from row m (index k, log C(m,0) = -inf)."""
    new = np.full(m + 2, -np.inf)
    ks = np.arange(1, m + 1)
    stay = np.log(m - ks * alpha) + log_row[1 : m + 1]
    grow = log_alpha + log_row[0:m]
    new[1 : m + 1] = np.logaddexp(stay, grow)
    new[m + 1] = log_alpha + log_row[m]
    return new


def _gfc_log_row(n, alpha):
    log_alpha = math.log(alpha)
    row = np.array([-np.inf, log_alpha])
    for m in range(1, n):
        row = _gfc_next_row(row, m, alpha, log_alpha)
    return row


@dataclass(frozen=True)
class GFCTable:
    """log C(n, k; alpha) for 1 <= k <= n <= n_max; entries outside are -inf."""

    alpha: float
    n_max: int
    log_values: np.ndarray

    def log(self, n, k):
        return float(self.log_values[n, k])

    def __call__(self, n, k):
        return math.exp(self.log_values[n, k])

    def rows(self):
        for n in range(1, self.n_max + 1):
            for k in range(1, n + 1):
                yield n, k, float(self.log_values[n, k]), 1

    def to_csv(self, path):
        write_log_table_csv(path, self.rows())


def gfc_table(n_max, params):
    """Generalized factorial coefficients by the two-term positive recurrence.

    C(n+1,k) = (n - kα) C(n,k) + α C(n,k-1), seeded C(1,1) = α.  Every term is
    nonnegative, so the log-space recursion never cancels.
    """
    params.require_positive_alpha()
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max > TABLE_MAX_N:
        raise ValueError(f"n_max={n_max} exceeds the table bound {TABLE_MAX_N}")
    alpha = params.alpha
    log_alpha = math.log(alpha)
    table = np.full((n_max + 1, n_max + 1), -np.inf)
    row = np.array([-np.inf, log_alpha])
    table[1, :2] = row
    for m in range(1, n_max):
        row = _gfc_next_row(row, m, alpha, log_alpha)
        table[m + 1, : m + 2] = row
    return GFCTable(alpha, n_max, table)


def gfc_oracle(n, k, alpha):
    """Exact rational C(n,k;α) = (1/k!) Σ_j (-1)^j binom(k,j) (-jα)^{(n)}."""
    n, k = int(n), int(k)
    if n > ORACLE_MAX_N:
        raise ValueError(f"exact oracle limited to n <= {ORACLE_MAX_N}, got n={n}")
    if not 1 <= k <= n:
        raise ValueError("gfc_oracle requires 1 <= k <= n")
    alpha = Fraction(alpha)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    total = Fraction(0)
    for j in range(1, k + 1):
        base = -j * alpha
        rising = Fraction(1)
        for i in range(n):
            rising *= base + i
        total += (-1) ** j * math.comb(k, j) * rising
    return total / math.factorial(k)


def gfc_oracle_check(n_max=ORACLE_MAX_N, alphas=(0.25, 0.5, 0.75)):
    """Largest relative error of :func:`gfc_table` against :func:`gfc_oracle`.

    Returns ``(max_rel_error, worst)`` with ``worst = (alpha, n, k)``.
    """
    worst, where = 0.0, None
    for alpha in alphas:
        table = gfc_table(n_max, ModelParams(alpha, 0.0))
        for n in range(1, n_max + 1):
            for k in range(1, n + 1):
                exact = gfc_oracle(n, k, alpha)
                rel = abs(math.expm1(table.log(n, k) - _log_fraction(exact)))
                if where is None or rel > worst:
                    worst, where = rel, (alpha, n, k)
    return worst, where


def _log_fraction(x):
    return math.log(x.numerator) - math.log(x.denominator)


# --------------------------------------------------------------------------
# b-sequences


def b_seq(kind, params, n, *, p=None, r=None):
    """Normalizing sequences of the martingales, as SignedLogValue.

    ``kind`` is ``"block"`` (b_n), ``"block_p"`` (b_n(p), needs ``p``) or
    ``"size_r"`` (b_{r,n}, needs ``r``).  All kinds equal 1 at n = 1.  For
    ``size_r`` with 1 < n < r the value is also 1: K_{r,n} vanishes there, so
    the martingale does not depend on it.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    a, t = params.alpha, params.theta
    if n == 1:
        return SignedLogValue.one()
    if kind == "block":
        return rising_factorial(1.0 + t, n - 1) / rising_factorial(1.0 + a + t, n - 1)
    if kind == "block_p":
        if p is None:
            raise ValueError("block_p requires p")
        return rising_factorial(1.0 + a * p + t, n - 1) / rising_factorial(1.0 + t, n - 1)
    if kind == "size_r":
        if r is None or r < 1:
            raise ValueError("size_r requires r >= 1")
        if n < r:
            return SignedLogValue.one()
        return rising_factorial(1.0 + t, n - 1) / rising_factorial(a + t, n - r)
    raise ValueError(f"unknown b-sequence kind {kind!r}")


def log_b_block(params, n):
    return b_seq("block", params, n).log_abs


def log_b_size(params, n, r):
    return b_seq("size_r", params, n, r=r).log_abs


# --------------------------------------------------------------------------
# moments of K_n


def _checked_positive(value, what):
    if value.sign < 0:
        raise ArithmeticError(f"{what} came out negative; sign bookkeeping is broken")
    return value


def _to_float(value, what):
    if value.sign == 0:
        return 0.0
    if value.log_abs < _LOG_TINY:
        warnings.warn(f"{what} underflows double precision; returning 0", PrecisionWarning, stacklevel=3)
        return 0.0
    return float(value)


def mean_Kn_exact(params, n):
    """E[K_n] in closed form (alpha > 0)."""
    params.require_positive_alpha()
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    a, t = params.alpha, params.theta
    if t == 0.0:
        return math.exp(log_gamma_ratio(a + n, a) - math.log(a) - math.lgamma(n))
    num = rising_factorial(a + t, n)
    den = rising_factorial(t, n)
    log_ratio = num.log_abs - den.log_abs
    if num.sign * den.sign > 0:
        return (t / a) * math.expm1(log_ratio)
    return -(t / a) * (math.exp(log_ratio) + 1.0)


def _falling_prefactor(params, n, p):
    """(θ/α)^{(p)} / (θ)^{(n)} for theta != 0."""
    a, t = params.alpha, params.theta
    return rising_factorial(t / a, p) / rising_factorial(t, n)


def falling_moment_Kn(params, n, p):
    """E[(K_n)_{(p)}] by the alternating closed form, evaluated in log space."""
    params.require_positive_alpha()
    n, p = int(n), int(p)
    if n < 1 or p < 0:
        raise ValueError("need n >= 1 and p >= 0")
    if p == 0:
        return 1.0
    if p > n:
        return 0.0
    if p == 1:
        return mean_Kn_exact(params, n)
    a, t = params.alpha, params.theta
    terms = []
    first = 1 if t == 0.0 else 0
    for k in range(first, p + 1):
        term = rising_factorial(k * a + t, n) * float(math.comb(p, k))
        terms.append(-term if (p - k) % 2 else term)
    total, lost = signed_sum(terms)
    if lost > CANCELLATION_DIGITS:
        warnings.warn(
            f"E[(K_n)_(p)] at n={n}, p={p}: {lost:.1f} digits cancelled",
            PrecisionWarning,
            stacklevel=2,
        )
    if t == 0.0:
        log_pref = math.lgamma(p) - math.log(a) - math.lgamma(n)
        value = total * SignedLogValue(1, log_pref)
    else:
        value = total * _falling_prefactor(params, n, p)
    return _to_float(_checked_positive(value, "falling moment"), "E[(K_n)_(p)]")


def raw_moment_Kn(params, n, p):
    """E[K_n^p] through Stirling numbers of the second kind."""
    p = int(p)
    if p == 1:
        return mean_Kn_exact(params, n)
    return math.fsum(stirling2(p, k) * falling_moment_Kn(params, n, k) for k in range(1, p + 1))


# --------------------------------------------------------------------------
# moments of K_{r,n}


def falling_moment_Krn(params, n, r, p):
    """E[(K_{r,n})_{(p)}] = p_α(r)^p n!/(n-rp)! (θ/α)^{(p)} (θ+αp)^{(n-rp)}/(θ)^{(n)}."""
    params.require_positive_alpha()
    n, r, p = int(n), int(r), int(p)
    if n < 1 or r < 1 or p < 0:
        raise ValueError("need n >= 1, r >= 1, p >= 0")
    if p == 0:
        return 1.0
    if r * p > n:
        return 0.0
    a, t = params.alpha, params.theta
    log_common = p * _log_p_alpha(a, r) + math.lgamma(n + 1.0) - math.lgamma(n - r * p + 1.0)
    tail = rising_factorial(t + a * p, n - r * p)
    if t == 0.0:
        pref = SignedLogValue(1, math.lgamma(p) - math.log(a) - math.lgamma(n))
    else:
        pref = _falling_prefactor(params, n, p)
    value = SignedLogValue(1, log_common) * pref * tail
    return _to_float(_checked_positive(value, "K_{r,n} falling moment"), "E[(K_{r,n})_(p)]")


def raw_moment_Krn(params, n, r, p):
    """E[K_{r,n}^p] through Stirling numbers of the second kind."""
    p = int(p)
    return math.fsum(stirling2(p, k) * falling_moment_Krn(params, n, r, k) for k in range(1, p + 1))


# --------------------------------------------------------------------------
# limits and cross moments


def limit_moment_S(params, p):
    """E[S^p] where S = lim K_n / n^alpha."""
    params.require_positive_alpha()
    p = int(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    a, t = params.alpha, params.theta
    if t == 0.0:
        return math.exp(math.lgamma(p) - math.log(a) - math.lgamma(a * p))
    # Γ(θ+1)/(θ Γ(αp+θ)) (θ/α)^{(p)}, with the θ in (θ/α)^{(p)} cancelled
    log_val = math.lgamma(t + 1.0) - math.lgamma(a * p + t) - math.log(a)
    log_val += rising_factorial(t / a + 1.0, p - 1).log_abs
    return math.exp(log_val)


def cross_moment_KnS(params, n):
    """E[K_n S] = Γ(θ+n)/Γ(n+α+θ) ((θ/α) E[K_n] + E[K_n^2])."""
    params.require_positive_alpha()
    a, t = params.alpha, params.theta
    scale = math.exp(log_gamma_ratio(t + n, n + a + t))
    return scale * ((t / a) * mean_Kn_exact(params, n) + raw_moment_Kn(params, n, 2))


def cross_moment_KrnS(params, n, r):
    """E[K_{r,n} S] in closed form."""
    params.require_positive_alpha()
    n, r = int(n), int(r)
    if r > n:
        return 0.0
    a, t = params.alpha, params.theta
    log_val = log_gamma_ratio(t + 1.0, n + a + t) + _log_p_alpha(a, r)
    log_val += math.lgamma(n + 1.0) - math.lgamma(n - r + 1.0)
    log_val += math.log(a + t) - 2.0 * math.log(a)
    log_val += rising_factorial(t + 2.0 * a, n - r).log_abs
    return math.exp(log_val)


# --------------------------------------------------------------------------
# exact laws of K_n


def exact_dist_Kn(params, n):
    """P(K_n = k) = (θ/α)^{(k)} C(n,k;α) / (θ)^{(n)}."""
    params.require_positive_alpha()
    n = int(n)
    if not 1 <= n <= TABLE_MAX_N:
        raise ValueError(f"n must lie in [1, {TABLE_MAX_N}]")
    a, t = params.alpha, params.theta
    log_c = _gfc_log_row(n, a)[1:]
    ks = np.arange(1, n + 1)
    if t == 0.0:
        log_p = np.array([math.lgamma(k) for k in ks]) + log_c - math.log(a) - math.lgamma(n)
    else:
        steps = np.abs(t / a + np.arange(n))
        log_rising = np.cumsum(np.log(steps))
        den = rising_factorial(t, n)
        sign_num = -1 if t < 0 else 1
        if sign_num != den.sign:
            raise ArithmeticError("P(K_n = k) came out negative; sign bookkeeping is broken")
        log_p = log_rising + log_c - den.log_abs
    return ExactDistribution(n, np.exp(log_p))


def dp_dist_oracle(params, n):
    """Law of K_n by forward recursion on the one-step transition law."""
    n = int(n)
    if not 1 <= n <= TABLE_MAX_N:
        raise ValueError(f"n must lie in [1, {TABLE_MAX_N}]")
    a, t = params.alpha, params.theta
    probs = np.zeros(n + 1)
    probs[1] = 1.0
    for m in range(1, n):
        ks = np.arange(0, m + 2)
        new = np.zeros(n + 1)
        stay = probs[: m + 2] * (m - a * ks) / (m + t)
        grow = np.zeros(m + 2)
        grow[1:] = probs[: m + 1] * (a * ks[:-1] + t) / (m + t)
        new[: m + 2] = stay + grow
        new[0] = 0.0
        probs = new
    return ExactDistribution(n, probs[1:].copy())


def _partitions(n, largest=None):
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for part in range(min(n, largest), 0, -1):
        for rest in _partitions(n - part, part):
            yield (part,) + rest


def enumerate_joint_oracle(params, n):
    """Law of (K_{1,n}, ..., K_{n,n}) by enumerating integer partitions of n.

    Each size multiset gets the sampling-formula mass of one ordered size vector
    times the number of its distinct orderings, k!/Π_r K_{r,n}!.
    """
    n = int(n)
    if not 1 <= n <= ENUMERATION_MAX_N:
        raise ValueError(f"enumeration limited to n <= {ENUMERATION_MAX_N}")
    a, t = params.alpha, params.theta
    # the common factor θ of (θ)^{(n)} and of the block weights is cancelled
    den = float(rising_factorial(1.0 + t, n - 1))
    out = {}
    for sizes in _partitions(n):
        k = len(sizes)
        counts = [0] * n
        for s in sizes:
            counts[s - 1] += 1
        # (θ/α)^{(k)} α^k / θ = (θ+α)...(θ+(k-1)α), finite at α = 0 and θ = 0
        weight = math.prod(t + i * a for i in range(1, k))
        for s in sizes:
            weight *= float(rising_factorial(1.0 - a, s - 1)) / math.factorial(s)
        orderings = math.factorial(k) / math.prod(math.factorial(c) for c in counts)
        mass = math.factorial(n) / math.factorial(k) * weight * orderings / den
        out[tuple(counts)] = mass
    return out


def joint_moment(table, fn):
    """E[fn(counts)] under a law returned by :func:`enumerate_joint_oracle`."""
    return math.fsum(prob * fn(counts) for counts, prob in table.items())


# --------------------------------------------------------------------------
# export


def write_log_table_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k", "log_value", "sign"])
        for row in rows:
            writer.writerow(row)


def exact_dist_rows(dist):
    for k, pk in dist.rows():
        sign = 1 if pk > 0 else 0
        yield dist.n, k, math.log(pk) if pk > 0 else -math.inf, sign


__all__ = [
    "CANCELLATION_DIGITS",
    "ExactDistribution",
    "GFCTable",
    "ModelParams",
    "ParameterError",
    "PrecisionWarning",
    "SignedLogValue",
    "b_seq",
    "cross_moment_KnS",
    "cross_moment_KrnS",
    "dp_dist_oracle",
    "enumerate_joint_oracle",
    "exact_dist_Kn",
    "falling_factorial",
    "falling_moment_Kn",
    "falling_moment_Krn",
    "gfc_oracle",
    "gfc_oracle_check",
    "gfc_table",
    "joint_moment",
    "limit_moment_S",
    "mean_Kn_exact",
    "p_alpha",
    "raw_moment_Kn",
    "raw_moment_Krn",
    "rising_factorial",
    "stirling2",
    "write_log_table_csv",
]
