"""Signed log-space numbers and the Gamma-function helpers built on them."""

import math
from dataclasses import dataclass

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_STIRLING_MIN = 20.0
_DIRECT_PRODUCT_MAX = 24


@dataclass(frozen=True)
class SignedLogValue:
    """``sign * exp(log_abs)``.  ``log_abs`` is meaningless when ``sign == 0``."""

    sign: int
    log_abs: float

    @classmethod
    def zero(cls):
        return cls(0, -math.inf)

    @classmethod
    def one(cls):
        return cls(1, 0.0)

    @classmethod
    def from_float(cls, x):
        if x == 0.0:
            return cls.zero()
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def __float__(self):
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    def __mul__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(other)
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_abs + other.log_abs)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(other)
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign * other.sign, self.log_abs - other.log_abs)

    def __neg__(self):
        return SignedLogValue(-self.sign, self.log_abs)

    def __add__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(other)
        return signed_sum([self, other])[0]

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, SignedLogValue):
            other = SignedLogValue.from_float(other)
        return self + (-other)

    def __pow__(self, k):
        k = int(k)
        if k == 0:
            return SignedLogValue.one()
        if self.sign == 0:
            return SignedLogValue.zero()
        return SignedLogValue(self.sign**k, self.log_abs * k)


def _logsumexp(logs):
    m = max(logs)
    if m == -math.inf:
        return -math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in logs))


def signed_sum(terms):
    """Sum signed log values, splitting positive and negative parts.

    Returns ``(total, digits_lost)`` where ``digits_lost`` is the number of
    decimal digits cancelled between the largest term and the result
    (``inf`` when the sum cancels to exactly zero).
    """
    pos = [t.log_abs for t in terms if t.sign > 0]
    neg = [t.log_abs for t in terms if t.sign < 0]
    lp = _logsumexp(pos) if pos else -math.inf
    ln = _logsumexp(neg) if neg else -math.inf
    biggest = max(lp, ln)
    if biggest == -math.inf:
        return SignedLogValue.zero(), 0.0
    if lp == ln:
        return SignedLogValue.zero(), math.inf
    if lp > ln:
        sign, hi, lo = 1, lp, ln
    else:
        sign, hi, lo = -1, ln, lp
    log_abs = hi + math.log1p(-math.exp(lo - hi))
    largest_term = max(t.log_abs for t in terms if t.sign != 0)
    lost = max(0.0, (largest_term - log_abs) / math.log(10.0))
    return SignedLogValue(sign, log_abs), lost


def _stirling_tail(y):
    y2 = y * y
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * y2)) / y2) / y2) / y


def log_gamma_ratio(a, b):
    """``log|Γ(a)| - log|Γ(b)|`` without cancelling two huge lgamma values."""
    if a >= _STIRLING_MIN and b >= _STIRLING_MIN:
        d = a - b
        # (a-1/2)log a - (b-1/2)log b - d, rewritten around b
        main = (b - 0.5) * math.log1p(d / b) + d * math.log(a) - d
        return main + _stirling_tail(a) - _stirling_tail(b)
    return math.lgamma(a) - math.lgamma(b)


def rising_factorial(a, n):
    """(a)^{(n)} = a(a+1)...(a+n-1) as a SignedLogValue."""
    n = int(n)
    if n < 0:
        raise ValueError("order must be nonnegative")
    if n == 0:
        return SignedLogValue.one()
    a = float(a)
    if n <= _DIRECT_PRODUCT_MAX:
        prod = math.prod(a + i for i in range(n))
        if prod != 0.0 and math.isfinite(prod):
            return SignedLogValue.from_float(prod)
    if a > 0.0:
        return SignedLogValue(1, log_gamma_ratio(a + n, a))
    if a == math.floor(a):
        # nonpositive integer base: a product of negative integers, or hits zero
        m = int(-a)
        if n > m:
            return SignedLogValue.zero()
        return SignedLogValue(-1 if n % 2 else 1, math.lgamma(m + 1.0) - math.lgamma(m - n + 1.0))
    negatives = min(n, math.ceil(-a))
    log_abs = sum(math.log(-(a + i)) for i in range(negatives))
    if n > negatives:
        log_abs += log_gamma_ratio(a + n, a + negatives)
    return SignedLogValue(-1 if negatives % 2 else 1, log_abs)


def falling_factorial(a, p):
    """(a)_{(p)} = a(a-1)...(a-p+1) as a SignedLogValue."""
    p = int(p)
    if p < 0:
        raise ValueError("order must be nonnegative")
    return rising_factorial(float(a) - p + 1.0, p)
