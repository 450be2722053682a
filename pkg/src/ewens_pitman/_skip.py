"""Event-driven sampler for (K_n, K_{1,n}, ..., K_{R,n}).

Only new blocks and joins into the tracked classes 1..R change the reduced
state; a join into a block of size > R is silent.  While the state is frozen,
the silent probability at step i is (i - c)/(i + theta) with c constant, so the
survival function of the waiting time is a ratio of gamma functions and the
next event time can be drawn by inversion in O(log gap).  The resulting chain
has exactly the law of the reduced Chinese restaurant state.
"""

import math

import numpy as np
from numba import njit

from .rng import STREAM_WORDS, next_uniform, next_uniform_open, stream_init

SKIP_LANE = 1
_STIRLING_MIN = 20.0


@njit(cache=True, inline="always")
def _stirling_tail(y):
    y2 = y * y
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * y2)) / y2) / y2) / y


@njit(cache=True)
def lg_ratio(a, b):
    """log Γ(a) - log Γ(b) for positive a, b."""
    if a >= _STIRLING_MIN and b >= _STIRLING_MIN:
        d = a - b
        main = (b - 0.5) * math.log1p(d / b) + d * math.log(a) - d
        return main + _stirling_tail(a) - _stirling_tail(b)
    return math.lgamma(a) - math.lgamma(b)


@njit(cache=True)
def log_survival(j, n, s0, theta):
    """log P(no event during steps n..j-1) given silent weight s0 at step n."""
    return lg_ratio(s0 + (j - n), s0) - lg_ratio(j + theta, n + theta)


@njit(cache=True)
def next_event(n, s0, e, theta, log_u, n_end):
    """Largest j >= n with log_survival(j) >= log_u, capped at n_end."""
    if s0 <= 0.0:
        return n
    if math.log(s0 / (n + theta)) < log_u:
        return n
    if n + 1 >= n_end:
        return n_end
    # gamma-ratio asymptotics give survival ~ ((n+m)/(x+m))^e
    nm = 0.5 * (n + theta + s0 - 1.0)
    x0 = n + 1.0
    if nm > 0.5:
        x0 = nm * math.exp(-log_u / e) - (nm - n)
    if not (x0 < n_end):
        if log_survival(n_end, n, s0, theta) >= log_u:
            return n_end
        x0 = n_end - 1.0
    j0 = np.int64(x0)
    if j0 < n + 1:
        j0 = n + 1
    if j0 >= n_end:
        j0 = n_end - 1
    if log_survival(j0, n, s0, theta) >= log_u:
        lo = j0
        d = 1
        while True:
            hi = lo + d
            if hi >= n_end:
                if log_survival(n_end, n, s0, theta) >= log_u:
                    return n_end
                hi = n_end
                break
            if log_survival(hi, n, s0, theta) >= log_u:
                lo = hi
                d *= 2
            else:
                break
    else:
        hi = j0
        d = 1
        while True:
            lo = hi - d
            if lo <= n + 1:
                lo = n + 1
                break
            if log_survival(lo, n, s0, theta) < log_u:
                hi = lo
                d *= 2
            else:
                break
    while hi - lo > 1:
        mid = lo + (hi - lo) // 2
        if log_survival(mid, n, s0, theta) >= log_u:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def run_skip(alpha, theta, seed, lane, start, stop, checkpoints, R, out_K, out_Kr):
    """Trajectories ``start..stop-1``; K and K_1..K_R at every checkpoint."""
    st = np.zeros(STREAM_WORDS, dtype=np.uint64)
    counts = np.zeros(R + 2, dtype=np.int64)
    ncp = checkpoints.shape[0]
    n_end = checkpoints[ncp - 1]
    for i in range(start, stop):
        row = i - start
        stream_init(st, np.uint64(seed), np.uint64(i), np.uint64(lane))
        counts[:] = 0
        n = 1
        K = 1
        if R >= 1:
            counts[1] = 1
            big_K = 0
            big_mass = 0
        else:
            big_K = 1
            big_mass = 1
        ci = 0
        while True:
            s0 = big_mass - alpha * big_K
            e = alpha * K + theta
            for r in range(1, R + 1):
                e += (r - alpha) * counts[r]
            if big_K > 0:
                J = next_event(n, s0, e, theta, math.log(next_uniform_open(st)), n_end)
            else:
                J = n
            while ci < ncp and checkpoints[ci] <= J:
                out_K[row, ci] = K
                for r in range(1, R + 1):
                    out_Kr[row, ci, r - 1] = counts[r]
                ci += 1
            if J >= n_end:
                break
            big_mass += J - n
            n = J
            v = next_uniform(st) * e
            w = alpha * K + theta
            target = 0
            if v >= w:
                v -= w
                for r in range(1, R + 1):
                    if counts[r] > 0:
                        target = r
                        wr = (r - alpha) * counts[r]
                        if v < wr:
                            break
                        v -= wr
            if target == 0:
                K += 1
                if R >= 1:
                    counts[1] += 1
                else:
                    big_K += 1
                    big_mass += 1
            else:
                counts[target] -= 1
                if target + 1 <= R:
                    counts[target + 1] += 1
                else:
                    big_K += 1
                    big_mass += target + 1
            n += 1
    return 0
