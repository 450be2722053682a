"""Numba kernels for the sequential (Chinese restaurant) construction.

Block sizes 1..T live in two Fenwick trees over size classes holding the
integer count K_r and the integer mass r*K_r.  The sampling weight of a class is
mass - alpha*count, so no floating-point weights are ever accumulated and the
index never drifts.  Blocks that outgrow T move to an overflow pool indexed by
slot, with a Fenwick tree over slot sizes; its per-node block counts are implicit
because slots 1..L are all occupied.

State layout (``iv``): n, K, pool length, class block count, class mass, and
the top bits from which the two tree descents start.  The top bits track the
occupied range (largest class seen, pool length), so early descents are short.
"""

import numpy as np
from numba import njit

from .rng import STREAM_WORDS, next_uniform, stream_init

IV_N = 0
IV_K = 1
IV_POOL_LEN = 2
IV_CLS_CNT = 3
IV_CLS_MASS = 4
IV_CLS_TOP = 5
IV_POOL_TOP = 6
IV_WORDS = 7

NEW_BLOCK = 0
FULL_LANE = 0


@njit(cache=True, inline="always")
def _fen_add(tree, i, v):
    size = tree.shape[0]
    while i < size:
        tree[i] += v
        i += i & (-i)


@njit(cache=True)
def top_bit(m):
    t = 1
    while t * 2 <= m:
        t *= 2
    return t


@njit(cache=True)
def reset_state(iv, counts, fen_cnt, fen_mass, pool, pool_fen):
    iv[:] = 0
    counts[:] = 0
    fen_cnt[:] = 0
    fen_mass[:] = 0
    pool[:] = 0
    pool_fen[:] = 0
    iv[IV_CLS_TOP] = 1
    iv[IV_POOL_TOP] = 1


@njit(cache=True)
def _largest_class(counts, T):
    r = T
    while r > 0 and counts[r] == 0:
        r -= 1
    return r


@njit(cache=True, nogil=True, inline="always")
def advance(u, alpha, theta, iv, counts, fen_cnt, fen_mass, pool, pool_fen):
    """Place element n+1 using the uniform ``u`` in [0, 1).

    Returns 0 for a new block, otherwise the size r of the block that was
    joined (which becomes r+1).  The caller guarantees pool capacity.
    """
    T = fen_cnt.shape[0] - 1
    n = iv[IV_N]
    K = iv[IV_K]
    code = NEW_BLOCK
    new_block = True
    pool_slot = 0
    if n > 0:
        x = u * (n + theta)
        new_w = alpha * K + theta
        if x >= new_w:
            new_block = False
            t = x - new_w
            cls_w = iv[IV_CLS_MASS] - alpha * iv[IV_CLS_CNT]
            L = iv[IV_POOL_LEN]
            if (t < cls_w and iv[IV_CLS_CNT] > 0) or L == 0:
                pos = 0
                step = iv[IV_CLS_TOP]
                while step > 0:
                    nxt = pos + step
                    if nxt <= T:
                        w = fen_mass[nxt] - alpha * fen_cnt[nxt]
                        if w <= t:
                            pos = nxt
                            t -= w
                    step >>= 1
                code = pos + 1
                if code > T or counts[code] == 0:
                    # rounding at the upper edge of the class range
                    code = _largest_class(counts, T)
            else:
                t -= cls_w
                P = pool.shape[0] - 1
                pos = 0
                step = iv[IV_POOL_TOP]
                while step > 0:
                    nxt = pos + step
                    if nxt <= P:
                        c = min(nxt, L) - pos
                        if c < 0:
                            c = 0
                        w = pool_fen[nxt] - alpha * c
                        if w <= t:
                            pos = nxt
                            t -= w
                    step >>= 1
                pool_slot = pos + 1
                if pool_slot > L:
                    pool_slot = L
                code = pool[pool_slot]

    if new_block:
        iv[IV_K] = K + 1
        counts[1] += 1
        _fen_add(fen_cnt, 1, 1)
        _fen_add(fen_mass, 1, 1)
        iv[IV_CLS_CNT] += 1
        iv[IV_CLS_MASS] += 1
    elif pool_slot > 0:
        pool[pool_slot] += 1
        _fen_add(pool_fen, pool_slot, 1)
    else:
        r = code
        counts[r] -= 1
        _fen_add(fen_cnt, r, -1)
        _fen_add(fen_mass, r, -r)
        if r + 1 <= T:
            counts[r + 1] += 1
            _fen_add(fen_cnt, r + 1, 1)
            _fen_add(fen_mass, r + 1, r + 1)
            iv[IV_CLS_MASS] += 1
            if r + 1 >= 2 * iv[IV_CLS_TOP]:
                iv[IV_CLS_TOP] *= 2
        else:
            L = iv[IV_POOL_LEN] + 1
            iv[IV_POOL_LEN] = L
            pool[L] = r + 1
            _fen_add(pool_fen, L, r + 1)
            iv[IV_CLS_CNT] -= 1
            iv[IV_CLS_MASS] -= r
            if L >= 2 * iv[IV_POOL_TOP]:
                iv[IV_POOL_TOP] *= 2
    iv[IV_N] = n + 1
    return code


@njit(cache=True)
def count_of(r, counts, pool, L):
    """K_r read from the state (classes or pool)."""
    if r < counts.shape[0] - 1:
        return counts[r]
    c = 0
    for i in range(1, L + 1):
        if pool[i] == r:
            c += 1
    return c


@njit(cache=True, nogil=True)
def advance_many(st, steps, alpha, theta, iv, counts, fen_cnt, fen_mass, pool, pool_fen):
    """``steps`` calls of :func:`advance` fed from stream ``st``."""
    for _ in range(steps):
        advance(next_uniform(st), alpha, theta, iv, counts, fen_cnt, fen_mass, pool, pool_fen)


@njit(cache=True, nogil=True)
def run_full(alpha, theta, seed, lane, start, stop, checkpoints, tracked,
             class_cap, pool_cap, track_martingale,
             out_K, out_Kr, out_at, out_qp, out_qr, out_mg):
    """Run trajectories ``start..stop-1`` and write checkpoint rows.

    Row ``i - start`` of each output receives trajectory ``i``:
    ``out_K[row, c]`` is K at checkpoint c; ``out_Kr[row, c, j]`` is K_r for
    ``r = tracked[j]``; ``out_at`` / ``out_qp`` / ``out_qr`` hold A_{r,n}/b_{r,n}
    and the predictable / realized quadratic variation of M_{r,n} over
    b_{r,n}^2; ``out_mg[row, c, :]`` holds the predictable and realized
    quadratic variation of M_n (NaN unless ``track_martingale``).
    """
    iv = np.zeros(IV_WORDS, dtype=np.int64)
    counts = np.zeros(class_cap + 2, dtype=np.int64)
    fen_cnt = np.zeros(class_cap + 1, dtype=np.int64)
    fen_mass = np.zeros(class_cap + 1, dtype=np.int64)
    pool = np.zeros(pool_cap + 1, dtype=np.int64)
    pool_fen = np.zeros(pool_cap + 1, dtype=np.int64)
    st = np.zeros(STREAM_WORDS, dtype=np.uint64)
    ntr = tracked.shape[0]
    at = np.zeros(ntr)
    qp = np.zeros(ntr)
    qr = np.zeros(ntr)
    diff = np.zeros(ntr)
    beta = np.zeros(ntr)
    ncp = checkpoints.shape[0]
    n_end = checkpoints[ncp - 1]
    track_r = ntr > 0

    for i in range(start, stop):
        row = i - start
        reset_state(iv, counts, fen_cnt, fen_mass, pool, pool_fen)
        stream_init(st, np.uint64(seed), np.uint64(i), np.uint64(lane))
        at[:] = 0.0
        qp[:] = 0.0
        qr[:] = 0.0
        b = 1.0
        qv_pred = 0.0
        qv_real = 0.0
        ci = 0
        for n in range(n_end):
            u = next_uniform(st)
            if n == 0:
                advance(u, alpha, theta, iv, counts, fen_cnt, fen_mass, pool, pool_fen)
            else:
                nf = n + theta
                p_new = (alpha * iv[IV_K] + theta) / nf
                if track_r:
                    for j in range(ntr):
                        r = tracked[j]
                        if r == 1:
                            pr = p_new
                        else:
                            pr = (r - 1 - alpha) * counts[r - 1] / nf
                        q = (r - alpha) * counts[r] / nf
                        bt = (n - r + theta + alpha) / nf
                        d = pr - q
                        at[j] = bt * at[j] + pr
                        qp[j] = bt * bt * qp[j] + pr + q - d * d
                        diff[j] = d
                        beta[j] = bt
                code = advance(u, alpha, theta, iv, counts, fen_cnt, fen_mass, pool, pool_fen)
                if track_martingale:
                    b_next = b * nf / (nf + alpha)
                    b2 = b_next * b_next
                    xi = 1.0 if code == NEW_BLOCK else 0.0
                    qv_pred += b2 * p_new * (1.0 - p_new)
                    qv_real += b2 * (xi - p_new) * (xi - p_new)
                    b = b_next
                if track_r:
                    for j in range(ntr):
                        r = tracked[j]
                        dk = 0.0
                        if (code == NEW_BLOCK and r == 1) or (r >= 2 and code == r - 1):
                            dk += 1.0
                        if code == r:
                            dk -= 1.0
                        e = dk - diff[j]
                        qr[j] = beta[j] * beta[j] * qr[j] + e * e
            while ci < ncp and checkpoints[ci] == n + 1:
                out_K[row, ci] = iv[IV_K]
                for j in range(ntr):
                    out_Kr[row, ci, j] = count_of(tracked[j], counts, pool, iv[IV_POOL_LEN])
                    out_at[row, ci, j] = at[j]
                    out_qp[row, ci, j] = qp[j]
                    out_qr[row, ci, j] = qr[j]
                if track_martingale:
                    out_mg[row, ci, 0] = qv_pred
                    out_mg[row, ci, 1] = qv_real
                else:
                    out_mg[row, ci, 0] = np.nan
                    out_mg[row, ci, 1] = np.nan
                ci += 1
    return 0
