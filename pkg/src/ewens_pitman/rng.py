"""Counter-based random streams (Philox4x64-10) usable from numba kernels.

A stream is identified by ``(seed, index, lane)``.  The key is ``(seed, index)``
and the lane occupies the second counter word, so different lanes of the same
trajectory never overlap.  Output is bit-compatible with
``numpy.random.Philox(key=[seed, index], counter=[0, lane, 0, 0])``.
"""

import numpy as np
from numba import njit

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_MUL0 = np.uint64(0xD2E7470EE14C6C93)
_MUL1 = np.uint64(0xCA5A826395121157)
_WEYL0 = np.uint64(0x9E3779B97F4A7C15)
_WEYL1 = np.uint64(0xBB67AE8584CAA73B)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53

# stream layout: key0, key1, ctr0, ctr1, ctr2, ctr3, buf0..buf3, pos
STREAM_WORDS = 11
_POS = 10


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, lo


@njit(cache=True, inline="always")
def philox_block(c0, c1, c2, c3, k0, k1):
    """Ten Philox4x64 rounds on one counter block."""
    for i in range(10):
        if i > 0:
            k0 = k0 + _WEYL0
            k1 = k1 + _WEYL1
        hi0, lo0 = _mulhilo(_MUL0, c0)
        hi1, lo1 = _mulhilo(_MUL1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(cache=True)
def stream_init(st, seed, index, lane):
    st[0] = np.uint64(seed)
    st[1] = np.uint64(index)
    st[2] = _ZERO
    st[3] = np.uint64(lane)
    st[4] = _ZERO
    st[5] = _ZERO
    st[_POS] = np.uint64(4)


@njit(cache=True, inline="always")
def next_raw(st):
    pos = st[_POS]
    if pos >= np.uint64(4):
        st[2] += _ONE
        if st[2] == _ZERO:
            st[3] += _ONE
        b0, b1, b2, b3 = philox_block(st[2], st[3], st[4], st[5], st[0], st[1])
        st[6] = b0
        st[7] = b1
        st[8] = b2
        st[9] = b3
        pos = _ZERO
    st[_POS] = pos + _ONE
    return st[6 + np.int64(pos)]


@njit(cache=True, inline="always")
def next_uniform(st):
    """Uniform double on [0, 1) with 53 random bits."""
    return np.float64(next_raw(st) >> _S11) * _TO_UNIT


@njit(cache=True, inline="always")
def next_uniform_open(st):
    """Uniform double on (0, 1]."""
    return 1.0 - next_uniform(st)


def _as_u64(value):
    value = int(value)
    if not 0 <= value < 2**64:
        raise ValueError(f"seed/index must fit in 64 bits, got {value}")
    return value


class PhiloxStream:
    """Python handle on a counter-based stream.

    ``random()`` makes the object a drop-in uniform source for
    :func:`ewens_pitman.partition.step`; the underlying ``state`` array is what
    numba kernels consume.
    """

    def __init__(self, seed, index=0, lane=0):
        self.seed = _as_u64(seed)
        self.index = _as_u64(index)
        self.lane = _as_u64(lane)
        self.state = np.zeros(STREAM_WORDS, dtype=np.uint64)
        stream_init(self.state, np.uint64(self.seed), np.uint64(self.index), np.uint64(self.lane))

    def random(self):
        return float(next_uniform(self.state))

    def raw(self, size):
        return np.array([next_raw(self.state) for _ in range(size)], dtype=np.uint64)

    def __repr__(self):
        return f"PhiloxStream(seed={self.seed}, index={self.index}, lane={self.lane})"
