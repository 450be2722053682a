"""Streaming sampler of the Ewens-Pitman sequential construction.

Element n+1 opens a new block with probability (alpha*K_n + theta)/(n + theta)
and joins a given block of size r with probability (r - alpha)/(n + theta).
Only size-class counts K_{r,n} are kept; block labels are never stored.

Two engines share one stream convention keyed by (seed, trajectory index):

* :func:`simulate_batch` steps every element and tracks the martingale
  accumulators of any size classes requested.
* :func:`simulate_counts` jumps straight between the steps that change
  (K_n, K_{1,n}, ..., K_{R,n}) and is the engine for 10^6 to 10^8 horizons.

They use different stream lanes, so their trajectories are independent draws
with the same law, not the same paths.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from ._skip import SKIP_LANE, run_skip
from .exactmath import log_b_block, log_b_size
from .parallel import run_ranges
from .records import TrajectoryRecord

DEFAULT_CLASS_CAPACITY = 4096
MAX_HORIZON = 10**8


@dataclass(frozen=True)
class StepOutcome:
    """Result of one step: ``kind`` is ``"new_block"`` or ``"join"``; ``r`` is
    the size of the joined block before the join."""

    kind: str
    r: int = 0

    @property
    def delta_K(self):
        return 1 if self.kind == "new_block" else 0

    @property
    def delta_Kr(self):
        if self.kind == "new_block":
            return {1: 1}
        return {self.r: -1, self.r + 1: 1}

    def xi(self, r=None):
        """Increment of K_n (``r=None``) or of K_{r,n}."""
        if r is None:
            return self.delta_K
        return self.delta_Kr.get(r, 0)


@dataclass(frozen=True)
class TransitionProbs:
    p_new: float
    p_join: dict

    def total(self):
        return self.p_new + math.fsum(self.p_join.values())


class PartitionState:
    """Mutable partition state backed by the numba Fenwick layout.

    Size classes up to ``class_capacity`` sit in the class trees; larger blocks
    sit in the overflow pool, which grows on demand.
    """

    def __init__(self, params, class_capacity=DEFAULT_CLASS_CAPACITY, pool_capacity=16):
        self.params = params
        self.iv = np.zeros(kern.IV_WORDS, dtype=np.int64)
        self.counts = np.zeros(class_capacity + 2, dtype=np.int64)
        self.fen_cnt = np.zeros(class_capacity + 1, dtype=np.int64)
        self.fen_mass = np.zeros(class_capacity + 1, dtype=np.int64)
        self.pool = np.zeros(pool_capacity + 1, dtype=np.int64)
        self.pool_fen = np.zeros(pool_capacity + 1, dtype=np.int64)
        kern.reset_state(self.iv, self.counts, self.fen_cnt, self.fen_mass, self.pool, self.pool_fen)

    @property
    def class_capacity(self):
        return self.fen_cnt.shape[0] - 1

    @property
    def n(self):
        return int(self.iv[kern.IV_N])

    @property
    def k_blocks(self):
        return int(self.iv[kern.IV_K])

    @property
    def pool_sizes(self):
        return self.pool[1 : self.iv[kern.IV_POOL_LEN] + 1]

    @property
    def size_counts(self):
        """Sparse map r -> K_{r,n} over occupied sizes."""
        T = self.class_capacity
        out = {int(r): int(self.counts[r]) for r in np.flatnonzero(self.counts[1 : T + 1]) + 1}
        for s in self.pool_sizes:
            out[int(s)] = out.get(int(s), 0) + 1
        return out

    def K_r(self, r):
        return self.size_counts.get(r, 0)

    @property
    def total_weight(self):
        """Total join weight, n - alpha*K_n."""
        a = self.params.alpha
        cls = float(self.iv[kern.IV_CLS_MASS]) - a * float(self.iv[kern.IV_CLS_CNT])
        L = int(self.iv[kern.IV_POOL_LEN])
        return cls + float(self.pool_sizes.sum()) - a * L

    def check_invariants(self):
        sc = self.size_counts
        if sum(r * c for r, c in sc.items()) != self.n:
            raise AssertionError("sum of r*K_r differs from n")
        if sum(sc.values()) != self.k_blocks:
            raise AssertionError("sum of K_r differs from K")
        if not sc.get(1, 0) <= self.k_blocks <= self.n:
            raise AssertionError("K_1 <= K <= n violated")
        T = self.class_capacity
        for r in range(1, T + 1):
            if self.counts[r] < 0:
                raise AssertionError("negative class count")
        expect = self.n - self.params.alpha * self.k_blocks
        if abs(self.total_weight - expect) > 1e-9 * max(1.0, self.n):
            raise AssertionError("weight index total differs from n - alpha*K")
        return True

    def _ensure_pool_room(self, extra=1):
        L = int(self.iv[kern.IV_POOL_LEN])
        if L + extra <= self.pool.shape[0] - 1:
            return
        cap = max(2 * (self.pool.shape[0] - 1), L + extra)
        pool = np.zeros(cap + 1, dtype=np.int64)
        pool[: L + 1] = self.pool[: L + 1]
        pool_fen = np.zeros(cap + 1, dtype=np.int64)
        for i in range(1, L + 1):
            j = i
            while j <= cap:
                pool_fen[j] += pool[i]
                j += j & -j
        self.pool = pool
        self.pool_fen = pool_fen

    def copy(self):
        other = PartitionState.__new__(PartitionState)
        other.params = self.params
        for name in ("iv", "counts", "fen_cnt", "fen_mass", "pool", "pool_fen"):
            setattr(other, name, getattr(self, name).copy())
        return other

    def __repr__(self):
        return f"PartitionState(n={self.n}, K={self.k_blocks}, size_counts={self.size_counts})"


def new_state(params, class_capacity=DEFAULT_CLASS_CAPACITY):
    """Empty partition; the first step always opens a block."""
    return PartitionState(params, class_capacity=class_capacity)


def transition_probs(state, params=None):
    params = state.params if params is None else params
    n = state.n
    if n < 1:
        raise ValueError("transition probabilities are defined for n >= 1")
    a, t = params.alpha, params.theta
    den = n + t
    return TransitionProbs(
        p_new=(a * state.k_blocks + t) / den,
        p_join={r: (r - a) * c / den for r, c in sorted(state.size_counts.items())},
    )


def step(state, rng):
    """Advance ``state`` in place by one element using ``rng.random()``."""
    state._ensure_pool_room()
    p = state.params
    code = kern.advance(
        float(rng.random()), p.alpha, p.theta, state.iv, state.counts,
        state.fen_cnt, state.fen_mass, state.pool, state.pool_fen,
    )
    if code == kern.NEW_BLOCK:
        return StepOutcome("new_block")
    return StepOutcome("join", int(code))


def advance_many(state, rng, steps):
    """Advance ``state`` by ``steps`` elements in compiled code.

    ``rng`` must be a :class:`~ewens_pitman.rng.PhiloxStream`; the draws are
    the same ones ``steps`` calls of :func:`step` would consume.
    """
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    # each overflow block holds more than T elements
    state._ensure_pool_room((state.n + steps) // (state.class_capacity + 1) + 1 - int(state.iv[kern.IV_POOL_LEN]))
    p = state.params
    kern.advance_many(rng.state, steps, p.alpha, p.theta, state.iv, state.counts,
                      state.fen_cnt, state.fen_mass, state.pool, state.pool_fen)
    return state


# --------------------------------------------------------------------------
# batch engines


def _checkpoint_array(checkpoints):
    cps = np.asarray([int(c) for c in checkpoints], dtype=np.int64)
    if cps.size == 0:
        raise ValueError("at least one checkpoint is required")
    if cps[0] < 1 or np.any(np.diff(cps) <= 0):
        raise ValueError("checkpoints must be strictly increasing positive integers")
    if cps[-1] > MAX_HORIZON:
        raise ValueError(f"checkpoints must not exceed {MAX_HORIZON}")
    return cps


@dataclass
class FullBatch:
    """Checkpoint arrays from :func:`simulate_batch`.

    Axis 0 is the trajectory (ids ``start .. start+trials-1``), axis 1 the
    checkpoint, axis 2 (where present) the tracked size r.
    """

    params: object
    seed: int
    start: int
    checkpoints: np.ndarray
    tracked: np.ndarray
    K: np.ndarray
    K_r: np.ndarray
    a_tilde: np.ndarray
    qv_pred_r: np.ndarray
    qv_real_r: np.ndarray
    qv_mg: np.ndarray
    _log_b: dict = field(default_factory=dict, repr=False)

    def column(self, r):
        return int(np.flatnonzero(self.tracked == r)[0])

    def log_b(self, n, r=None):
        key = (n, r)
        if key not in self._log_b:
            self._log_b[key] = log_b_block(self.params, n) if r is None else log_b_size(self.params, n, r)
        return self._log_b[key]

    def records(self, row):
        """TrajectoryRecords of trajectory ``start + row``."""
        a, t = self.params.alpha, self.params.theta
        out = []
        for c, n in enumerate(self.checkpoints):
            n = int(n)
            K = int(self.K[row, c])
            rec = TrajectoryRecord(trajectory_id=self.start + row, n=n, K=K)
            if a > 0:
                rec.log_b_n = self.log_b(n)
                rec.M_n = math.exp(rec.log_b_n) * (K + t / a)
                rec.qv_pred = float(self.qv_mg[row, c, 0])
                rec.qv_real = float(self.qv_mg[row, c, 1])
            for j, r in enumerate(self.tracked):
                r = int(r)
                rec.K_r[r] = int(self.K_r[row, c, j])
                rec.log_b_r[r] = self.log_b(n, r)
                rec.a_tilde[r] = float(self.a_tilde[row, c, j])
                rec.qv_pred_r[r] = float(self.qv_pred_r[row, c, j])
                rec.qv_real_r[r] = float(self.qv_real_r[row, c, j])
            out.append(rec)
        return out


def simulate_batch(params, checkpoints, seed, trials, tracked_r=(), *, start=0,
                   track_martingale=None, class_capacity=None, workers=None):
    """Step ``trials`` full trajectories (ids start..start+trials-1)."""
    cps = _checkpoint_array(checkpoints)
    tracked = np.asarray(sorted(set(int(r) for r in tracked_r)), dtype=np.int64)
    if tracked.size and tracked[0] < 1:
        raise ValueError("tracked sizes must be >= 1")
    n_end = int(cps[-1])
    T = class_capacity or min(DEFAULT_CLASS_CAPACITY, max(n_end, 1))
    T = max(T, int(tracked.max()) if tracked.size else 1)
    pool_cap = n_end // (T + 1) + 1
    if track_martingale is None:
        track_martingale = params.alpha > 0
    trials = int(trials)
    ncp, ntr = cps.size, tracked.size
    out_K = np.zeros((trials, ncp), dtype=np.int64)
    out_Kr = np.zeros((trials, ncp, ntr), dtype=np.int64)
    out_at = np.zeros((trials, ncp, ntr))
    out_qp = np.zeros((trials, ncp, ntr))
    out_qr = np.zeros((trials, ncp, ntr))
    out_mg = np.zeros((trials, ncp, 2))

    def work(lo, hi):
        sl = slice(lo, hi)
        kern.run_full(
            params.alpha, params.theta, np.uint64(seed), np.uint64(kern.FULL_LANE),
            start + lo, start + hi, cps, tracked, T, pool_cap, bool(track_martingale),
            out_K[sl], out_Kr[sl], out_at[sl], out_qp[sl], out_qr[sl], out_mg[sl],
        )

    run_ranges(work, trials, workers)
    return FullBatch(params, int(seed), int(start), cps, tracked, out_K, out_Kr,
                     out_at, out_qp, out_qr, out_mg)


@dataclass
class CountBatch:
    """K and K_1..K_R at each checkpoint from :func:`simulate_counts`."""

    params: object
    seed: int
    start: int
    checkpoints: np.ndarray
    K: np.ndarray
    K_r: np.ndarray

    def at(self, n):
        c = int(np.flatnonzero(self.checkpoints == n)[0])
        return self.K[:, c]

    def K_r_at(self, n, r):
        c = int(np.flatnonzero(self.checkpoints == n)[0])
        return self.K_r[:, c, r - 1]


def simulate_counts(params, checkpoints, seed, trials, R=0, *, start=0, workers=None):
    """Event-driven trajectories of (K, K_1..K_R); exact in law."""
    cps = _checkpoint_array(checkpoints)
    R = int(R)
    if R < 0:
        raise ValueError("R must be >= 0")
    trials = int(trials)
    out_K = np.zeros((trials, cps.size), dtype=np.int64)
    out_Kr = np.zeros((trials, cps.size, R), dtype=np.int64)

    def work(lo, hi):
        run_skip(params.alpha, params.theta, np.uint64(seed), np.uint64(SKIP_LANE),
                 start + lo, start + hi, cps, R, out_K[lo:hi], out_Kr[lo:hi])

    run_ranges(work, trials, workers)
    return CountBatch(params, int(seed), int(start), cps, out_K, out_Kr)


def simulate(params, checkpoints, seed, tracked_r=(1,), trajectory=0):
    """One trajectory; a TrajectoryRecord at each checkpoint."""
    batch = simulate_batch(params, checkpoints, seed, 1, tracked_r, start=trajectory, workers=1)
    return batch.records(0)
