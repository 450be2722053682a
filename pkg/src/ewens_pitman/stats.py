"""Monte Carlo experiments against exact references.

Every reference value in a result is produced by a named function in
:mod:`ewens_pitman.exactmath` called with the experiment's parameters, and is
recorded alongside the function name so it can be recomputed.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import exactmath as em
from . import martingale as mg
from ._version import version_string
from .params import ModelParams
from .partition import simulate_batch, simulate_counts
from .records import open_output

KINDS = ("moments", "clt_kn", "clt_krn", "lil", "shat_moments", "cross_moments", "alpha_estimator")

# calibration choices; the theorems are asymptotic
Z_TOL = 4.0
SHAT_REL_TOL = 0.05
MIXED_VAR_REL_TOL = 0.10
CROSS_REL_TOL = 0.10
KS_D_KRN = 0.05
KS_D_KN = 0.06
LIL_BAND = (0.2, 2.0)
LIL_FRACTION = 0.9
ALPHA_ABS_TOL = 0.02

_KOLMOGOROV_TERMS = 100


class ExperimentError(RuntimeError):
    """A trajectory produced an impossible state; carries (seed, index)."""

    def __init__(self, message, seed, index):
        super().__init__(f"{message} (seed={seed}, trajectory={index})")
        self.seed = seed
        self.index = index


# --------------------------------------------------------------------------
# basic estimators


def normal_cdf(x):
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def kolmogorov_sf(lam):
    """P(sup|B| > lam) for the Brownian bridge, both series truncated at 100 terms."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small arguments
        s = sum(math.exp(-((2 * j - 1) ** 2) * math.pi**2 / (8.0 * lam * lam)) for j in range(1, _KOLMOGOROV_TERMS + 1))
        p = 1.0 - math.sqrt(2.0 * math.pi) / lam * s
    else:
        p = 2.0 * sum((-1) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam) for j in range(1, _KOLMOGOROV_TERMS + 1))
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class KSResult:
    D: float
    p: float
    m: int

    def __iter__(self):
        return iter((self.D, self.p))


def ks_statistic(samples):
    """One-sample Kolmogorov-Smirnov distance to N(0,1) and asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    if m < 8:
        raise ValueError(f"KS test needs at least 8 samples, got {m}")
    cdf = np.array([normal_cdf(v) for v in x])
    i = np.arange(1, m + 1)
    D = float(max(np.max(i / m - cdf), np.max(cdf - (i - 1) / m)))
    sm = math.sqrt(m)
    return KSResult(D, kolmogorov_sf((sm + 0.12 + 0.11 / sm) * D), m)


def moment_estimate(samples, p=1):
    """Mean of x^p and its standard error sd/sqrt(m)."""
    x = np.asarray(samples, dtype=float) ** int(p)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


# --------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    trials: int
    checkpoints: tuple
    kind: str = "moments"
    tracked_r: tuple = ()
    seed: int = 0
    moments: tuple = (1, 2)
    horizon: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        cps = tuple(int(c) for c in self.checkpoints)
        if not cps or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1:
            raise ValueError("checkpoints must be strictly increasing positive integers")
        object.__setattr__(self, "checkpoints", cps)
        object.__setattr__(self, "tracked_r", tuple(int(r) for r in self.tracked_r))
        object.__setattr__(self, "moments", tuple(int(p) for p in self.moments))

    def to_json(self):
        d = asdict(self)
        d["params"] = {"alpha": self.params.alpha, "theta": self.params.theta}
        return d


@dataclass
class ResultRow:
    quantity: str
    n: int
    estimate: float
    stderr: float = math.nan
    reference: float = math.nan
    reference_fn: str = ""
    z: float = math.nan
    rel_error: float = math.nan
    ks_D: float = math.nan
    ks_p: float = math.nan
    excluded: int = 0
    criterion: str = ""
    passed: bool = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(r.passed for r in self.rows if r.passed is not None)

    def row(self, quantity, n=None):
        for r in self.rows:
            if r.quantity == quantity and (n is None or r.n == n):
                return r
        raise KeyError((quantity, n))

    def to_json(self):
        return {
            "version": version_string(),
            "config": self.config.to_json(),
            "seed": self.config.seed,
            "meta": self.meta,
            "passed": self.passed,
            "rows": [asdict(r) for r in self.rows],
        }

    def write_json(self, dest):
        with open_output(dest) as fh:
            json.dump(self.to_json(), fh, indent=2, default=_json_default)
            fh.write("\n")

    def write_csv(self, dest):
        columns = list(ResultRow.__dataclass_fields__)
        with open_output(dest) as fh:
            fh.write(f"# ewens_pitman {version_string()} kind={self.config.kind} seed={self.config.seed} "
                     f"alpha={self.config.params.alpha} theta={self.config.params.theta} trials={self.config.trials}\n")
            w = csv.writer(fh)
            w.writerow(columns)
            for r in self.rows:
                w.writerow([getattr(r, c) for c in columns])


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(type(obj))


def _z_row(quantity, n, samples, reference, reference_fn, p=1):
    est, se = moment_estimate(samples, p)
    z = (est - reference) / se if se > 0 else (0.0 if est == reference else math.inf)
    return ResultRow(quantity, n, est, se, reference, reference_fn, z=z,
                     rel_error=_rel(est, reference), criterion=f"|z| <= {Z_TOL}", passed=bool(abs(z) <= Z_TOL))


def _rel(est, ref):
    return abs(est - ref) / abs(ref) if ref else math.nan


def _rel_row(quantity, n, est, se, reference, reference_fn, tol):
    rel = _rel(est, reference)
    return ResultRow(quantity, n, est, se, reference, reference_fn, z=(est - reference) / se if se > 0 else math.nan,
                     rel_error=rel, criterion=f"relative error <= {tol}", passed=bool(rel <= tol))


def _check_states(K, seed, start=0):
    bad = np.flatnonzero((K < 1).any(axis=1)) if K.ndim == 2 else np.flatnonzero(K < 1)
    if bad.size:
        raise ExperimentError("trajectory with no blocks", seed, start + int(bad[0]))


def _horizon(cfg, n):
    return int(cfg.horizon) if cfg.horizon else mg.shat_horizon(n, cfg.params)


def run_experiment(config, workers=None):
    """Run ``config`` and compare with exact references; deterministic in ``config``."""
    runner = _RUNNERS[config.kind]
    result = ExperimentResult(config, meta={
        "tolerances": {
            "z": Z_TOL, "shat_rel": SHAT_REL_TOL, "mixed_var_rel": MIXED_VAR_REL_TOL,
            "cross_rel": CROSS_REL_TOL, "ks_D_krn": KS_D_KRN, "ks_D_kn": KS_D_KN,
            "lil_band": LIL_BAND, "lil_fraction": LIL_FRACTION, "alpha_abs": ALPHA_ABS_TOL,
        },
        "version": version_string(),
    })
    runner(config, result, workers)
    return result


def _run_moments(cfg, result, workers):
    p = cfg.params
    batch = simulate_batch(p, cfg.checkpoints, cfg.seed, cfg.trials, cfg.tracked_r,
                           track_martingale=False, workers=workers)
    _check_states(batch.K, cfg.seed)
    exact = p.alpha > 0
    for c, n in enumerate(cfg.checkpoints):
        for q in cfg.moments:
            K = batch.K[:, c]
            if exact:
                result.rows.append(_z_row(f"E[K_n^{q}]", n, K, em.raw_moment_Kn(p, n, q), "raw_moment_Kn", q))
            else:
                est, se = moment_estimate(K, q)
                result.rows.append(ResultRow(f"E[K_n^{q}]", n, est, se))
        for j, r in enumerate(batch.tracked):
            for q in cfg.moments:
                Kr = batch.K_r[:, c, j]
                if exact:
                    result.rows.append(_z_row(f"E[K_{r},n^{q}]", n, Kr, em.raw_moment_Krn(p, n, int(r), q),
                                              "raw_moment_Krn", q))
                else:
                    est, se = moment_estimate(Kr, q)
                    result.rows.append(ResultRow(f"E[K_{r},n^{q}]", n, est, se))


def _run_clt_krn(cfg, result, workers):
    p = cfg.params.require_positive_alpha()
    tracked = cfg.tracked_r or (1,)
    batch = simulate_batch(p, cfg.checkpoints, cfg.seed, cfg.trials, tracked, workers=workers)
    _check_states(batch.K, cfg.seed)
    ES = em.limit_moment_S(p, 1)
    for c, n in enumerate(cfg.checkpoints):
        for j, r in enumerate(batch.tracked):
            r = int(r)
            vals, excluded = mg.clt_values_Krn(batch.K_r[:, c, j], batch.a_tilde[:, c, j], n, p)
            ks = ks_statistic(vals)
            result.rows.append(ResultRow(f"KS clt_Krn_self_norm r={r}", n, ks.D, ks_D=ks.D, ks_p=ks.p,
                                         excluded=excluded, criterion=f"D <= {KS_D_KRN}",
                                         passed=bool(ks.D <= KS_D_KRN)))
            mixed, _ = mg.clt_values_Krn(batch.K_r[:, c, j], batch.a_tilde[:, c, j], n, p, "mixed")
            var, se = _variance(mixed)
            ref = em.p_alpha(p.alpha, r) * ES
            result.rows.append(_rel_row(f"Var clt_Krn_mixed r={r}", n, var, se, ref,
                                        "p_alpha*limit_moment_S(1)", MIXED_VAR_REL_TOL))


def _variance(x):
    x = np.asarray(x, dtype=float)
    m = x.size
    var = float(x.var(ddof=1))
    # delta-method standard error of the sample variance
    c = x - x.mean()
    m4 = float(np.mean(c**4))
    se = math.sqrt(max(m4 - var * var, 0.0) / m)
    return var, se


def _run_clt_kn(cfg, result, workers):
    p = cfg.params.require_positive_alpha()
    n_last = cfg.checkpoints[-1]
    N = max(_horizon(cfg, n_last), n_last)
    cps = list(cfg.checkpoints) + ([N] if N > n_last else [])
    batch = simulate_counts(p, cps, cfg.seed, cfg.trials, R=0, workers=workers)
    _check_states(batch.K, cfg.seed)
    s_hat = mg.s_hat_values(batch.K[:, -1], N, p)
    result.meta["shat_horizon"] = N
    ES = em.limit_moment_S(p, 1)
    for c, n in enumerate(cfg.checkpoints):
        K = batch.K[:, c]
        result.meta.setdefault("shat_bias_scale", {})[n] = (n / N) ** (p.alpha / 2)
        ks = ks_statistic(mg.clt_values_Kn(K, s_hat, n, p))
        result.rows.append(ResultRow("KS clt_Kn_self_norm", n, ks.D, ks_D=ks.D, ks_p=ks.p,
                                     criterion=f"D <= {KS_D_KN}", passed=bool(ks.D <= KS_D_KN)))
        var, se = _variance(mg.clt_values_Kn(K, s_hat, n, p, "mixed"))
        result.rows.append(_rel_row("Var clt_Kn_mixed", n, var, se, ES, "limit_moment_S(1)", MIXED_VAR_REL_TOL))


def _run_lil(cfg, result, workers):
    p = cfg.params.require_positive_alpha()
    n_last = cfg.checkpoints[-1]
    N = max(_horizon(cfg, n_last), n_last)
    grid = [n for n in mg.lil_checkpoints(n_last)]
    if grid[-1] != n_last:
        grid.append(n_last)
    cps = grid + ([N] if N > n_last else [])
    batch = simulate_counts(p, cps, cfg.seed, cfg.trials, R=0, workers=workers)
    _check_states(batch.K, cfg.seed)
    s_hat = mg.s_hat_values(batch.K[:, -1], N, p)
    lo, hi = LIL_BAND
    finals = np.empty(cfg.trials)
    inside = 0
    for i in range(cfg.trials):
        series = mg.lil_tracker(grid, batch.K[i, : len(grid)], p, s_hat=s_hat[i])
        finals[i] = series.final_max / s_hat[i]
        inside += lo <= finals[i] <= hi
    frac = inside / cfg.trials
    result.meta["shat_horizon"] = N
    result.meta["lil_final_max_over_shat"] = finals.tolist()
    result.rows.append(ResultRow("fraction of running LIL max in band", n_last, frac,
                                 criterion=f">= {LIL_FRACTION} within [{lo}, {hi}] x S_hat",
                                 passed=bool(frac >= LIL_FRACTION)))


def _run_shat_moments(cfg, result, workers):
    p = cfg.params.require_positive_alpha()
    N = cfg.horizon or cfg.checkpoints[-1]
    batch = simulate_counts(p, [N], cfg.seed, cfg.trials, R=0, workers=workers)
    _check_states(batch.K, cfg.seed)
    s_hat = mg.s_hat_values(batch.K[:, 0], N, p)
    for q in cfg.moments:
        est, se = moment_estimate(s_hat, q)
        result.rows.append(_rel_row(f"E[S_hat^{q}]", N, est, se, em.limit_moment_S(p, q),
                                    "limit_moment_S", SHAT_REL_TOL))


def _run_cross_moments(cfg, result, workers):
    p = cfg.params.require_positive_alpha()
    n = cfg.checkpoints[0]
    N = max(_horizon(cfg, n), n)
    tracked = cfg.tracked_r or (1,)
    batch = simulate_counts(p, sorted({n, N}), cfg.seed, cfg.trials, R=max(tracked), workers=workers)
    _check_states(batch.K, cfg.seed)
    s_hat = mg.s_hat_values(batch.K[:, -1], N, p)
    result.meta["shat_horizon"] = N
    prod = batch.K[:, 0] * s_hat
    est, se = moment_estimate(prod)
    result.rows.append(_rel_row("E[K_n S_hat]", n, est, se, em.cross_moment_KnS(p, n), "cross_moment_KnS",
                                CROSS_REL_TOL))
    for r in tracked:
        est, se = moment_estimate(batch.K_r[:, 0, r - 1] * s_hat)
        result.rows.append(_rel_row(f"E[K_{r},n S_hat]", n, est, se, em.cross_moment_KrnS(p, n, r),
                                    "cross_moment_KrnS", CROSS_REL_TOL))


def _run_alpha_estimator(cfg, result, workers):
    p = cfg.params
    batch = simulate_counts(p, cfg.checkpoints, cfg.seed, cfg.trials, R=1, workers=workers)
    _check_states(batch.K, cfg.seed)
    for c, n in enumerate(cfg.checkpoints):
        est_each = batch.K_r[:, c, 0] / batch.K[:, c]
        est, se = moment_estimate(est_each)
        err = abs(est - p.alpha)
        result.rows.append(ResultRow("mean K_1,n/K_n", n, est, se, p.alpha, "alpha", rel_error=err,
                                     criterion=f"|estimate - alpha| <= {ALPHA_ABS_TOL}",
                                     passed=bool(err <= ALPHA_ABS_TOL)))


_RUNNERS = {
    "moments": _run_moments,
    "clt_kn": _run_clt_kn,
    "clt_krn": _run_clt_krn,
    "lil": _run_lil,
    "shat_moments": _run_shat_moments,
    "cross_moments": _run_cross_moments,
    "alpha_estimator": _run_alpha_estimator,
}
