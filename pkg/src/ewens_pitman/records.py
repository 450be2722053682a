"""Per-checkpoint trajectory snapshots and fluctuation samples, with CSV/JSONL I/O."""

import contextlib
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, field

SCHEMA_VERSION = "1"


@dataclass
class TrajectoryRecord:
    """State of one trajectory at one checkpoint.

    Size-r quantities are keyed by r.  ``a_tilde[r]`` is A_{r,n}/b_{r,n} and
    ``qv_pred_r`` / ``qv_real_r`` are the predictable and realized quadratic
    variations of M_{r,n} divided by b_{r,n}^2.  The K_n martingale fields are
    NaN when alpha == 0.
    """

    trajectory_id: int
    n: int
    K: int
    K_r: dict = field(default_factory=dict)
    log_b_n: float = math.nan
    M_n: float = math.nan
    qv_pred: float = math.nan
    qv_real: float = math.nan
    log_b_r: dict = field(default_factory=dict)
    a_tilde: dict = field(default_factory=dict)
    qv_pred_r: dict = field(default_factory=dict)
    qv_real_r: dict = field(default_factory=dict)
    s_hat: float = math.nan

    def centered_r(self, r):
        """K_{r,n} - A_{r,n}/b_{r,n}, i.e. M_{r,n}/b_{r,n}."""
        return self.K_r[r] - self.a_tilde[r]

    def A_rn(self, r):
        return math.exp(self.log_b_r[r] + math.log(self.a_tilde[r])) if self.a_tilde[r] > 0 else 0.0

    def M_rn(self, r):
        return math.exp(self.log_b_r[r]) * self.centered_r(r)

    def flat(self):
        row = {
            "trajectory_id": self.trajectory_id,
            "n": self.n,
            "K": self.K,
            "log_b_n": self.log_b_n,
            "M_n": self.M_n,
            "qv_pred": self.qv_pred,
            "qv_real": self.qv_real,
            "s_hat": self.s_hat,
        }
        for r in sorted(self.K_r):
            row[f"K_{r}"] = self.K_r[r]
            if r in self.a_tilde:
                row[f"log_b_{r}"] = self.log_b_r[r]
                row[f"a_tilde_{r}"] = self.a_tilde[r]
                row[f"qv_pred_{r}"] = self.qv_pred_r[r]
                row[f"qv_real_{r}"] = self.qv_real_r[r]
        return row

    def to_json(self):
        d = asdict(self)
        for key in ("K_r", "log_b_r", "a_tilde", "qv_pred_r", "qv_real_r"):
            d[key] = {str(k): v for k, v in d[key].items()}
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        for key in ("K_r", "log_b_r", "a_tilde", "qv_pred_r", "qv_real_r"):
            d[key] = {int(k): v for k, v in d.get(key, {}).items()}
        return cls(**d)


FLUCTUATION_KINDS = (
    "clt_Kn_self_norm",
    "clt_Kn_mixed",
    "clt_Krn_self_norm",
    "clt_Krn_mixed",
    "lil_ratio",
)


@dataclass(frozen=True)
class FluctuationSample:
    kind: str
    value: float
    trajectory_id: int = -1
    n: int = 0
    r: int = 0
    valid: bool = True

    def __post_init__(self):
        if self.kind not in FLUCTUATION_KINDS:
            raise ValueError(f"unknown fluctuation kind {self.kind!r}")
        if self.valid and not math.isfinite(self.value):
            raise ValueError("valid fluctuation samples must be finite")


@contextlib.contextmanager
def open_output(dest):
    """Yield a text handle for a path, an open file, or stdout (None or "-")."""
    if dest is None or dest == "-":
        yield sys.stdout
    elif hasattr(dest, "write"):
        yield dest
    else:
        with open(dest, "w", newline="") as fh:
            yield fh


def _header_comment(fh, meta):
    fh.write(f"# ewens_pitman schema {SCHEMA_VERSION}")
    for key, value in (meta or {}).items():
        fh.write(f" {key}={value}")
    fh.write("\n")


def write_records_csv(path, records, meta=None):
    records = list(records)
    columns = []
    for rec in records:
        for key in rec.flat():
            if key not in columns:
                columns.append(key)
    with open_output(path) as fh:
        _header_comment(fh, meta)
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.flat())


def write_records_jsonl(path, records, meta=None):
    with open_output(path) as fh:
        if meta is not None:
            fh.write(json.dumps({"schema": SCHEMA_VERSION, "meta": meta}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_json()) + "\n")


def read_records_jsonl(path):
    out = []
    with open(path) as fh:
        for line in fh:
            d = json.loads(line)
            if "schema" in d and "meta" in d:
                continue
            out.append(TrajectoryRecord.from_json(d))
    return out


def read_csv_rows(path):
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_samples_csv(path, samples, meta=None):
    with open_output(path) as fh:
        _header_comment(fh, meta)
        writer = csv.writer(fh)
        writer.writerow(["trajectory_id", "kind", "n", "r", "value", "valid_flag"])
        for s in samples:
            writer.writerow([s.trajectory_id, s.kind, s.n, s.r, s.value, int(s.valid)])
