"""Data simulation, dataset ingestion, and result persistence.

Files are UTF-8 with LF newlines.  Numbers are serialized in shortest
round-trip decimal form so reruns with the same seed produce byte-identical
output.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model_core import DataSummary, summarize

__all__ = [
    "SimConfig",
    "simulate",
    "synthetic_summary",
    "read_dataset",
    "ResultRecord",
    "write_results",
    "CSV_FIELDS",
]


@dataclass(frozen=True)
class SimConfig:
    """Simulation protocol: n groups, r replicates, effects drawn with
    variance A_true around zero, observations with error variance V_true."""

    n: int
    r: int
    A_true: float
    V_true: float
    seed: int

    def __post_init__(self):
        if self.n < 2 or self.r < 1:
            raise ValueError(f"need n >= 2 and r >= 1, got n={self.n}, r={self.r}")
        if not (self.A_true > 0 and self.V_true > 0):
            raise ValueError(
                f"variances must be > 0, got A={self.A_true}, V={self.V_true}"
            )


def simulate(cfg: SimConfig, return_raw: bool = False):
    """Simulate a dataset and summarize it.

    Effects theta_i are iid Normal(0, A_true); observations are
    theta_i + Normal(0, V_true) noise.  Pure function of `cfg`.
    Returns the DataSummary, or (DataSummary, raw array) when
    `return_raw` is set.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    theta = rng.normal(0.0, math.sqrt(cfg.A_true), cfg.n)
    if cfg.r == 1:
        y = theta + rng.normal(0.0, math.sqrt(cfg.V_true), cfg.n)
    else:
        y = theta[:, None] + rng.normal(0.0, math.sqrt(cfg.V_true), (cfg.n, cfg.r))
    summary = summarize(y, cfg.r)
    if return_raw:
        return summary, y
    return summary


def synthetic_summary(
    n: int, r: int, delta_prime: float = 0.0, y_bar: float = 0.0
) -> DataSummary:
    """Deterministic summary with a prescribed group-mean spread.

    Group means sit at y_bar plus a mean-zero alternating pattern scaled so
    the spread statistic equals `delta_prime` exactly.  Used to evaluate
    contraction rates and run coupling checks on regime grids without
    materializing n*r observations.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if delta_prime < 0:
        raise ValueError(f"delta_prime must be >= 0, got {delta_prime}")
    if delta_prime == 0.0:
        gm = np.full(n, float(y_bar))
    else:
        e = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(n)])
        e -= e.mean()
        gm = y_bar + math.sqrt(delta_prime / float(np.sum(e * e))) * e
    return DataSummary(
        n=n, r=r, y_bar=float(y_bar), group_means=gm,
        delta=float(delta_prime), delta_prime=float(delta_prime),
    )


def read_dataset(path) -> DataSummary:
    """Read a dataset file and summarize it.

    One value per line (or a single CSV column) is the unreplicated layout;
    an n-by-r CSV matrix is the replicated layout.  Parse errors name the
    offending line.
    """
    path = Path(path)
    rows: list[list[float]] = []
    width: int | None = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(f.strip() == "" for f in fields):
                continue
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} values, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 groups, got {len(rows)}")
    arr = np.asarray(rows, dtype=float)
    if width == 1:
        return summarize(arr[:, 0], 1)
    return summarize(arr, width)


# ---------------------------------------------------------------------------
# Result records.
# ---------------------------------------------------------------------------

CSV_FIELDS = [
    "run_id", "model", "n", "r", "a", "b", "V", "w", "z", "l", "N", "seed",
    "s_hat", "s_se", "u_hat", "u_se", "gamma_formula", "gamma_empirical",
    "status",
]


@dataclass(frozen=True)
class ResultRecord:
    """One output row; unset fields serialize as empty cells."""

    run_id: str
    model: str
    n: int | None = None
    r: int | None = None
    a: float | None = None
    b: float | None = None
    V: float | None = None
    w: float | None = None
    z: float | None = None
    l: int | None = None
    N: int | None = None
    seed: int | None = None
    s_hat: float | None = None
    s_se: float | None = None
    u_hat: float | None = None
    u_se: float | None = None
    gamma_formula: float | None = None
    gamma_empirical: float | None = None
    status: str | None = None


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(records, path, config=None, timing_seconds=None, diagnostics=None) -> None:
    """Write records as CSV plus a JSON sidecar.

    The sidecar mirrors every field and adds wall-clock timing, the
    configuration echo, and any extra diagnostics; the CSV alone is the
    byte-stable artifact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for rec in records:
            row = asdict(rec)
            writer.writerow([_cell(row[name]) for name in CSV_FIELDS])
    sidecar = {
        "records": [asdict(rec) for rec in records],
        "timing_seconds": timing_seconds,
        "config": config,
    }
    if diagnostics is not None:
        sidecar["diagnostics"] = diagnostics
    with path.with_suffix(".json").open("w", newline="\n", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
