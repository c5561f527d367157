"""Hit-rate comparison between guided and baseline runs."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from statistics import fmean


@dataclass(frozen=True)
class ComparisonRow:
    target: str
    agent_runs: tuple[float, ...]
    baseline_runs: tuple[float, ...]
    avg_diff: float
    omega: float | None
    omega_flag: str | None = None
    dist: int | None = None
    id: str | None = None

    def to_json(self) -> dict:
        omega = self.omega
        if omega is not None and math.isinf(omega):
            omega = "inf"
        return {
            "id": self.id,
            "target": self.target,
            "dist": self.dist,
            "agent_runs": list(self.agent_runs),
            "baseline_runs": list(self.baseline_runs),
            "avg_diff": round(self.avg_diff, 6),
            "omega": omega if not isinstance(omega, float) else round(omega, 6),
            "omega_flag": self.omega_flag,
        }


@dataclass(frozen=True)
class Summary:
    n_rows: int
    n_diff_gt_10: int
    n_underperform: int
    n_omega_ge_10pct: int

    def to_json(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_diff_gt_10": self.n_diff_gt_10,
            "n_underperform": self.n_underperform,
            "n_omega_ge_10pct": self.n_omega_ge_10pct,
        }


def compare_runs(
    agent_runs: Sequence[float], baseline_runs: Sequence[float], target: str = "", **extra
) -> ComparisonRow:
    """Avg Diff and omega for one target; hit rates in percent.

    With a zero baseline mean omega is +inf (flagged) when the agent is
    ahead and None (flagged undefined) otherwise.
    """
    if not agent_runs or not baseline_runs:
        raise ValueError("both run lists must be non-empty")
    base = fmean(baseline_runs)
    diff = fmean(agent_runs) - base
    flag = None
    if base > 0:
        omega: float | None = diff / base
    elif diff > 0:
        omega, flag = math.inf, "infinite"
    else:
        omega, flag = None, "undefined"
    return ComparisonRow(target, tuple(agent_runs), tuple(baseline_runs), diff, omega, flag, **extra)


def summarize(rows: Sequence[ComparisonRow], diff_threshold: float = 10.0, omega_threshold: float = 0.10) -> Summary:
    return Summary(
        n_rows=len(rows),
        n_diff_gt_10=sum(r.avg_diff > diff_threshold for r in rows),
        n_underperform=sum(r.avg_diff < 0 for r in rows),
        n_omega_ge_10pct=sum(r.omega is not None and r.omega >= omega_threshold for r in rows),
    )


def load_table(source: str | Path | io.TextIOBase) -> list[ComparisonRow]:
    """Read a per-target CSV with ``agent_*`` and ``baseline_*`` run columns."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_table(fh)
    reader = csv.DictReader(source)
    if not reader.fieldnames:
        raise ValueError("empty table")
    agent_cols = [c for c in reader.fieldnames if c.startswith("agent_")]
    base_cols = [c for c in reader.fieldnames if c.startswith("baseline_")]
    if not agent_cols or not base_cols:
        raise ValueError("table needs agent_* and baseline_* columns")
    rows = []
    for rec in reader:
        dist = rec.get("dist")
        rows.append(
            compare_runs(
                [float(rec[c]) for c in agent_cols],
                [float(rec[c]) for c in base_cols],
                target=rec.get("target", ""),
                dist=int(dist) if dist else None,
                id=rec.get("id"),
            )
        )
    if not rows:
        raise ValueError("table has no rows")
    return rows


def reported_avg_diff(source: str | Path | io.TextIOBase) -> list[float | None]:
    """The ``avg_diff`` column as printed, when the table carries one."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return reported_avg_diff(fh)
    return [float(r["avg_diff"]) if r.get("avg_diff") else None for r in csv.DictReader(source)]


def table1_path() -> Path:
    return Path(str(resources.files("dirfuzz") / "data" / "table1.csv"))
