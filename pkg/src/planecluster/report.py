"""Run reports: per-cluster deviation statistics and a versioned JSON document."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DeviationKind, PlaneSet, deviation_matrix

SCHEMA_VERSION = 1
DEVSTATS_COLUMNS = ("method", "cluster", "size", "mean_dev", "var_dev")


def cluster_deviation_stats(X, labels, planes: PlaneSet, kind: DeviationKind) -> list[dict]:
    """Size, mean deviation and deviation variance of every cluster (1-based ``cluster``).

    The variance uses the ``size - 1`` denominator and is 0 for a singleton;
    both statistics are ``None`` for an empty cluster.
    """
    F = deviation_matrix(X, planes, kind)
    labels = np.asarray(labels)
    rows = []
    for j in range(planes.k):
        f = F[labels == j, j]
        row = {"cluster": j + 1, "size": int(f.size), "mean_dev": None, "var_dev": None}
        if f.size:
            row["mean_dev"] = float(f.mean())
            row["var_dev"] = float(f.var(ddof=1)) if f.size > 1 else 0.0
        rows.append(row)
    return rows


@dataclass
class RunReport:
    preset: str
    params: dict
    ac: Optional[float]
    mi: Optional[float]
    iterations: int
    termination_reason: str
    converged: bool
    objective_trace: list
    per_cluster_stats: list
    wall_time_ms: int
    labels: list = field(default_factory=list)
    dataset: str = ""
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {version!r}")
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def summary(self) -> str:
        if self.ac is None:
            score = "AC(%)/MI(%): n/a (no truth labels)"
        else:
            score = f"AC(%)/MI(%): {self.ac:.2f}/{self.mi:.2f}"
        return f"{self.preset} {score} iterations={self.iterations} termination={self.termination_reason}"


def write_devstats(report: RunReport, path) -> None:
    """Write ``method,cluster,size,mean_dev,var_dev`` rows; empty clusters get blank statistics."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DEVSTATS_COLUMNS)
        for row in report.per_cluster_stats:
            stats = ["" if row[key] is None else f"{row[key]:.12g}" for key in ("mean_dev", "var_dev")]
            writer.writerow([report.preset, row["cluster"], row["size"], *stats])
