"""Synthetic three-plane data, CSV input/output and feature scaling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, PlaneClusteringError

GROUP_SIZES = {"G1": 120, "G2": 100, "G3": 80, "G4": 60}
SCALINGS = ("minmax", "zscore", "none")


class ParseError(PlaneClusteringError, ValueError):
    """A CSV cell could not be parsed; ``line`` and ``column`` are 1-based."""

    def __init__(self, line: int, column: int, message: str = ""):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message or 'cannot parse value'}")


class RaggedRowsError(PlaneClusteringError, ValueError):
    pass


class EmptyFileError(PlaneClusteringError, ValueError):
    pass


def _equal_mix(n: int) -> tuple[int, int, int]:
    base, extra = divmod(n, 3)
    return tuple(base + (1 if i < extra else 0) for i in range(3))


@dataclass(frozen=True)
class SynthSpec:
    """Size, seed and class counts of a synthetic three-plane group.

    ``class_mix`` defaults to the most even split of ``group_size``.
    """

    group_size: int = 120
    seed: int = 0
    class_mix: Optional[tuple[int, int, int]] = field(default=None)

    def __post_init__(self):
        if self.group_size < 3:
            raise ValueError("group_size must be at least 3")
        mix = _equal_mix(self.group_size) if self.class_mix is None else tuple(int(c) for c in self.class_mix)
        if len(mix) != 3 or sum(mix) != self.group_size or min(mix) < 1:
            raise ValueError("class_mix must be three positive counts summing to group_size")
        object.__setattr__(self, "class_mix", mix)

    @classmethod
    def for_group(cls, group: str, seed: int = 0) -> "SynthSpec":
        try:
            return cls(GROUP_SIZES[group.upper()], seed)
        except KeyError:
            raise ValueError(f"unknown group {group!r}; expected one of {sorted(GROUP_SIZES)}") from None


def generate_synthetic(spec: SynthSpec) -> Dataset:
    """Sample three classes lying on three planes in R^3.

    ====== =========== =========== =========
    class  x           y           z
    ====== =========== =========== =========
    1      N(1, 1)     1           -x + 1
    2      N(3, 1)     1           x - 1
    3      N(2, 1)     N(1, 1)     0
    ====== =========== =========== =========
    """
    rng = np.random.default_rng(spec.seed)
    n1, n2, n3 = spec.class_mix
    x1 = rng.normal(1.0, 1.0, n1)
    x2 = rng.normal(3.0, 1.0, n2)
    x3 = rng.normal(2.0, 1.0, n3)
    y3 = rng.normal(1.0, 1.0, n3)
    samples = np.vstack(
        [
            np.column_stack([x1, np.ones(n1), -x1 + 1.0]),
            np.column_stack([x2, np.ones(n2), x2 - 1.0]),
            np.column_stack([x3, y3, np.zeros(n3)]),
        ]
    )
    labels = np.repeat([1, 2, 3], [n1, n2, n3])
    return Dataset(samples, labels, name=f"synth{spec.group_size}-seed{spec.seed}")


def _parse_float(text: str, line: int, column: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, column, f"non-numeric value {text!r}") from None
    if not np.isfinite(value):
        raise ParseError(line, column, f"non-finite value {text!r}")
    return value


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, has_labels: bool = False, name: Optional[str] = None) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Blank lines are skipped and a first row containing a non-numeric cell is
    taken as a header.  With ``has_labels`` the last column holds 1-based
    integer labels.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            rows.append((lineno, cells))
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise EmptyFileError(f"{path} contains no data rows")
    width = len(rows[0][1])
    if has_labels and width < 2:
        raise ParseError(rows[0][0], 1, "a labelled file needs at least one feature column")
    values = np.empty((len(rows), width))
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise RaggedRowsError(f"line {lineno} has {len(cells)} columns, expected {width}")
        for c, cell in enumerate(cells):
            values[r, c] = _parse_float(cell, lineno, c + 1)
    labels = None
    if has_labels:
        labels = values[:, -1]
        bad = np.flatnonzero((labels != np.round(labels)) | (labels < 1))
        if bad.size:
            raise ParseError(rows[bad[0]][0], width, "labels must be positive integers")
        labels = labels.astype(int)
        values = values[:, :-1]
    return Dataset(values, labels, name=name or path.stem)


def save_csv(data: Dataset, path, header: Optional[Sequence[str]] = None) -> None:
    """Write samples (and truth labels, if any, as the last column) with 12 significant digits."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for i, row in enumerate(data.samples):
            cells = [f"{v:.12g}" for v in row]
            if data.truth_labels is not None:
                cells.append(str(int(data.truth_labels[i])))
            writer.writerow(cells)


def scale_features(data: Dataset, method: str = "minmax") -> Dataset:
    """Per-feature scaling to [0, 1] (``"minmax"``), zero mean and unit variance
    (``"zscore"``) or none.  Constant features map to 0."""
    X = data.samples
    if method == "none":
        return data
    if method == "minmax":
        lo = X.min(axis=0)
        span = X.max(axis=0) - lo
        out = np.divide(X - lo, span, out=np.zeros_like(X), where=span > 0)
    elif method == "zscore":
        if X.shape[0] < 2:
            raise ValueError("zscore scaling needs at least two samples")
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        out = np.divide(X - mu, sd, out=np.zeros_like(X), where=sd > 0)
    else:
        raise ValueError(f"unknown scaling {method!r}; expected one of {SCALINGS}")
    return Dataset(out, data.truth_labels, data.name)


def load_iris() -> Dataset:
    """The 150-sample, 4-feature Iris data with its three species as labels 1..3."""
    from sklearn.datasets import load_iris as _sk_iris

    bunch = _sk_iris()
    return Dataset(bunch.data.astype(float), bunch.target.astype(int) + 1, name="iris")
