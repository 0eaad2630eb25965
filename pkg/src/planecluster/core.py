"""Shared domain types: datasets, plane sets and sample-to-plane deviations."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class PlaneClusteringError(Exception):
    """Base class for all errors raised by this package."""


class ZeroWeightError(PlaneClusteringError):
    pass


class TooFewSamplesError(PlaneClusteringError):
    pass


class DimensionMismatchError(PlaneClusteringError, ValueError):
    pass


class DeviationKind(str, enum.Enum):
    """How the deviation of a sample from a plane ``w.x + b = 0`` is measured."""

    SIGNED_DISTANCE = "signed_distance"
    AFFINE = "affine"


@dataclass(frozen=True)
class Dataset:
    """Sample matrix (one row per sample) with optional ground-truth labels."""

    samples: np.ndarray
    truth_labels: Optional[np.ndarray] = None
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"samples must be a non-empty 2-D array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("samples contain non-finite entries")
        object.__setattr__(self, "samples", X)
        if self.truth_labels is not None:
            y = np.asarray(self.truth_labels)
            if y.shape != (X.shape[0],):
                raise ValueError("truth_labels length must equal the number of samples")
            if not np.issubdtype(y.dtype, np.integer):
                if not np.all(y == np.round(y)):
                    raise ValueError("truth_labels must be integers")
                y = y.astype(int)
            if y.min() < 1:
                raise ValueError("truth_labels must be 1-based positive integers")
            object.__setattr__(self, "truth_labels", y)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_features(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class PlaneSet:
    """``k`` cluster center planes; row ``j`` of ``weights`` with ``biases[j]``."""

    weights: np.ndarray
    biases: np.ndarray = field(default=None)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.weights, dtype=float))
        b = np.zeros(W.shape[0]) if self.biases is None else np.asarray(self.biases, dtype=float).ravel()
        if b.shape[0] != W.shape[0]:
            raise DimensionMismatchError("need exactly one bias per plane")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("planes contain non-finite entries")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def plane(self, j: int) -> tuple[np.ndarray, float]:
        return self.weights[j], float(self.biases[j])

    def augmented(self) -> np.ndarray:
        """Planes as a ``(k, n + 1)`` array of ``(w, b)`` rows."""
        return np.column_stack([self.weights, self.biases])

    @classmethod
    def from_augmented(cls, Z) -> "PlaneSet":
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return cls(Z[:, :-1].copy(), Z[:, -1].copy())


def deviation(x, w, b: float, kind: DeviationKind = DeviationKind.AFFINE) -> float:
    """Deviation of ``x`` from the plane ``w.x + b = 0``.

    ``AFFINE`` returns ``w.x + b``; ``SIGNED_DISTANCE`` divides it by ``||w||``.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise DimensionMismatchError(f"sample has {x.shape} entries, plane has {w.shape}")
    value = float(w @ x + b)
    if DeviationKind(kind) is DeviationKind.SIGNED_DISTANCE:
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            raise ZeroWeightError("signed distance needs a nonzero weight vector")
        value /= norm
    return value


def deviation_vector(x, planes: PlaneSet, kind: DeviationKind = DeviationKind.AFFINE) -> np.ndarray:
    """Deviations of one sample from each of the ``k`` planes."""
    return deviation_matrix(np.atleast_2d(np.asarray(x, dtype=float)), planes, kind)[0]


def deviation_matrix(X, planes: PlaneSet, kind: DeviationKind = DeviationKind.AFFINE) -> np.ndarray:
    """``(m, k)`` matrix whose entry ``(i, j)`` is the deviation of ``X[i]`` from plane ``j``."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != planes.weights.shape[1]:
        raise DimensionMismatchError(
            f"samples have {X.shape[1]} features, planes have {planes.weights.shape[1]}"
        )
    F = X @ planes.weights.T + planes.biases
    if DeviationKind(kind) is DeviationKind.SIGNED_DISTANCE:
        norms = np.linalg.norm(planes.weights, axis=1)
        if np.any(norms == 0.0):
            raise ZeroWeightError("signed distance needs nonzero weight vectors")
        F = F / norms
    return F
