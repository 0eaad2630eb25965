"""Empirical kernel map used to run the linear machinery on nonlinear data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.metrics.pairwise import rbf_kernel

from .core import Dataset, DimensionMismatchError

KERNEL_KINDS = ("linear", "gaussian")


@dataclass(frozen=True)
class KernelSpec:
    """``kind`` is ``"linear"`` (dot product) or ``"gaussian"`` (``exp(-mu ||a - b||^2)``)."""

    kind: str = "linear"
    mu: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if self.kind == "gaussian" and not self.mu > 0:
            raise ValueError("gaussian kernel needs mu > 0")


def kernel_value(x1, x2, spec: KernelSpec) -> float:
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.shape != x2.shape:
        raise DimensionMismatchError(f"vectors of length {x1.size} and {x2.size}")
    if spec.kind == "linear":
        return float(x1 @ x2)
    diff = x1 - x2
    return float(np.exp(-spec.mu * (diff @ diff)))


def kernel_matrix(X, basis, spec: KernelSpec) -> np.ndarray:
    """Entry ``(i, l)`` is ``kernel_value(X[i], basis[l])``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if X.shape[1] != basis.shape[1]:
        raise DimensionMismatchError(f"samples have {X.shape[1]} features, basis has {basis.shape[1]}")
    if spec.kind == "linear":
        return X @ basis.T
    K = rbf_kernel(X, basis, gamma=spec.mu)
    if X is basis or (X.shape == basis.shape and np.array_equal(X, basis)):
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


def empirical_map(data: Dataset, basis: Dataset, spec: KernelSpec) -> Dataset:
    """Represent every sample by its kernel values against the basis samples."""
    return Dataset(kernel_matrix(data.samples, basis.samples, spec), data.truth_labels, data.name)
