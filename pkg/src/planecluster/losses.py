"""Within-cluster and between-cluster loss functions for the seven presets.

A sample ``x_i`` assigned to cluster ``y_i`` costs

    c_w * J_w(f_{y_i}(x_i)) + c_b * sum_{j != y_i} J_b(f_j(x_i))

where ``f_j`` is its deviation from plane ``j``.  The presets differ in the
choice of ``J_w``/``J_b``, the deviation kind and the plane regularizer.

Cluster indices are 0-based throughout the Python API.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import DeviationKind, PlaneClusteringError, PlaneSet, deviation_matrix


class MissingStatsError(PlaneClusteringError):
    pass


class DegenerateClusterError(PlaneClusteringError):
    pass


class Preset(str, enum.Enum):
    KPC = "kpc"
    PPC = "ppc"
    TWSVC = "twsvc"
    RTWSVC = "rtwsvc"
    FRTWSVC = "frtwsvc"
    RAMPTWSVC = "ramptwsvc"
    RFDPC = "rfdpc"


class Regularizer(str, enum.Enum):
    UNIT_NORM = "unit_norm_constraint"
    NONE = "none"
    TIKHONOV = "tikhonov"


PRESET_NAMES = tuple(p.value for p in Preset)
RAMP_PRESETS = (Preset.RAMPTWSVC, Preset.RFDPC)
EIGEN_PRESETS = (Preset.KPC, Preset.PPC)


@dataclass(frozen=True)
class LossSpec:
    """Loss preset plus its parameters.

    Parameters
    ----------
    preset : Preset or str
        One of ``kpc, ppc, twsvc, rtwsvc, frtwsvc, ramptwsvc, rfdpc``.
    c_w, c_b : float
        Positive weights of the within- and between-cluster terms.
    delta, s : float
        Ramp breakpoints, ``delta`` in [0, 1] and ``s`` in (-1, 0].
    gamma1, gamma2 : float
        Weights of the first- and second-order deviation statistics (rfdpc).
    """

    preset: Preset = Preset.RFDPC
    c_w: float = 1.0
    c_b: float = 1.0
    delta: float = 0.3
    s: float = -0.2
    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "preset", Preset(self.preset))
        for name in ("c_w", "c_b", "delta", "s", "gamma1", "gamma2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.c_w > 0 and self.c_b > 0):
            raise ValueError("c_w and c_b must be positive")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        if not -1.0 < self.s <= 0.0:
            raise ValueError("s must lie in (-1, 0]")
        if self.preset is Preset.RFDPC and not (self.gamma1 > 0 and self.gamma2 > 0):
            raise ValueError("gamma1 and gamma2 must be positive")

    @classmethod
    def from_preset(cls, preset, c: Optional[float] = None, **params) -> "LossSpec":
        """Build a spec using the single-parameter form ``c_w = 1, c_b = c``.

        Explicit ``c_w``/``c_b`` keyword arguments take precedence over ``c``.
        """
        if c is not None:
            params.setdefault("c_w", 1.0)
            params.setdefault("c_b", c)
        return cls(preset=Preset(preset), **params)

    @property
    def deviation_kind(self) -> DeviationKind:
        if self.preset in EIGEN_PRESETS:
            return DeviationKind.SIGNED_DISTANCE
        return DeviationKind.AFFINE

    @property
    def regularizer(self) -> Regularizer:
        if self.preset in EIGEN_PRESETS:
            return Regularizer.UNIT_NORM
        if self.preset is Preset.RFDPC:
            return Regularizer.TIKHONOV
        return Regularizer.NONE

    def params(self) -> dict:
        out = {"c_w": self.c_w, "c_b": self.c_b}
        if self.preset in RAMP_PRESETS:
            out.update(delta=self.delta, s=self.s)
        if self.preset is Preset.RFDPC:
            out.update(gamma1=self.gamma1, gamma2=self.gamma2)
        return out


@dataclass(frozen=True)
class ClusterStats:
    """Size of a cluster and the mean deviation of its members from its plane."""

    size: int
    mean_dev: float


def _ramp_within(rho, delta, s):
    a = np.abs(rho)
    return np.where(a <= 1 - delta, 0.0, np.where(a < 2 - delta - s, a - 1 + delta, 1 - s))


def _ramp_between(rho, delta, s):
    a = np.abs(rho)
    return np.where(
        a <= -s, 2 + 2 * delta, np.where(a < 1 + delta, -a + 2 + 2 * delta - s, 1 + delta - s)
    )


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def within_loss(rho, spec: LossSpec, stats: Optional[ClusterStats] = None):
    """Within-cluster function ``J_w(rho)``; vectorised over ``rho``.

    For rfdpc, ``stats`` describes the cluster the sample belongs to.  A
    singleton cluster contributes no variance term and its mean term is
    ``rho`` itself.
    """
    rho_arr = np.asarray(rho, dtype=float)
    p = spec.preset
    if p in (Preset.KPC, Preset.PPC, Preset.TWSVC):
        out = rho_arr**2
    elif p in (Preset.RTWSVC, Preset.FRTWSVC):
        out = np.abs(rho_arr)
    elif p is Preset.RAMPTWSVC:
        out = _ramp_within(rho_arr, spec.delta, spec.s)
    else:
        if stats is None:
            raise MissingStatsError("rfdpc within-cluster loss needs cluster statistics")
        if stats.size < 1:
            raise DegenerateClusterError("cluster statistics of an empty cluster")
        n = stats.size
        out = _ramp_within(rho_arr, spec.delta, spec.s) + spec.gamma1 / spec.c_w * (rho_arr / n) ** 2
        if n > 1:
            out = out + spec.gamma2 / spec.c_w * (rho_arr - stats.mean_dev) ** 2 / (n - 1)
    return _scalar_or_array(out, rho)


def between_loss(rho, spec: LossSpec):
    """Between-cluster function ``J_b(rho)``; vectorised over ``rho``."""
    rho_arr = np.asarray(rho, dtype=float)
    p = spec.preset
    if p is Preset.KPC:
        out = np.zeros_like(rho_arr)
    elif p is Preset.PPC:
        out = -(rho_arr**2)
    elif p in (Preset.TWSVC, Preset.RTWSVC):
        out = np.maximum(1 - np.abs(rho_arr), 0.0)
    elif p is Preset.FRTWSVC:
        out = np.abs(1 - np.abs(rho_arr))
    else:
        out = _ramp_between(rho_arr, spec.delta, spec.s)
    return _scalar_or_array(out, rho)


def cluster_stats(F: np.ndarray, labels: np.ndarray, k: int) -> list[Optional[ClusterStats]]:
    """Per-cluster statistics of the members' deviations from their own plane.

    Empty clusters map to ``None``.
    """
    out: list[Optional[ClusterStats]] = []
    for j in range(k):
        f = F[labels == j, j]
        out.append(ClusterStats(len(f), float(f.mean())) if len(f) else None)
    return out


def sample_loss(dev, label: int, spec: LossSpec, stats: Optional[Sequence[Optional[ClusterStats]]] = None) -> float:
    """Loss of one sample with deviation vector ``dev`` when assigned to ``label``."""
    dev = np.asarray(dev, dtype=float)
    own_stats = None
    if spec.preset is Preset.RFDPC:
        if stats is None or stats[label] is None:
            raise MissingStatsError("rfdpc sample loss needs the statistics of its cluster")
        own_stats = stats[label]
    others = np.delete(dev, label)
    total = spec.c_w * within_loss(dev[label], spec, own_stats)
    if others.size:
        total += spec.c_b * float(np.sum(between_loss(others, spec)))
    return float(total)


def loss_matrix(F: np.ndarray, spec: LossSpec, stats: Optional[Sequence[Optional[ClusterStats]]] = None) -> np.ndarray:
    """``(m, k)`` matrix of the loss of sample ``i`` if it were assigned to ``j``.

    For rfdpc the statistics of cluster ``j`` are held fixed; an empty
    cluster is treated as the singleton the sample would form.
    """
    F = np.asarray(F, dtype=float)
    m, k = F.shape
    Jb = between_loss(F, spec)
    between = spec.c_b * (Jb.sum(axis=1, keepdims=True) - Jb)
    if spec.preset is not Preset.RFDPC:
        return spec.c_w * within_loss(F, spec) + between
    if stats is None:
        raise MissingStatsError("rfdpc loss matrix needs cluster statistics")
    within = np.empty_like(F)
    for j in range(k):
        st = stats[j]
        if st is None:
            within[:, j] = within_loss(F[:, j], spec, ClusterStats(1, 0.0))
        else:
            within[:, j] = within_loss(F[:, j], spec, st)
    return spec.c_w * within + between


def _per_sample_losses(labels, F, spec):
    labels = np.asarray(labels)
    m, k = F.shape
    idx = np.arange(m)
    own = F[idx, labels]
    Jb = between_loss(F, spec)
    between = spec.c_b * (Jb.sum(axis=1) - Jb[idx, labels])
    if spec.preset is not Preset.RFDPC:
        return spec.c_w * within_loss(own, spec) + between
    within = np.empty(m)
    for st, j in zip(cluster_stats(F, labels, k), range(k)):
        mask = labels == j
        if st is not None:
            within[mask] = within_loss(own[mask], spec, st)
    return spec.c_w * within + between


def total_loss(labels, planes: PlaneSet, X, spec: LossSpec) -> float:
    """Sum of the per-sample losses; rfdpc statistics come from ``labels``."""
    F = deviation_matrix(X, planes, spec.deviation_kind)
    return float(np.sum(_per_sample_losses(labels, F, spec)))


def regularization(planes: PlaneSet, spec: LossSpec) -> float:
    if spec.regularizer is Regularizer.TIKHONOV:
        return 0.5 * float(np.sum(planes.weights**2) + np.sum(planes.biases**2))
    return 0.0


def objective(labels, planes: PlaneSet, X, spec: LossSpec) -> float:
    """Clustering objective: total loss plus the plane regularizer."""
    return total_loss(labels, planes, X, spec) + regularization(planes, spec)


def satisfies_properties(spec: LossSpec, upper: float = 10.0, step: float = 1e-3) -> tuple[bool, bool, bool]:
    """Numerically check symmetry, ``J_w`` non-decreasing and ``J_b`` non-increasing.

    The scan covers ``[0, upper]``.  rfdpc is checked with fixed zero-mean
    statistics, under which its within-cluster term depends only on ``|rho|``.
    """
    rho = np.arange(0.0, upper + step / 2, step)
    stats = ClusterStats(2, 0.0) if spec.preset is Preset.RFDPC else None
    jw, jw_neg = within_loss(rho, spec, stats), within_loss(-rho, spec, stats)
    jb, jb_neg = between_loss(rho, spec), between_loss(-rho, spec)
    tol = 1e-12
    symmetric = bool(np.allclose(jw, jw_neg, rtol=0, atol=tol) and np.allclose(jb, jb_neg, rtol=0, atol=tol))
    within_up = bool(np.all(np.diff(jw) >= -tol))
    between_down = bool(np.all(np.diff(jb) <= tol))
    return symmetric, within_up, between_down


class PieceTerms(NamedTuple):
    """One loss as ``quad*rho^2 + u*(|rho|-tau)_+ - v*(|rho|-sigma)_+ + const``.

    ``u, v >= 0`` so the first three parts split the loss into a convex
    piece and a concave piece.  Weights ``c_w``/``c_b`` are already applied.
    """

    quad: float
    u: float
    tau: float
    v: float
    sigma: float
    const: float

    def __call__(self, rho):
        a = np.abs(np.asarray(rho, dtype=float))
        return (
            self.quad * a**2
            + self.u * np.maximum(a - self.tau, 0.0)
            - self.v * np.maximum(a - self.sigma, 0.0)
            + self.const
        )


def dc_split(spec: LossSpec) -> tuple[PieceTerms, PieceTerms]:
    """Difference-of-convex form of ``(c_w J_w, c_b J_b)``.

    rfdpc's statistics terms are not included; they are convex quadratics
    that depend on the whole cluster.
    """
    cw, cb, d, s = spec.c_w, spec.c_b, spec.delta, spec.s
    p = spec.preset
    hinge_b = PieceTerms(0.0, cb, 1.0, cb, 0.0, cb)  # (1-|r|)_+ = 1 - |r| + (|r|-1)_+
    if p is Preset.KPC:
        return PieceTerms(cw, 0, 0, 0, 0, 0), PieceTerms(0, 0, 0, 0, 0, 0)
    if p is Preset.PPC:
        return PieceTerms(cw, 0, 0, 0, 0, 0), PieceTerms(-cb, 0, 0, 0, 0, 0)
    if p is Preset.TWSVC:
        return PieceTerms(cw, 0, 0, 0, 0, 0), hinge_b
    if p is Preset.RTWSVC:
        return PieceTerms(0, cw, 0, 0, 0, 0), hinge_b
    if p is Preset.FRTWSVC:
        # |1-|r|| = 1 - |r| + 2(|r|-1)_+
        return PieceTerms(0, cw, 0, 0, 0, 0), PieceTerms(0, 2 * cb, 1.0, cb, 0.0, cb)
    within = PieceTerms(0.0, cw, 1 - d, cw, 2 - d - s, 0.0)
    between = PieceTerms(0.0, cb, 1 + d, cb, -s, cb * (2 + 2 * d))
    return within, between
