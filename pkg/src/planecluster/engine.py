"""The alternating cluster-update / cluster-assignment loop.

Starting from initial labels, each iteration

1. solves the ``k`` plane subproblems for the current labels, warm-started
   from the previous planes and never accepting a worse plane;
2. reassigns every sample to the cluster of least loss;
3. stops once the planes are already a solution for the new labels, or when
   the configured termination condition holds.

The objective (total loss plus plane regularizer) is non-increasing along
the run.  For rfdpc the objective couples samples of a cluster through its
deviation statistics, so an assignment proposal that would raise it is
reduced to the subset of single-sample moves that lower it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components
from sklearn.neighbors import kneighbors_graph

from .core import PlaneSet, TooFewSamplesError, deviation_matrix
from .losses import (
    LossSpec,
    Preset,
    between_loss,
    cluster_stats,
    loss_matrix,
    objective,
    within_loss,
    _ramp_within,
)
from .solvers import SolveConfig, SubproblemResult, plane_objective_value, solve_kpc_plane, solve_plane

logger = logging.getLogger(__name__)

INIT_METHODS = ("nng", "random")
TERMINATIONS = ("repeat", "objective", "both")
ASSIGNMENT_RULES = ("simplified", "full")


@dataclass
class EngineConfig:
    """Settings of one clustering run.

    ``termination`` selects which stopping condition ends the loop: a
    repeated label vector (``"repeat"``), no decrease of the objective
    (``"objective"``) or both at once (``"both"``).  ``assignment`` is
    ``"simplified"`` (nearest plane by ``|f|``) or ``"full"`` (least loss).
    Planes count as stationary when a warm re-solve lowers the objective by
    at most ``tol * max(1, |G|)``.
    """

    n_clusters: int = 2
    init: str = "nng"
    n_neighbors: int = 5
    random_state: Optional[int] = None
    termination: str = "both"
    max_iter: int = 100
    assignment: str = "simplified"
    solve: SolveConfig = field(default_factory=SolveConfig)
    tol: float = 1e-9

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ValueError("n_clusters must be at least 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init not in INIT_METHODS:
            raise ValueError(f"init must be one of {INIT_METHODS}")
        if self.termination not in TERMINATIONS:
            raise ValueError(f"termination must be one of {TERMINATIONS}")
        if self.assignment not in ASSIGNMENT_RULES:
            raise ValueError(f"assignment must be one of {ASSIGNMENT_RULES}")


@dataclass
class ClusteringState:
    labels: np.ndarray
    planes: PlaneSet
    objective: float
    iteration: int
    history: list = field(default_factory=list)
    termination_reason: str = ""
    converged: bool = True


@dataclass
class RunTrace:
    """Per-iteration record of a run.

    ``objectives[t]`` is the objective after the plane update of iteration
    ``t`` (the last entry is the final state); ``assignment_objectives[t]`` is
    the objective right after the following reassignment.
    """

    objectives: list = field(default_factory=list)
    assignment_objectives: list = field(default_factory=list)
    subproblem_traces: list = field(default_factory=list)
    labels: list = field(default_factory=list)


def _labels_hash(labels: np.ndarray) -> int:
    return hash(np.ascontiguousarray(labels, dtype=np.int64).tobytes())


def _seen_before(labels, h, history, recent) -> bool:
    """Hash lookup over the whole history, confirmed against the retained recent vectors."""
    if all(hh != h for hh, _ in history):
        return False
    candidates = [r for r in recent if _labels_hash(r) == h]
    return not candidates or any(np.array_equal(labels, r) for r in candidates)


# --------------------------------------------------------------------------- init


def _split_by_plane(X: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    res = solve_kpc_plane(X[idx])
    f = X[idx] @ res.w + res.b
    side = f > 0
    if side.all() or not side.any():
        side = f > np.median(f)
    if side.all() or not side.any():
        side = np.arange(len(idx)) >= len(idx) // 2
    return idx[~side], idx[side]


def nng_labels(X, k: int, n_neighbors: int = 5) -> np.ndarray:
    """Deterministic labels from the connected components of a nearest-neighbour graph.

    Components are merged (nearest centroids first) or split (largest first,
    by the sign of the deviation from its least-squares plane) until exactly
    ``k`` non-empty groups remain.
    """
    X = np.asarray(X, dtype=float)
    m = len(X)
    if m < k:
        raise TooFewSamplesError(f"{m} samples cannot form {k} clusters")
    p = min(n_neighbors, m - 1)
    if p >= 1:
        graph = kneighbors_graph(X, p, mode="connectivity", include_self=False)
        _, comp = connected_components(graph, directed=False)
    else:
        comp = np.zeros(m, dtype=int)
    groups = [np.flatnonzero(comp == c) for c in np.unique(comp)]

    while len(groups) > k:
        centroids = np.array([X[g].mean(axis=0) for g in groups])
        dist = np.linalg.norm(centroids[:, None, :] - centroids[None, :, :], axis=2)
        dist[np.diag_indices_from(dist)] = np.inf
        a, b = np.unravel_index(np.argmin(dist), dist.shape)
        a, b = min(a, b), max(a, b)
        groups[a] = np.sort(np.concatenate([groups[a], groups[b]]))
        del groups[b]
    while len(groups) < k:
        sizes = [len(g) for g in groups]
        big = int(np.argmax(sizes))
        left, right = _split_by_plane(X, groups[big])
        groups[big] = left
        groups.append(right)

    groups.sort(key=lambda g: g.min())
    labels = np.empty(m, dtype=int)
    for j, g in enumerate(groups):
        labels[g] = j
    return labels


def random_labels(m: int, k: int, random_state=None) -> np.ndarray:
    """Uniform random labels, redrawn until every cluster is non-empty."""
    if m < k:
        raise TooFewSamplesError(f"{m} samples cannot form {k} clusters")
    rng = np.random.default_rng(random_state)
    for _ in range(1000):
        labels = rng.integers(0, k, size=m)
        if np.unique(labels).size == k:
            return labels
    labels = rng.integers(0, k, size=m)
    labels[rng.choice(m, size=k, replace=False)] = np.arange(k)
    return labels


def initialize(X, config: EngineConfig) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if config.init == "nng":
        return nng_labels(X, config.n_clusters, config.n_neighbors)
    return random_labels(len(X), config.n_clusters, config.random_state)


# --------------------------------------------------------------------- assignment


def assign(X, planes: PlaneSet, spec: LossSpec, rule: str = "simplified", labels=None) -> np.ndarray:
    """Per-sample cluster assignment for fixed planes.

    ``"simplified"`` picks the plane of smallest ``|f|``; ``"full"`` the cluster
    of least loss, using rfdpc statistics of the current ``labels``.  Ties go
    to the smallest cluster index.
    """
    F = deviation_matrix(X, planes, spec.deviation_kind)
    if rule == "simplified":
        return np.argmin(np.abs(F), axis=1)
    if rule != "full":
        raise ValueError(f"unknown assignment rule {rule!r}")
    stats = None
    if spec.preset is Preset.RFDPC:
        if labels is None:
            labels = np.argmin(np.abs(F), axis=1)
        stats = cluster_stats(F, np.asarray(labels), planes.k)
    return np.argmin(loss_matrix(F, spec, stats), axis=1)


class _LabelObjective:
    """Incremental evaluation of the total loss under single-sample moves."""

    def __init__(self, F: np.ndarray, spec: LossSpec, labels: np.ndarray):
        self.F = F
        self.spec = spec
        self.labels = labels.copy()
        m, k = F.shape
        Jb = between_loss(F, spec)
        self.sep = spec.c_b * (Jb.sum(axis=1, keepdims=True) - Jb)
        self.coupled = spec.preset is Preset.RFDPC
        if self.coupled:
            self.sep = self.sep + spec.c_w * _ramp_within(F, spec.delta, spec.s)
            own = F[np.arange(m), labels]
            self.n = np.bincount(labels, minlength=k).astype(float)
            self.s1 = np.bincount(labels, weights=own, minlength=k)
            self.s2 = np.bincount(labels, weights=own**2, minlength=k)
        else:
            self.sep = self.sep + spec.c_w * within_loss(F, spec)

    def _block(self, n, s1, s2):
        if n <= 0:
            return 0.0
        value = self.spec.gamma1 * s2 / n**2
        if n > 1:
            value += self.spec.gamma2 * max(s2 - s1 * s1 / n, 0.0) / (n - 1)
        return value

    def move_delta(self, i: int, dest: int) -> float:
        src = self.labels[i]
        delta = self.sep[i, dest] - self.sep[i, src]
        if self.coupled:
            fa, fb = self.F[i, src], self.F[i, dest]
            n, s1, s2 = self.n, self.s1, self.s2
            delta += self._block(n[src] - 1, s1[src] - fa, s2[src] - fa * fa) - self._block(n[src], s1[src], s2[src])
            delta += self._block(n[dest] + 1, s1[dest] + fb, s2[dest] + fb * fb) - self._block(n[dest], s1[dest], s2[dest])
        return float(delta)

    def move(self, i: int, dest: int):
        src = self.labels[i]
        if self.coupled:
            fa, fb = self.F[i, src], self.F[i, dest]
            self.n[src] -= 1
            self.s1[src] -= fa
            self.s2[src] -= fa * fa
            self.n[dest] += 1
            self.s1[dest] += fb
            self.s2[dest] += fb * fb
        self.labels[i] = dest


def descend_labels(X, planes: PlaneSet, spec: LossSpec, current, proposal) -> np.ndarray:
    """Return the proposal if it does not raise the objective, otherwise the
    result of applying its single-sample moves greedily while each lowers it."""
    current = np.asarray(current)
    proposal = np.asarray(proposal)
    if np.array_equal(current, proposal):
        return proposal.copy()
    g_cur = objective(current, planes, X, spec)
    g_prop = objective(proposal, planes, X, spec)
    if g_prop <= g_cur:
        return proposal.copy()
    F = deviation_matrix(X, planes, spec.deviation_kind)
    state = _LabelObjective(F, spec, current)
    changed = True
    while changed:
        changed = False
        for i in np.flatnonzero(state.labels != proposal):
            if state.move_delta(i, proposal[i]) < -1e-12 * max(1.0, abs(g_cur)):
                state.move(i, proposal[i])
                changed = True
    return state.labels


def assignment_step(X, planes: PlaneSet, spec: LossSpec, rule: str, labels) -> np.ndarray:
    """Reassignment used by the loop: :func:`assign` guarded by :func:`descend_labels`."""
    proposal = assign(X, planes, spec, rule, labels)
    return descend_labels(X, planes, spec, labels, proposal)


# ------------------------------------------------------------------------- update


def update_planes(
    X, labels, spec: LossSpec, solve_config: Optional[SolveConfig] = None, warm: Optional[PlaneSet] = None, k: Optional[int] = None
) -> tuple[PlaneSet, list[SubproblemResult]]:
    """Solve the plane subproblem of every cluster for fixed labels.

    A plane from ``warm`` is kept whenever the solver does not improve on it.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    solve_config = solve_config or SolveConfig()
    k = k or (warm.k if warm is not None else int(labels.max()) + 1)
    Z = np.empty((k, X.shape[1] + 1))
    results = []
    for j in range(k):
        mask = labels == j
        members, others = X[mask], X[~mask]
        warm_z = warm.augmented()[j] if warm is not None else None
        if spec.preset is Preset.KPC and not mask.any():
            # any plane is optimal for an empty kpc cluster; keep the old one
            keep = warm_z if warm_z is not None else solve_kpc_plane(X).plane
            res = SubproblemResult(keep[:-1], float(keep[-1]), 0.0)
        else:
            cfg = SolveConfig(**{**solve_config.__dict__, "warm_start": warm_z})
            res = solve_plane(members, others, spec, cfg)
        z = res.plane
        if warm_z is not None:
            new_val = plane_objective_value(z, members, others, spec)
            old_val = plane_objective_value(warm_z, members, others, spec)
            if not new_val < old_val - 1e-13 * max(1.0, abs(old_val)):
                z = warm_z
        Z[j] = z
        results.append(res)
    return PlaneSet.from_augmented(Z), results


# ---------------------------------------------------------------------------- run


def run(X, spec: LossSpec, config: EngineConfig, init_labels=None) -> tuple[ClusteringState, RunTrace]:
    """Cluster ``X`` with the alternating loop; returns the final state and its trace.

    Every iteration reassigns the samples under the current planes, then
    re-solves the planes for the new labels.  If the re-solve lowers the
    objective by no more than ``config.tol`` the current planes already solve
    the new labels and the run stops there (after confirming the labels are
    reproduced).  Otherwise the new state is accepted and the configured
    termination condition is checked.
    """
    X = np.asarray(X, dtype=float)
    k = config.n_clusters
    if len(X) < k:
        raise TooFewSamplesError(f"{len(X)} samples cannot form {k} clusters")
    labels = np.asarray(init_labels).copy() if init_labels is not None else initialize(X, config)
    trace = RunTrace()
    planes, results = update_planes(X, labels, spec, config.solve, None, k)
    G = objective(labels, planes, X, spec)
    trace.objectives.append(G)
    trace.labels.append(labels.copy())
    trace.subproblem_traces.append([r.trace for r in results])
    history = [(_labels_hash(labels), G)]
    recent = [labels.copy()]
    reason = "max_iter"
    it = 0
    for it in range(1, config.max_iter + 1):
        new_labels = assignment_step(X, planes, spec, config.assignment, labels)
        G_mid = objective(new_labels, planes, X, spec)
        trace.assignment_objectives.append(G_mid)
        new_planes, results = update_planes(X, new_labels, spec, config.solve, planes, k)
        G_new = objective(new_labels, new_planes, X, spec)
        if G_new >= G_mid - config.tol * max(1.0, abs(G_mid)):
            # the current planes already solve the subproblems of the new labels
            same = np.array_equal(new_labels, labels)
            labels, G = new_labels, G_mid
            if not same:
                trace.objectives.append(G)
                trace.labels.append(labels.copy())
            if same or np.array_equal(assignment_step(X, planes, spec, config.assignment, labels), labels):
                reason = "repeated_assignment" if same else "stationary_planes"
                break
            continue
        h = _labels_hash(new_labels)
        repeated = _seen_before(new_labels, h, history, recent)
        nondecreasing = G_new >= G - config.tol * max(1.0, abs(G))
        labels, planes, G = new_labels, new_planes, G_new
        history.append((h, G))
        recent = (recent + [labels.copy()])[-3:]
        trace.objectives.append(G)
        trace.labels.append(labels.copy())
        trace.subproblem_traces.append([r.trace for r in results])
        if config.termination == "repeat" and repeated:
            reason = "repeated_assignment"
            break
        if config.termination == "objective" and nondecreasing:
            reason = "nondecreasing_objective"
            break
        if config.termination == "both" and repeated and nondecreasing:
            reason = "repeated_and_nondecreasing"
            break
    else:
        logger.warning("stopped after max_iter=%d iterations without converging", config.max_iter)
    state = ClusteringState(labels, planes, G, it, history, reason, reason != "max_iter")
    return state, trace


def verify_weak_local_optimality(state: ClusteringState, X, spec: LossSpec, config: Optional[EngineConfig] = None, tol: float = 1e-9) -> bool:
    """Check that the labels are reproduced by the assignment step under the
    final planes and that a warm-started re-solve lowers the objective by at
    most ``tol * max(1, |G|)``."""
    config = config or EngineConfig(n_clusters=state.planes.k)
    X = np.asarray(X, dtype=float)
    relabelled = assignment_step(X, state.planes, spec, config.assignment, state.labels)
    if not np.array_equal(relabelled, state.labels):
        return False
    G = objective(state.labels, state.planes, X, spec)
    resolved, _ = update_planes(X, state.labels, spec, config.solve, state.planes, state.planes.k)
    return objective(state.labels, resolved, X, spec) >= G - tol * max(1.0, abs(G))
