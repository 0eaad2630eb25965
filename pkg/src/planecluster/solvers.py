"""Per-cluster plane subproblems.

kPC and PPC have closed-form eigenvector solutions.  The remaining presets
are nonconvex and are handled by a proximal concave-convex procedure: each
loss is split into convex minus convex (:func:`~planecluster.losses.dc_split`),
the concave part is linearised at the current plane, and the resulting convex
majoriser is minimised by an interior-point method.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._qp import hinge_qp
from .core import PlaneClusteringError
from .losses import EIGEN_PRESETS, LossSpec, Preset, dc_split


class MaxIterationsWarning(UserWarning):
    pass


class NonDecreasingStepError(PlaneClusteringError):
    """The CCCP objective rose although the majoriser did not: a solver bug."""


@dataclass
class SolveConfig:
    cccp_max_outer: int = 50
    cccp_tol: float = 1e-10
    inner_max_iter: int = 500
    inner_tol: float = 1e-8
    prox: float = 1e-6
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.cccp_max_outer < 1 or self.inner_max_iter < 1:
            raise ValueError("iteration limits must be at least 1")
        if not (self.cccp_tol > 0 and self.inner_tol > 0 and self.prox > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class SubproblemResult:
    w: np.ndarray
    b: float
    objective: float
    iterations: int = 0
    converged: bool = True
    trace: list = field(default_factory=list)

    @property
    def plane(self) -> np.ndarray:
        return np.append(self.w, self.b)


def _augment(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([X, np.ones(len(X))])


def _canonical_sign(w: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(w) > 1e-12)
    if nz.size and w[nz[0]] < 0:
        return -w
    return w


def _smallest_eigvec(S: np.ndarray) -> tuple[float, np.ndarray]:
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    return float(vals[0]), _canonical_sign(vecs[:, 0])


def solve_kpc_plane(members, config: Optional[SolveConfig] = None) -> SubproblemResult:
    """Best unit-normal plane through ``members`` in the least-squares sense."""
    X = np.atleast_2d(np.asarray(members, dtype=float))
    mu = X.mean(axis=0)
    D = X - mu
    lam, w = _smallest_eigvec(D.T @ D)
    return SubproblemResult(w, float(-w @ mu), max(lam, 0.0))


def _unit_sphere_trs(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Minimise ``w'Rw + 2 g'w`` over the unit sphere."""
    vals, vecs = np.linalg.eigh(0.5 * (R + R.T))
    gp = vecs.T @ g
    gnorm = float(np.linalg.norm(g))
    lam1 = vals[0]
    if gnorm == 0.0:
        return vecs[:, 0]

    def norm_gap(lam):
        return float(np.sum((gp / (vals - lam)) ** 2) - 1.0)

    hi = lam1 - 1e-12 * max(1.0, abs(lam1), gnorm)
    if abs(gp[0]) > 1e-14 * gnorm and norm_gap(hi) > 0:
        lam = brentq(norm_gap, lam1 - gnorm - 1.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        w = -vecs @ (gp / (vals - lam))
        return w / np.linalg.norm(w)
    # hard case: the multiplier sits at the smallest eigenvalue
    coef = np.zeros_like(gp)
    rest = np.abs(vals - lam1) > 1e-12 * max(1.0, abs(lam1))
    coef[rest] = -gp[rest] / (vals[rest] - lam1)
    left = 1.0 - float(np.sum(coef**2))
    if left > 0:
        first = np.flatnonzero(~rest)[0]
        coef[first] = np.sqrt(left)
    w = vecs @ coef
    return w / np.linalg.norm(w)


def ppc_objective(w, b, members, others, c) -> float:
    members = np.atleast_2d(members)
    others = np.atleast_2d(others)
    fin = members @ w + b if members.size else np.zeros(0)
    fout = others @ w + b if others.size else np.zeros(0)
    return float(np.sum(fin**2) - c * np.sum(fout**2))


def ppc_bias_bound(members, others) -> float:
    """Bias bound used when the bias direction of the PPC objective is unbounded."""
    X = np.vstack([np.atleast_2d(a) for a in (members, others) if np.size(a)])
    return float(np.max(np.linalg.norm(X, axis=1)))


def solve_ppc_plane(members, others, c: float, config: Optional[SolveConfig] = None) -> SubproblemResult:
    """Unit-normal plane close to ``members`` and far from ``others``.

    Minimises ``sum_in f^2 - c sum_out f^2`` over ``||w|| = 1``.  When
    ``m_in - c m_out`` is positive the bias is eliminated exactly and ``w`` is
    the smallest eigenvector of the reduced matrix.  Otherwise the objective
    is unbounded in ``b``; the bias is then restricted to
    ``|b| <= max ||x||`` and the optimum sits at one of the two ends, each
    solved as a trust-region problem on the unit sphere.
    """
    n = np.shape(members)[-1] if np.size(members) else np.shape(others)[-1]
    Xin = np.asarray(members, dtype=float).reshape(-1, n)
    Xout = np.asarray(others, dtype=float).reshape(-1, n)
    M = Xin.T @ Xin - c * (Xout.T @ Xout)
    v = Xin.sum(axis=0) - c * Xout.sum(axis=0)
    D = len(Xin) - c * len(Xout)
    scale = max(1.0, len(Xin) + c * len(Xout))
    if D > 1e-12 * scale:
        lam, w = _smallest_eigvec(M - np.outer(v, v) / D)
        b = float(-(v @ w) / D)
    else:
        B = ppc_bias_bound(Xin, Xout)
        best = None
        for sign in (1.0, -1.0):
            w_s = _unit_sphere_trs(M, sign * B * v)
            val = float(w_s @ M @ w_s + 2 * sign * B * (v @ w_s) + D * B * B)
            if best is None or val < best[0] - 1e-15:
                best = (val, w_s, sign * B)
        _, w, b = best
    return SubproblemResult(w, b, ppc_objective(w, b, Xin, Xout, c))


class PlaneObjective:
    """Objective of one plane subproblem as a function of ``z = (w, b)``.

    ``value(z) = convex_value(z) - concave_value(z)`` with

    * convex part: ``1/2 z'Pz + sum_i u_i (|a_i'z| - tau_i)_+ + const``
    * concave part: ``sum_i v_i (|a_i'z| - sigma_i)_+``

    where ``a_i = (x_i, 1)`` runs over members first, then the others.
    """

    def __init__(self, members, others, spec: LossSpec):
        if spec.preset is Preset.PPC:
            raise ValueError("ppc has a concave quadratic part; use solve_ppc_plane")
        n = np.shape(members)[-1] if np.size(members) else np.shape(others)[-1]
        A_in = _augment(np.asarray(members, dtype=float).reshape(-1, n))
        A_out = _augment(np.asarray(others, dtype=float).reshape(-1, n))
        self.spec = spec
        self.n_members = len(A_in)
        self.A = np.vstack([A_in, A_out])
        d = n + 1
        within, between = dc_split(spec)
        P = np.zeros((d, d))
        if within.quad:
            P += 2 * within.quad * (A_in.T @ A_in)
        if spec.preset is Preset.RFDPC:
            N = len(A_in)
            if N == 1:
                P += 2 * spec.gamma1 * (A_in.T @ A_in)
            elif N > 1:
                P += 2 * spec.gamma1 / N**2 * (A_in.T @ A_in)
                Ac = A_in - A_in.mean(axis=0)
                P += 2 * spec.gamma2 / (N - 1) * (Ac.T @ Ac)
            P += np.eye(d)
        self.P = P
        m_in, m_out = len(A_in), len(A_out)

        def stack(attr):
            return np.concatenate([np.full(m_in, getattr(within, attr)), np.full(m_out, getattr(between, attr))])

        self.u, self.tau, self.v, self.sigma = (stack(a) for a in ("u", "tau", "v", "sigma"))
        self.const = m_in * within.const + m_out * between.const

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def convex_value(self, z) -> float:
        t = self.A @ z
        return float(0.5 * z @ self.P @ z + self.u @ np.maximum(np.abs(t) - self.tau, 0.0) + self.const)

    def concave_value(self, z) -> float:
        t = self.A @ z
        return float(self.v @ np.maximum(np.abs(t) - self.sigma, 0.0))

    def value(self, z) -> float:
        t = self.A @ z
        return float(
            0.5 * z @ self.P @ z
            + self.u @ np.maximum(np.abs(t) - self.tau, 0.0)
            - self.v @ np.maximum(np.abs(t) - self.sigma, 0.0)
            + self.const
        )

    def convex_grad(self, z) -> np.ndarray:
        t = self.A @ z
        return self.P @ z + self.A.T @ (self.u * np.sign(t) * (np.abs(t) > self.tau))

    def concave_grad(self, z) -> np.ndarray:
        t = self.A @ z
        return self.A.T @ (self.v * np.sign(t) * (np.abs(t) > self.sigma))

    def breakpoint_margin(self, z) -> float:
        """Distance of the deviations at ``z`` from the nearest kink."""
        a = np.abs(self.A @ z)
        gaps = [np.abs(a - self.tau)[self.u > 0], np.abs(a - self.sigma)[self.v > 0]]
        gaps = np.concatenate(gaps)
        return float(gaps.min()) if gaps.size else np.inf


def _candidate_directions(members, others, spec: LossSpec, n_random: int = 4) -> list[np.ndarray]:
    """Unit normals worth starting from: least-squares fit of the members,
    the proximal plane against the others, the centroid difference and a few
    fixed pseudo-random directions."""
    members = np.atleast_2d(members)
    others = np.atleast_2d(others)
    has_in, has_out = members.size > 0, others.size > 0
    d = (members if has_in else others).shape[1]
    dirs = [solve_kpc_plane(members if has_in else others).w]
    if has_in and has_out:
        dirs.append(solve_ppc_plane(members, others, spec.c_b / spec.c_w).w)
        diff = members.mean(axis=0) - others.mean(axis=0)
        if np.linalg.norm(diff) > 1e-12:
            dirs.append(diff / np.linalg.norm(diff))
    rng = np.random.default_rng(0)
    for _ in range(n_random):
        v = rng.normal(size=d)
        dirs.append(v / np.linalg.norm(v))
    return dirs


def _initial_planes(members, others, spec: LossSpec, obj: PlaneObjective) -> list[np.ndarray]:
    """Starting planes through the member centroid, each scaled to the best of a scale grid
    that puts the median deviation of the others between 1/2 and 16."""
    members = np.atleast_2d(members)
    others = np.atleast_2d(others)
    center = (members if members.size else others).mean(axis=0)
    starts = []
    for w in _candidate_directions(members, others, spec):
        z = np.append(w, -w @ center)
        # keep the others off the flat region around the plane, where z = 0 traps CCCP
        scales = 2.0 ** np.arange(-1, 5)
        if others.size:
            spread = np.median(np.abs(others @ w + z[-1]))
            if spread > 1e-12:
                scales = scales / spread
        values = [obj.value(t * z) for t in scales]
        starts.append(scales[int(np.argmin(values))] * z)
    return starts


def _cccp(obj: PlaneObjective, z: np.ndarray, config: SolveConfig):
    """CCCP iterations from ``z``; returns (plane, objective, trace, iterations, converged)."""
    A, d = obj.A, obj.dim
    z = np.asarray(z, dtype=float).copy()
    phi = obj.value(z)
    trace = [phi]

    scale = np.trace(obj.P) / d + np.mean((obj.u + obj.v) * np.einsum("ij,ij->i", A, A))
    eps = config.prox * max(scale, 1e-12)
    Q = obj.P + eps * np.eye(d)
    hinge = obj.u > 0
    Ah = np.ascontiguousarray(A[hinge])
    u_h, tau_h = obj.u[hinge], obj.tau[hinge]

    converged = False
    it = 0
    for it in range(1, config.cccp_max_outer + 1):
        t = A @ z
        g = obj.v * np.sign(t) * (np.abs(t) > obj.sigma)
        lvec = A.T @ g + eps * z
        if len(Ah):
            z_new, _, _ = hinge_qp(Q, lvec, Ah, u_h, tau_h, z, config.inner_max_iter, config.inner_tol)
        else:
            z_new = np.linalg.solve(Q, lvec)
        phi_new = obj.value(z_new)
        if phi_new >= phi:
            # no strict decrease: keep the incumbent
            majorant = obj.convex_value(z_new) - obj.concave_value(z) - g @ (A @ (z_new - z)) \
                + 0.5 * eps * float((z_new - z) @ (z_new - z))
            if majorant <= phi - 1e-12 * max(1.0, abs(phi)) and phi_new > phi + 1e-9 * max(1.0, abs(phi)):
                raise NonDecreasingStepError(f"objective rose from {phi} to {phi_new}")
            converged = True
            break
        small = phi - phi_new <= config.cccp_tol * max(1.0, abs(phi))
        z, phi = z_new, phi_new
        trace.append(phi)
        if small:
            converged = True
            break
    return z, phi, trace, it, converged


def solve_cccp_plane(members, others, spec: LossSpec, config: Optional[SolveConfig] = None) -> SubproblemResult:
    """Stationary plane of a nonconvex subproblem by the concave-convex procedure.

    Every outer step minimises a convex majoriser that touches the objective
    at the current plane, with a small proximal term ``prox/2 ||z - z_t||^2``
    keeping the inner problem strongly convex.  The objective therefore never
    increases; the returned plane is the last accepted iterate.  Without a
    warm start, the procedure runs from several deterministic starting planes
    and keeps the best result.
    """
    config = config or SolveConfig()
    if spec.preset in EIGEN_PRESETS:
        raise ValueError(f"{spec.preset.value} is solved in closed form, not by CCCP")
    obj = PlaneObjective(members, others, spec)
    if config.warm_start is not None:
        starts = [np.asarray(config.warm_start, dtype=float)]
    else:
        starts = _initial_planes(members, others, spec, obj)
    best = None
    for z0 in starts:
        out = _cccp(obj, z0, config)
        if best is None or out[1] < best[1]:
            best = out
    z, phi, trace, it, converged = best
    if not converged:
        warnings.warn(f"CCCP stopped after {config.cccp_max_outer} outer iterations", MaxIterationsWarning, stacklevel=2)
    return SubproblemResult(z[:-1].copy(), float(z[-1]), phi, it, converged, trace)


def solve_plane(members, others, spec: LossSpec, config: Optional[SolveConfig] = None) -> SubproblemResult:
    """Dispatch to the preset's subproblem solver."""
    if spec.preset is Preset.KPC:
        return solve_kpc_plane(members, config)
    if spec.preset is Preset.PPC:
        return solve_ppc_plane(members, others, spec.c_b / spec.c_w, config)
    return solve_cccp_plane(members, others, spec, config)


def plane_objective_value(z, members, others, spec: LossSpec) -> float:
    """Subproblem objective of plane ``z = (w, b)`` for any preset."""
    z = np.asarray(z, dtype=float)
    w, b = z[:-1], z[-1]
    if spec.preset in EIGEN_PRESETS:
        nw = np.linalg.norm(w)
        if nw == 0:
            return np.inf
        w, b = w / nw, b / nw
        if spec.preset is Preset.KPC:
            X = np.atleast_2d(members)
            return spec.c_w * float(np.sum((X @ w + b) ** 2)) if np.size(members) else 0.0
        return spec.c_w * ppc_objective(w, b, members, others, spec.c_b / spec.c_w)
    return PlaneObjective(members, others, spec).value(z)
