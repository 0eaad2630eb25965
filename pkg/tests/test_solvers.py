import warnings

import numpy as np
import pytest

from planecluster.losses import LossSpec, Preset, between_loss, cluster_stats, within_loss
from planecluster.solvers import (
    MaxIterationsWarning,
    PlaneObjective,
    SolveConfig,
    plane_objective_value,
    ppc_objective,
    solve_cccp_plane,
    solve_kpc_plane,
    solve_plane,
    solve_ppc_plane,
)

CCCP_PRESETS = ["twsvc", "rtwsvc", "frtwsvc", "ramptwsvc", "rfdpc"]


def sphere_grid(dim, n=10_000):
    if dim == 2:
        t = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return np.c_[np.cos(t), np.sin(t)]
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    return np.c_[np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)]


def kpc_grid_best(X):
    W = sphere_grid(X.shape[1])
    F = X @ W.T
    F = F - F.mean(axis=0)
    return (F**2).sum(axis=0).min()


def ppc_grid_best(Xin, Xout, c):
    W = sphere_grid(Xin.shape[1])
    D = len(Xin) - c * len(Xout)
    v = (Xin.sum(axis=0) - c * Xout.sum(axis=0)) @ W.T
    b = -v / D
    Fin, Fout = Xin @ W.T + b, Xout @ W.T + b
    return ((Fin**2).sum(axis=0) - c * (Fout**2).sum(axis=0)).min()


def test_kpc_collinear_members():
    r = solve_kpc_plane(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
    np.testing.assert_allclose(r.w, [0.0, 1.0], atol=1e-12)
    assert r.b == pytest.approx(0.0, abs=1e-12)
    assert r.objective == pytest.approx(0.0, abs=1e-12)


def test_kpc_square_has_unit_eigenvalue():
    r = solve_kpc_plane(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]))
    assert r.objective == pytest.approx(1.0)
    assert np.linalg.norm(r.w) == pytest.approx(1.0, abs=1e-10)
    assert r.w[np.flatnonzero(np.abs(r.w) > 1e-12)[0]] > 0


def test_kpc_matches_grid_oracle(rng):
    X = rng.normal(size=(20, 3)) * [3, 1, 0.3]
    r = solve_kpc_plane(X)
    assert r.objective <= kpc_grid_best(X) + 1e-3
    assert np.sum((X @ r.w + r.b) ** 2) == pytest.approx(r.objective, rel=1e-9, abs=1e-12)


def test_kpc_permutation_invariant(rng):
    X = rng.normal(size=(15, 4))
    a, b = solve_kpc_plane(X), solve_kpc_plane(X[rng.permutation(15)])
    np.testing.assert_allclose(a.plane, b.plane, atol=1e-9)
    assert a.objective == pytest.approx(b.objective, abs=1e-9)


def test_ppc_small_c_approaches_kpc(rng):
    M, O = rng.normal(size=(10, 3)), rng.normal(size=(8, 3)) + 2
    r = solve_ppc_plane(M, O, 1e-9)
    assert r.objective == pytest.approx(solve_kpc_plane(M).objective, abs=1e-6)


def test_ppc_parallel_lines():
    M = np.c_[np.linspace(-2, 2, 5), np.zeros(5)]
    O = np.c_[np.linspace(-2, 2, 5), np.full(5, 2.0)]
    r = solve_ppc_plane(M, O, 0.1)
    np.testing.assert_allclose(np.abs(r.w), [0.0, 1.0], atol=1e-12)
    # the bias is pulled slightly towards the members' far side: b = 0.1 * 5 * 2 / (5 - 0.5)
    assert abs(r.b) == pytest.approx(2 / 9, rel=1e-9)
    assert r.objective == pytest.approx(ppc_objective(r.w, r.b, M, O, 0.1))


@pytest.mark.parametrize("dim", [2, 3])
def test_ppc_matches_grid_oracle(dim, rng):
    M = rng.normal(size=(15, dim))
    O = rng.normal(size=(10, dim)) + 1.5
    r = solve_ppc_plane(M, O, 0.5)
    assert np.linalg.norm(r.w) == pytest.approx(1.0, abs=1e-10)
    assert r.objective <= ppc_grid_best(M, O, 0.5) + 1e-3


def test_ppc_unbounded_bias_uses_box(rng):
    M, O = rng.normal(size=(3, 2)), rng.normal(size=(10, 2)) + 1
    r = solve_ppc_plane(M, O, 2.0)
    assert np.isfinite(r.objective)
    assert np.linalg.norm(r.w) == pytest.approx(1.0, abs=1e-10)
    bound = np.max(np.linalg.norm(np.vstack([M, O]), axis=1))
    assert abs(r.b) == pytest.approx(bound)
    W = sphere_grid(2)
    grid = min(ppc_objective(w, s * bound, M, O, 2.0) for w in W[::10] for s in (-1, 1))
    assert r.objective <= grid + 1e-3


def test_ramp_at_exact_fit_is_stationary():
    M = np.c_[np.linspace(-1, 1, 6), np.zeros(6)]
    O = np.c_[np.linspace(-1, 1, 4), np.full(4, 3.0)]
    z0 = np.array([0.0, 1.0, 0.0])
    r = solve_cccp_plane(M, O, LossSpec(Preset.RAMPTWSVC), SolveConfig(warm_start=z0))
    np.testing.assert_array_equal(r.plane, z0)
    assert r.objective == pytest.approx(4 * 1.5)


def test_twsvc_one_dimensional_instance():
    r = solve_cccp_plane(np.array([[0.0]]), np.array([[0.5]]), LossSpec(Preset.TWSVC, c_w=1.0, c_b=1.0))
    assert r.objective == pytest.approx(0.0, abs=1e-9)
    assert abs(0.5 * r.w[0] + r.b) >= 1 - 1e-9
    # brute force over a grid of planes (w, b)
    w, b = np.meshgrid(np.linspace(-5, 5, 401), np.linspace(-2, 2, 161))
    grid = b**2 + np.maximum(1 - np.abs(0.5 * w + b), 0)
    assert r.objective <= grid.min() + 1e-12


def test_rfdpc_small_instance_near_best_restart():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 2))
    M, O = X[:3], X[3:]
    spec = LossSpec(Preset.RFDPC)
    r = solve_cccp_plane(M, O, spec)
    assert all(b <= a + 1e-9 for a, b in zip(r.trace, r.trace[1:]))
    assert r.objective <= r.trace[0]
    restarts = [
        solve_cccp_plane(M, O, spec, SolveConfig(warm_start=rng.normal(size=3) * rng.choice([0.3, 1, 3]))).objective
        for _ in range(50)
    ]
    assert r.objective <= 1.05 * min(restarts)


@pytest.mark.parametrize("name", CCCP_PRESETS)
def test_warm_start_never_worsens(name, rng):
    M, O = rng.normal(size=(12, 3)), rng.normal(size=(20, 3)) + 1
    spec = LossSpec.from_preset(name, c=0.5)
    z0 = rng.normal(size=4)
    r = solve_cccp_plane(M, O, spec, SolveConfig(warm_start=z0))
    assert r.objective <= plane_objective_value(z0, M, O, spec) + 1e-12
    assert all(b <= a + 1e-9 for a, b in zip(r.trace, r.trace[1:]))


@pytest.mark.parametrize("name", CCCP_PRESETS)
def test_plane_objective_matches_loss_sums(name, rng):
    M, O = rng.normal(size=(7, 2)), rng.normal(size=(9, 2))
    spec = LossSpec.from_preset(name, c_w=0.6, c_b=1.7)
    z = rng.normal(size=3)
    fin, fout = M @ z[:2] + z[2], O @ z[:2] + z[2]
    stats = cluster_stats(fin[:, None], np.zeros(7, dtype=int), 1)[0] if name == "rfdpc" else None
    expected = spec.c_w * np.sum(within_loss(fin, spec, stats)) + spec.c_b * np.sum(between_loss(fout, spec))
    if name == "rfdpc":
        expected += 0.5 * z @ z
    assert PlaneObjective(M, O, spec).value(z) == pytest.approx(expected, rel=1e-12)
    assert plane_objective_value(z, M, O, spec) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("name", CCCP_PRESETS)
def test_dc_gradients_match_finite_differences(name, rng):
    M, O = rng.normal(size=(8, 3)), rng.normal(size=(10, 3))
    obj = PlaneObjective(M, O, LossSpec.from_preset(name, c=0.8))
    h, checked = 1e-6, 0
    while checked < 100:
        z = rng.normal(size=4) * 2
        if obj.breakpoint_margin(z) < 1e-3:
            continue
        E = np.eye(4) * h
        fd_cvx = np.array([(obj.convex_value(z + e) - obj.convex_value(z - e)) / (2 * h) for e in E])
        fd_ccv = np.array([(obj.concave_value(z + e) - obj.concave_value(z - e)) / (2 * h) for e in E])
        for fd, an in ((fd_cvx, obj.convex_grad(z)), (fd_ccv, obj.concave_grad(z))):
            assert np.linalg.norm(fd - an) <= 1e-4 * max(1.0, np.linalg.norm(an))
        checked += 1


def test_solve_plane_dispatch(rng):
    M, O = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
    assert solve_plane(M, O, LossSpec(Preset.KPC)).objective == pytest.approx(solve_kpc_plane(M).objective)
    assert solve_plane(M, O, LossSpec(Preset.PPC, c_b=0.3)).objective == pytest.approx(solve_ppc_plane(M, O, 0.3).objective)
    with pytest.raises(ValueError):
        solve_cccp_plane(M, O, LossSpec(Preset.KPC))


def test_outer_budget_exhaustion_warns(rng):
    M, O = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r = solve_cccp_plane(M, O, LossSpec(Preset.TWSVC), SolveConfig(cccp_max_outer=1, cccp_tol=1e-300))
    assert not r.converged
    assert any(issubclass(w.category, MaxIterationsWarning) for w in caught)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(cccp_tol=0)
    with pytest.raises(ValueError):
        SolveConfig(cccp_max_outer=0)
