import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planecluster.core import PlaneSet
from planecluster.losses import (
    ClusterStats,
    DegenerateClusterError,
    LossSpec,
    MissingStatsError,
    Preset,
    Regularizer,
    between_loss,
    cluster_stats,
    dc_split,
    loss_matrix,
    objective,
    sample_loss,
    satisfies_properties,
    total_loss,
    within_loss,
)

PRESETS = [p.value for p in Preset]
NON_RFDPC = [p for p in PRESETS if p != "rfdpc"]
ZERO_STATS = ClusterStats(2, 0.0)
rhos = st.floats(-20, 20, allow_nan=False)


def ramp_w(r, d=0.3, s=-0.2):
    """Branch-by-branch within ramp, written independently of the library."""
    a = abs(r)
    if a <= 1 - d:
        return 0.0
    if a < 2 - d - s:
        return a - 1 + d
    return 1 - s


def ramp_b(r, d=0.3, s=-0.2):
    a = abs(r)
    if a <= -s:
        return 2 + 2 * d
    if a < 1 + d:
        return -a + 2 + 2 * d - s
    return 1 + d - s


def spec(name, **kw):
    return LossSpec.from_preset(name, **kw)


def stats_for(name):
    return ZERO_STATS if name == "rfdpc" else None


@pytest.mark.parametrize("name", NON_RFDPC)
def test_within_vanishes_at_zero(name):
    assert within_loss(0.0, spec(name)) == 0.0


@pytest.mark.parametrize("rho,expected", [(1.0, 0.3), (2.5, 1.2), (0.7, 0.0)])
def test_ramp_within_values(rho, expected):
    assert within_loss(rho, spec("ramptwsvc")) == pytest.approx(expected, abs=1e-12)


def test_rtwsvc_within_is_absolute_value():
    assert within_loss(-2.0, spec("rtwsvc")) == 2.0


def test_rfdpc_within_zero_at_centre():
    s = LossSpec(Preset.RFDPC, c_w=0.5, gamma1=0.5, gamma2=0.5)
    assert within_loss(0.0, s, ClusterStats(2, 0.0)) == 0.0


def test_rfdpc_within_adds_statistics_terms():
    s = LossSpec(Preset.RFDPC, c_w=0.5, gamma1=2.0, gamma2=3.0)
    rho, st_ = 1.5, ClusterStats(4, 0.5)
    expected = ramp_w(rho) + 2.0 / 0.5 * (rho / 4) ** 2 + 3.0 / 0.5 * (rho - 0.5) ** 2 / 3
    assert within_loss(rho, s, st_) == pytest.approx(expected)


def test_rfdpc_singleton_has_no_variance_term():
    s = LossSpec(Preset.RFDPC, gamma1=1.0, gamma2=5.0)
    assert within_loss(2.0, s, ClusterStats(1, 2.0)) == pytest.approx(ramp_w(2.0) + 4.0)


def test_rfdpc_requires_stats():
    with pytest.raises(MissingStatsError):
        within_loss(0.1, spec("rfdpc"))
    with pytest.raises(DegenerateClusterError):
        within_loss(0.1, spec("rfdpc"), ClusterStats(0, 0.0))


def test_kpc_between_is_zero():
    np.testing.assert_array_equal(between_loss(np.array([-3.0, 0.0, 7.0]), spec("kpc")), 0.0)


@pytest.mark.parametrize("rho,expected", [(0.0, 2.6), (0.5, 2.3), (2.0, 1.5)])
def test_ramp_between_values(rho, expected):
    assert between_loss(rho, spec("ramptwsvc")) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("rho,expected", [(0.4, 0.6), (3.0, 0.0)])
def test_twsvc_between_values(rho, expected):
    assert between_loss(rho, spec("twsvc")) == pytest.approx(expected)


def test_rfdpc_between_equals_ramp():
    r = np.linspace(-3, 3, 61)
    np.testing.assert_array_equal(between_loss(r, spec("rfdpc")), between_loss(r, spec("ramptwsvc")))


@settings(max_examples=300, deadline=None)
@given(rhos)
def test_ramps_match_branch_oracle(r):
    assert within_loss(r, spec("ramptwsvc")) == pytest.approx(ramp_w(r), abs=1e-12)
    assert between_loss(r, spec("ramptwsvc")) == pytest.approx(ramp_b(r), abs=1e-12)


@pytest.mark.parametrize("boundary", [0.7, 1.9])
def test_within_ramp_continuity(boundary):
    s = spec("ramptwsvc")
    assert abs(within_loss(boundary - 1e-13, s) - within_loss(boundary + 1e-13, s)) < 1e-12


@pytest.mark.parametrize("boundary", [0.2, 1.3])
def test_between_ramp_continuity(boundary):
    s = spec("ramptwsvc")
    assert abs(between_loss(boundary - 1e-13, s) - between_loss(boundary + 1e-13, s)) < 1e-12


@pytest.mark.parametrize("name", PRESETS)
def test_symmetry_on_random_points(name, rng):
    s = spec(name)
    r = rng.uniform(-10, 10, 10_000)
    st_ = stats_for(name)
    np.testing.assert_allclose(within_loss(r, s, st_), within_loss(-r, s, st_), atol=1e-12)
    np.testing.assert_allclose(between_loss(r, s), between_loss(-r, s), atol=1e-12)


@pytest.mark.parametrize("name", ["kpc", "ppc", "twsvc", "rtwsvc", "ramptwsvc", "rfdpc"])
def test_monotone_in_absolute_deviation(name, rng):
    s = spec(name)
    a, b = np.abs(rng.normal(0, 3, (2, 5000)))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    lo = lo * rng.choice([-1, 1], lo.size)
    st_ = stats_for(name)
    assert np.all(within_loss(lo, s, st_) <= within_loss(hi, s, st_) + 1e-12)
    assert np.all(between_loss(lo, s) >= between_loss(hi, s) - 1e-12)


@pytest.mark.parametrize(
    "name,expected",
    [
        ("kpc", (True, True, True)),
        ("ppc", (True, True, True)),
        ("twsvc", (True, True, True)),
        ("rtwsvc", (True, True, True)),
        ("frtwsvc", (True, True, False)),
        ("ramptwsvc", (True, True, True)),
        ("rfdpc", (True, True, True)),
    ],
)
def test_property_scan(name, expected):
    assert satisfies_properties(spec(name)) == expected


def test_sample_loss_single_cluster_is_within_only():
    s = LossSpec(Preset.TWSVC, c_w=2.0, c_b=5.0)
    assert sample_loss([0.5], 0, s) == pytest.approx(2.0 * 0.25)


def test_sample_loss_kpc():
    assert sample_loss([0.5, 123.0], 0, spec("kpc")) == pytest.approx(0.25)


def test_sample_loss_twsvc_term_by_term():
    s = LossSpec(Preset.TWSVC, c_w=1.0, c_b=1.0)
    assert sample_loss([0.1, 0.4, 2.0], 0, s) == pytest.approx(0.01 + 0.6 + 0.0)


def test_sample_loss_rfdpc_needs_stats():
    with pytest.raises(MissingStatsError):
        sample_loss([0.1, 0.2], 0, spec("rfdpc"))


def _total_by_hand(labels, planes, X, s):
    F = X @ planes.weights.T + planes.biases
    if s.deviation_kind.value == "signed_distance":
        F = F / np.linalg.norm(planes.weights, axis=1)
    stats = cluster_stats(F, np.asarray(labels), planes.k) if s.preset is Preset.RFDPC else None
    return sum(sample_loss(F[i], labels[i], s, stats) for i in range(len(X)))


def test_total_loss_three_sample_twsvc():
    X = np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 2.0]])
    planes = PlaneSet(np.array([[0.0, 1.0], [1.0, -1.0]]), np.array([0.0, 0.5]))
    labels = [0, 0, 1]
    s = LossSpec(Preset.TWSVC, c_w=1.0, c_b=0.5)
    # sample 0: f = (0, 0.5) -> 0 + 0.5*0.5 ; sample 1: f = (0.5, 1.0) -> 0.25 + 0 ;
    # sample 2: f = (2, 0.5) -> own 0.25, other (1-2)_+ = 0
    assert total_loss(labels, planes, X, s) == pytest.approx(0.25 + 0.25 + 0.25)


def test_total_loss_single_sample():
    X = np.array([[1.0, 2.0]])
    planes = PlaneSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0.0, -1.5]))
    s = LossSpec(Preset.TWSVC)
    assert total_loss([1], planes, X, s) == pytest.approx(sample_loss([1.0, 0.5], 1, s))


def test_total_loss_zero_for_exact_kpc_fit():
    t = np.linspace(-1, 1, 5)
    X = np.vstack([np.c_[t, 0 * t], np.c_[0 * t + 2, t]])
    planes = PlaneSet(np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([0.0, -2.0]))
    assert total_loss([0] * 5 + [1] * 5, planes, X, spec("kpc")) == 0.0


@pytest.mark.parametrize("name", PRESETS)
def test_total_loss_matches_per_sample_sum(name, rng):
    X = rng.normal(size=(12, 3))
    planes = PlaneSet(rng.normal(size=(3, 3)), rng.normal(size=3))
    labels = np.array([0, 1, 2] * 4)
    s = spec(name, c=0.7)
    assert total_loss(labels, planes, X, s) == pytest.approx(_total_by_hand(labels, planes, X, s), rel=1e-12)


def test_objective_adds_tikhonov_for_rfdpc(rng):
    X = rng.normal(size=(6, 2))
    planes = PlaneSet(np.array([[1.0, 2.0], [0.0, 1.0]]), np.array([1.0, -1.0]))
    labels = np.array([0, 1] * 3)
    s = spec("rfdpc")
    assert s.regularizer is Regularizer.TIKHONOV
    assert objective(labels, planes, X, s) - total_loss(labels, planes, X, s) == pytest.approx(0.5 * (5 + 1 + 1 + 1))


@pytest.mark.parametrize("name", [p for p in PRESETS if p not in ("kpc", "ppc")])
def test_dc_split_reproduces_losses(name, rng):
    s = LossSpec.from_preset(name, c_w=0.7, c_b=1.3)
    within, between = dc_split(s)
    r = rng.uniform(-4, 4, 5000)
    st_ = ClusterStats(1, 0.0) if name == "rfdpc" else None
    w_ref = s.c_w * within_loss(r, s, st_)
    if name == "rfdpc":
        w_ref = w_ref - s.gamma1 * r**2  # statistics terms are handled outside the split
    np.testing.assert_allclose(within(r), w_ref, atol=1e-12)
    np.testing.assert_allclose(between(r), s.c_b * between_loss(r, s), atol=1e-12)


def test_loss_matrix_columns(rng):
    F = rng.normal(size=(7, 3))
    s = spec("twsvc", c=0.4)
    L = loss_matrix(F, s)
    for i in range(7):
        for j in range(3):
            assert L[i, j] == pytest.approx(sample_loss(F[i], j, s))


@pytest.mark.parametrize(
    "kw",
    [dict(c_w=0.0), dict(c_b=-1.0), dict(delta=1.5), dict(s=0.1), dict(s=-1.0), dict(gamma1=0.0)],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        LossSpec(Preset.RFDPC, **kw)


def test_single_parameter_maps_to_between_weight():
    s = LossSpec.from_preset("twsvc", c=0.25)
    assert (s.c_w, s.c_b) == (1.0, 0.25)
    assert LossSpec.from_preset("twsvc", c=0.25, c_b=3.0).c_b == 3.0
