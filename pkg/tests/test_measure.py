from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotgraph.exceptions import EstimationError, PreconditionError
from carnotgraph.graph import BoxDomain, CallableRule, GraphFunction, HomogeneousHom
from carnotgraph.measure import (
    AreaConfig,
    JacobianCache,
    MeasureEstimate,
    area_check,
    classical_area_oracle,
    curve_length,
    greedy_cover_count,
    hausdorff_content,
    jacobian,
)

from conftest import group, splitting

PARABOLA_LENGTH = np.sqrt(5) / 2 + np.arcsinh(2) / 4


def brute_greedy(G, P, delta):
    """Quadratic greedy covering in the same lexicographic order."""
    P = P[np.lexsort(P.T[::-1])]
    covered = np.zeros(len(P), dtype=bool)
    count = 0
    for i in range(len(P)):
        if covered[i]:
            continue
        covered |= np.asarray(G.hdist(P[i], P)) <= delta
        count += 1
    return count


def disk(r, per=200):
    x = np.linspace(-r, r, per)
    X, Y = np.meshgrid(x, x)
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    return P[np.hypot(P[:, 0], P[:, 1]) <= r]


def test_measure_estimate_validation():
    with pytest.raises(ValueError):
        MeasureEstimate(-1.0, 0.0, "covering")
    with pytest.raises(ValueError):
        MeasureEstimate(1.0, -1.0, "covering")
    with pytest.raises(ValueError):
        MeasureEstimate(1.0, 0.0, "guess")


@pytest.mark.parametrize("name", ["R2", "H1", "engel"])
def test_windowed_greedy_matches_brute_force(name, rng):
    G = group(name)
    P = rng.uniform(-1, 1, (400, G.n))
    for delta in (0.3, 0.7):
        assert greedy_cover_count(G, P, delta) == brute_greedy(G, P, delta)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0.05, 2.0), st.integers(0, 10_000))
def test_cover_count_bounds(m, delta, seed):
    G = group("H1")
    P = np.random.default_rng(seed).uniform(-1, 1, (m, 3))
    N = greedy_cover_count(G, P, delta)
    assert 1 <= N <= m
    # translation by a tiny dilate of everything into one ball
    assert greedy_cover_count(G, G.dilate(1e-3, P), delta) == 1


def test_segment_content_is_length():
    G = group("R2")
    P = np.stack([np.linspace(0, 1, 2001), np.zeros(2001)], axis=1)
    est = hausdorff_content(G, P, 1, extrapolate=True)
    assert abs(est.value - 1.0) <= 0.05
    assert est.error >= 0.05 ** 1


def test_horizontal_segment_content_in_h1():
    G = group("H1")
    P = np.zeros((2001, 3))
    P[:, 0] = np.linspace(0, 1, 2001)
    est = hausdorff_content(G, P, 1, extrapolate=True)
    assert abs(est.value - 1.0) <= 0.05


def test_empty_and_coarse_samples():
    G = group("R2")
    assert hausdorff_content(G, np.zeros((0, 2)), 1).value == 0.0
    with pytest.raises(EstimationError):
        hausdorff_content(G, np.array([[0.0, 0.0], [1.0, 0.0]]), 1)


def test_ball_content_scales_with_homogeneous_dimension():
    G = group("R2")
    a = hausdorff_content(G, disk(0.5), 2, extrapolate=True)
    b = hausdorff_content(G, disk(1.0, 400), 2, extrapolate=True)
    assert abs(b.value / a.value - 4.0) <= 0.4


def test_content_monotone_under_adding_points():
    G = group("R2")
    seg = np.stack([np.linspace(0, 1, 1001), np.zeros(1001)], axis=1)
    longer = np.stack([np.linspace(0, 2, 2001), np.zeros(2001)], axis=1)
    assert hausdorff_content(G, longer, 1).value >= hausdorff_content(G, seg, 1).value


def test_curve_length_basics():
    G = group("H1")
    P = np.zeros((101, 3))
    P[:, 0] = np.linspace(0, 1, 101)
    assert curve_length(G, P).value == pytest.approx(1.0, abs=1e-12)
    assert curve_length(G, P[:1]).value == 0.0


def test_curve_length_refinement_is_monotone():
    G = group("R2")
    vals = []
    for m in (11, 101, 1001):
        x = np.linspace(0, 1, m)
        vals.append(curve_length(G, np.stack([x, x ** 2], axis=1)).value)
    assert vals[0] <= vals[1] <= vals[2]
    assert abs(vals[2] - PARABOLA_LENGTH) <= 1e-5


def test_curve_length_warns_on_backtracking():
    G = group("R2")
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    with pytest.warns(RuntimeWarning):
        curve_length(G, P)


@pytest.mark.parametrize("name", ["R2", "H1"])
def test_jacobian_of_inclusion_is_one(name):
    S = splitting(name)
    est = jacobian(HomogeneousHom.inclusion(S.group, S.W, exact_mode=False))
    assert abs(est.value - 1.0) <= max(0.02, est.error)


@pytest.mark.parametrize("m", [0.5, 1.0, 3.0])
def test_jacobian_of_line_in_plane(m):
    S = splitting("R2")
    est = jacobian(HomogeneousHom(S.group, S.W, np.array([[1.0, m]])))
    assert abs(est.value - np.hypot(1, m)) <= 0.03 * np.hypot(1, m)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_jacobian_homogeneity(lam):
    S = splitting("H1")
    F = HomogeneousHom.inclusion(S.group, S.W, exact_mode=False)
    est = jacobian(F.compose_dilation(lam))
    assert abs(est.value - lam) <= max(3 * est.error, 0.03 * lam)


def test_jacobian_cache_reuses_close_matrices():
    S = splitting("R2")
    cache = JacobianCache()
    a = cache(HomogeneousHom(S.group, S.W, np.array([[1.0, 2.0]])))
    b = cache(HomogeneousHom(S.group, S.W, np.array([[1.0, 2.0 + 1e-6]])))
    assert cache.hits == 1 and a is b


def test_classical_oracle():
    S = splitting("R2")
    for m in (0.0, 1.0, 3.0):
        phi = GraphFunction.polynomial(S, [f"{m}*w1"], [0], [1])
        assert classical_area_oracle(phi) == pytest.approx(np.hypot(1, m), abs=1e-9)
    phi = GraphFunction.polynomial(S, ["w1**2"], [0], [1])
    assert classical_area_oracle(phi) == pytest.approx(PARABOLA_LENGTH, abs=1e-6)
    S3 = splitting("R3")
    phi = GraphFunction.polynomial(S3, ["0"] * S3.dim_L, [0] * S3.dim_W, [2] * S3.dim_W)
    assert classical_area_oracle(phi) == pytest.approx(2.0 ** S3.dim_W, abs=1e-9)
    with pytest.raises(PreconditionError):
        classical_area_oracle(GraphFunction.polynomial(splitting("H1"), ["w1", "0"], [0], [1]))


def test_area_check_constant_function():
    S = splitting("R2")
    phi = GraphFunction.polynomial(S, ["1/3"], [0], [1])
    rep = area_check(phi, config=AreaConfig(mc_samples=200))
    assert not rep.aborted
    assert rep.mean_jacobian == pytest.approx(1.0, abs=0.02)
    assert rep.rel_discrepancy <= 0.02


def test_area_check_line():
    S = splitting("R2")
    phi = GraphFunction.polynomial(S, ["1*w1"], [0], [1])
    rep = area_check(phi, config=AreaConfig(mc_samples=200))
    assert abs(rep.lhs - np.sqrt(2)) <= 0.03 * np.sqrt(2)
    assert rep.rel_discrepancy <= 0.03


def test_area_check_aborts_on_nowhere_smooth_function():
    S = splitting("R2")

    def weierstrass(p):
        return sum(2.0 ** (-j / 2) * np.cos(4.0 ** j * np.pi * p) for j in range(12))

    phi = GraphFunction(S, BoxDomain.single(S, [0], [1]), CallableRule(weierstrass))
    rep = area_check(phi, config=AreaConfig(mc_samples=50))
    assert rep.aborted
    assert rep.failures > 0.01 * rep.mc_samples
    assert np.isnan(rep.lhs)


def test_area_check_is_deterministic_for_a_seed():
    S = splitting("R2")
    phi = GraphFunction.polynomial(S, ["w1**2"], [0], [1])
    cfg = AreaConfig(mc_samples=100, seed=7)
    a, b = area_check(phi, config=cfg), area_check(phi, config=cfg)
    assert a.lhs == b.lhs and a.rhs == b.rhs
