from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from carnotgraph.exceptions import DimensionError, EstimationError
from carnotgraph.group import check_points, exact, quasi_triangle_constant

from conftest import CATALOG, group, rand_exact, rand_float


def E(i, j, n):
    m = np.zeros((n, n))
    m[i - 1, j - 1] = 1
    return m


# faithful nilpotent matrix representations, used as an independent oracle for BCH
REPS = {
    "H1": [E(1, 2, 3), E(2, 3, 3), E(1, 3, 3)],
    "engel": [E(1, 2, 4) + E(2, 3, 4) + E(3, 4, 4), E(3, 4, 4), E(2, 4, 4), E(1, 4, 4)],
}


def _log_unipotent(M):
    N = M - np.eye(len(M))
    out, P = np.zeros_like(M), np.eye(len(M))
    for k in range(1, len(M) + 1):
        P = P @ N
        out += (-1) ** (k + 1) * P / k
    return out


@pytest.mark.parametrize("name", sorted(REPS))
def test_mul_matches_matrix_representation(name):
    G = group(name)
    basis = REPS[name]
    flat = np.stack([b.ravel() for b in basis], axis=1)
    rng = np.random.default_rng(1)
    for g, h in zip(rand_float(G, 50, rng), rand_float(G, 50, rng)):
        M = expm(sum(c * b for c, b in zip(g, basis))) @ expm(sum(c * b for c, b in zip(h, basis)))
        coords, *_ = np.linalg.lstsq(flat, _log_unipotent(M).ravel(), rcond=None)
        assert np.allclose(G.mul(g, h), coords, atol=1e-12)


@pytest.mark.parametrize("name", CATALOG)
def test_mul_matches_adjoint_representation(name):
    # Ad is a homomorphism: exp(ad(g·h)) = exp(ad g) exp(ad h)
    G = group(name)
    c = np.array(G.algebra.structure_constants, dtype=float)

    def ad(x):
        return np.einsum("i,ijk->kj", x, c)

    rng = np.random.default_rng(2)
    for g, h in zip(rand_float(G, 30, rng), rand_float(G, 30, rng)):
        assert np.allclose(expm(ad(G.mul(g, h))), expm(ad(g)) @ expm(ad(h)), atol=1e-12)


def test_known_product_h2():
    G = group("H2")
    eps = Fraction(1, 8)
    out = G.mul(exact([0, 0, eps, 0, 0]), exact([1, 0, 0, 0, 0]))
    assert list(out) == [1, 0, eps, 0, -eps / 2]


def test_h1_product_and_inverse():
    G = group("H1")
    g = G.mul(exact([1, 0, 0]), exact([0, 1, 0]))
    assert list(g) == [1, 1, Fraction(1, 2)]
    assert all(v == 0 for v in G.mul(g, G.inv(g)))
    e = G.identity(True)
    assert list(G.inv(e)) == [0, 0, 0]


def test_inverse_is_negation():
    G = group("H2")
    eps = 0.3
    assert np.array_equal(G.inv(np.array([1, 0, eps, 0, -eps / 2])), [-1, 0, -eps, 0, eps / 2])


@pytest.mark.parametrize("name", CATALOG)
def test_group_axioms_exact(name):
    G = group(name)
    rng = np.random.default_rng(3)
    g, h, k = (rand_exact(G, 40, rng) for _ in range(3))
    e = G.identity(True)
    assert np.all(G.mul(G.mul(g, h), k) == G.mul(g, G.mul(h, k)))
    assert np.all(G.mul(g, e) == g) and np.all(G.mul(e, g) == g)
    assert np.all(G.mul(g, G.inv(g)) == 0)


@pytest.mark.parametrize("name", CATALOG)
def test_dilation_automorphism_exact(name):
    G = group(name)
    rng = np.random.default_rng(4)
    g, h = rand_exact(G, 30, rng), rand_exact(G, 30, rng)
    lam = Fraction(3, 2)
    assert np.all(G.dilate(lam, G.mul(g, h)) == G.mul(G.dilate(lam, g), G.dilate(lam, h)))
    assert np.all(G.dilate(2, G.dilate(3, g)) == G.dilate(6, g))
    assert np.all(G.dilate(1, g) == g)


def test_dilation_example_and_errors():
    G = group("H2")
    lam, eps = 3.0, 0.25
    assert np.allclose(G.dilate(lam, [1, 0, eps, 0, -eps / 2]), [lam, 0, lam * eps, 0, -lam**2 * eps / 2])
    with pytest.raises(ValueError):
        G.dilate(0, [1, 0, 0, 0, 0])


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(CATALOG),
    st.lists(st.one_of(st.just(0.0), st.floats(1e-100, 2), st.floats(-2, -1e-100)), min_size=6, max_size=6),
    st.floats(0.01, 100),
)
def test_norm_homogeneous_and_symmetric(name, coords, lam):
    G = group(name)
    g = np.array(coords[: G.n])
    n = G.hnorm(g)
    assert np.isclose(G.hnorm(G.dilate(lam, g)), lam * n, rtol=1e-12, atol=1e-300)
    assert G.hnorm(G.inv(g)) == n
    assert (n == 0) == (not np.any(g))


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(CATALOG), st.integers(0, 2**32 - 1))
def test_left_invariance_of_distance(name, seed):
    G = group(name)
    g, h, k = np.random.default_rng(seed).uniform(-1, 1, (3, G.n))
    assert np.isclose(G.hdist(G.mul(k, g), G.mul(k, h)), G.hdist(g, h), rtol=1e-9, atol=1e-12)


def test_norm_asymptotics():
    G = group("H2")
    for eps in (1e-2, 1e-4, 1e-6):
        assert np.isclose(G.hnorm([0, 0, eps, 0, -eps]), np.sqrt(eps))
    assert G.hnorm(G.identity()) == 0


def test_mixed_lengths_rejected():
    G = group("H1")
    with pytest.raises(DimensionError):
        G.mul([1, 0, 0], [1, 0])


def test_exact_promotion():
    G = group("H1")
    out = G.mul(exact([1, 0, 0]), np.array([0.0, 0.5, 0.0]))
    assert out.dtype == object and out[2] == Fraction(1, 4)


@pytest.mark.parametrize("name", CATALOG)
def test_sample_ball(name):
    G = group(name)
    c = np.random.default_rng(0).uniform(-1, 1, G.n)
    pts = G.sample_ball(c, 0.7, 500, rng_seed=11)
    assert pts.shape == (500, G.n)
    assert np.all(G.hdist(c, pts) <= 0.7 + 1e-12)
    assert np.array_equal(pts, G.sample_ball(c, 0.7, 500, rng_seed=11))


@pytest.mark.parametrize("name", CATALOG)
def test_sample_ball_half_radius_fraction(name):
    G = group(name)
    m = 20000
    pts = G.sample_ball(G.identity(), 1.0, m, rng_seed=5)
    p = 2.0 ** -G.homogeneous_dimension
    frac = np.mean(G.hnorm(pts) <= 0.5)
    assert abs(frac - p) <= 3 * np.sqrt(p * (1 - p) / m) + 1e-12


def test_sample_ball_low_acceptance_raises(monkeypatch):
    import carnotgraph.group as grp

    monkeypatch.setattr(grp, "MIN_ACCEPTANCE", 0.99)
    G = group("H1")
    with pytest.raises(EstimationError):
        G.sample_ball(G.identity(), 1.0, 20000, rng_seed=0)


@pytest.mark.parametrize("name", CATALOG)
def test_quasi_triangle_constant_reported(name):
    C = quasi_triangle_constant(group(name), 2000, 0)
    assert 0.5 <= C < 5


def test_check_points():
    G = group("H1")
    assert check_points([1, 2, 3], G).shape == (1, 3)
    with pytest.raises(DimensionError):
        check_points([1, 2], G)
    with pytest.raises(ValueError):
        check_points([[np.nan, 0, 0]], G)
