from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotgraph.exceptions import DomainError, HomomorphismError, ParseError, PreconditionError
from carnotgraph.graph import (
    BoxDomain,
    GraphFunction,
    HomogeneousHom,
    PolynomialRule,
    SampleTableRule,
    hom_from_linear,
    image_is_subgroup,
    intrinsic_lip_constant,
    linear_from_hom,
    translate,
)
from carnotgraph.group import exact
from carnotgraph.splitting import make_splitting

from conftest import CATALOG, group, rand_float, splitting


def h1_linear(c=3, lo=-2, hi=2):
    """Intrinsically linear map on ℍ¹ whose graph map is w ↦ (x, cx, 0)."""
    S = splitting("H1")
    return GraphFunction.polynomial(S, [f"{c}*w1", f"-{c}/2*w1**2"], [lo], [hi])


def h2_nonnormal_constant():
    G = group("H2")
    eye = np.eye(5, dtype=int).tolist()
    S = make_splitting(G, eye[1:], eye[:1], require_normal=False)
    return GraphFunction.constant(S, [1], BoxDomain.single(S, [-1] * 4, [1] * 4))


def random_poly(S, rng, degree=2):
    exprs = []
    for _ in range(S.dim_L):
        terms = [f"{rng.integers(-3, 4)}/{rng.integers(1, 4)}"]
        for i in range(S.dim_W):
            for e in range(1, degree + 1):
                terms.append(f"{rng.integers(-3, 4)}/{rng.integers(1, 4)}*w{i + 1}**{e}")
        exprs.append(" + ".join(terms))
    return GraphFunction.polynomial(S, exprs, [-1] * S.dim_W, [1] * S.dim_W)


def test_graph_map_known_value():
    phi = h2_nonnormal_constant()
    for eps in (Fraction(1, 2), Fraction(1, 1024)):
        w = exact([0, 0, eps, 0, 0])
        assert list(phi.graph_map(w)) == [1, 0, eps, 0, -eps / 2]


def test_graph_map_trivial_cases():
    S = splitting("engel")
    phi = GraphFunction.constant(S, [0] * S.dim_L, BoxDomain.single(S, [-1], [1]))
    w = S.w_point(np.linspace(-1, 1, 7)[:, None])
    assert np.array_equal(phi.graph_map(w), w)
    R2 = splitting("R2")
    sq = GraphFunction.polynomial(R2, ["w1**2"], [-1], [1])
    x = np.linspace(-1, 1, 5)
    assert np.allclose(sq.graph_map(R2.w_point(x[:, None])), np.stack([x, x**2], axis=1))


def test_domain_checks():
    phi = h1_linear(lo=0, hi=1)
    with pytest.raises(DomainError):
        phi(np.array([2.0, 0, 0]))
    with pytest.raises(DomainError):
        BoxDomain.single(phi.splitting, [1], [0])
    assert phi.domain.interior_margin(np.array([[0.5, 0, 0]]))[0] == pytest.approx(0.5)


def test_polynomial_rule_parsing():
    r = PolynomialRule.from_strings(["3*w1**2 - w2/2", "7"], 2)
    assert np.allclose(r(np.array([[1.0, 2.0]])), [[2.0, 7.0]])
    out = r(exact([[1, 2]]))
    assert out[0, 0] == 2 and out[0, 1] == 7
    for bad in ["w3", "sin(w1)", "w1 +"]:
        with pytest.raises(ParseError):
            PolynomialRule.from_strings([bad], 2)


def test_sample_table_rule_nearest():
    S = splitting("R2")
    rule = SampleTableRule(np.array([0.0, 1.0, 2.0]), np.array([0.0, 5.0, 7.0]))
    phi = GraphFunction(S, BoxDomain.single(S, [0], [2]), rule)
    assert phi.is_table and not phi.supports_exact
    assert np.allclose(phi(S.w_point(np.array([[0.9], [1.8]]))), [[0, 5], [0, 7]])


@pytest.mark.parametrize("name", CATALOG)
def test_graph_of_translate_is_translated_graph(name):
    S = splitting(name)
    G = S.group
    rng = np.random.default_rng(0)
    phi = random_poly(S, rng)
    w = phi.domain.sample(200, 1)
    for q in rand_float(G, 5, rng):
        phq = translate(phi, q, mode="verify")
        qW = S.pi_W(q)
        a = G.mul(qW, w)
        assert np.all(phq.domain.contains(a))
        lhs = phq.graph_map(a)
        rhs = G.mul(q, phi.graph_map(w))
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


@pytest.mark.parametrize("name", CATALOG)
def test_fast_and_generic_translation_agree(name):
    S = splitting(name)
    rng = np.random.default_rng(1)
    phi = random_poly(S, rng)
    q = rand_float(S.group, 1, rng)[0]
    fast, gen = translate(phi, q, "fast"), translate(phi, q, "generic")
    a = fast.domain.sample(300, 2)
    assert np.max(np.abs(fast(a) - gen(a))) <= 1e-9


def test_translate_identity_and_abelian():
    S = splitting("R3")
    rng = np.random.default_rng(2)
    phi = random_poly(S, rng)
    w = phi.domain.sample(50, 0)
    assert np.allclose(translate(phi, np.zeros(3))(w), phi(w))
    q = rng.uniform(-0.5, 0.5, 3)
    qW, qL = S.project(q)
    a = w + qW
    assert np.allclose(translate(phi, q)(a), qL + phi(a - qW))


def test_fast_translation_needs_normal():
    with pytest.raises(PreconditionError):
        translate(h2_nonnormal_constant(), np.zeros(5), "fast")
    translate(h2_nonnormal_constant(), np.zeros(5), "generic")


def test_lipschitz_examples():
    S = splitting("R2")
    for m in (0.5, -2.0, 3.0):
        phi = GraphFunction.polynomial(S, [f"{m}*w1"], [-1], [1])
        est = intrinsic_lip_constant(phi, points=phi.domain.sample(40, 0))
        assert est.value == pytest.approx(abs(m), rel=1e-12)
    zero = GraphFunction.constant(S, [0], BoxDomain.single(S, [-1], [1]))
    assert intrinsic_lip_constant(zero, points=zero.domain.sample(10, 0)).value == 0
    assert intrinsic_lip_constant(h1_linear(), points=h1_linear().domain.sample(100, 0)).value == pytest.approx(3)


def test_lipschitz_nonnormal_constant_finite_and_stable():
    phi = h2_nonnormal_constant()
    vals = []
    for m in (20, 80):
        vals.append(intrinsic_lip_constant(phi, points=phi.domain.sample(m, 3)).value)
    assert np.isfinite(vals).all() and vals[0] == vals[1]


def test_lipschitz_degenerate_and_monotone():
    S = splitting("R2")
    phi = GraphFunction.polynomial(S, ["w1**2"], [-1], [1])
    p = phi.domain.sample(60, 4)
    assert intrinsic_lip_constant(phi, points=p[:30]).value <= intrinsic_lip_constant(phi, points=p).value
    with pytest.raises(Exception):
        intrinsic_lip_constant(phi, points=np.zeros((3, 2)))


@pytest.mark.parametrize("name", ["H1", "engel", "H2"])
def test_lipschitz_translation_invariant(name):
    S = splitting(name)
    G = S.group
    rng = np.random.default_rng(5)
    phi = random_poly(S, rng)
    q = rand_float(G, 1, rng)[0]
    wa, wb = phi.domain.sample(100, 6), phi.domain.sample(100, 7)
    qW = S.pi_W(q)
    phq = translate(phi, q)
    e0 = intrinsic_lip_constant(phi, pairs=(wa, wb)).value
    e1 = intrinsic_lip_constant(phq, pairs=(G.mul(qW, wa), G.mul(qW, wb))).value
    assert abs(e0 - e1) <= 1e-9 * max(1, e0)


def test_hom_round_trip_examples():
    S = splitting("R2")
    ell = GraphFunction.polynomial(S, ["5/2*w1"], [-1], [1])
    H = hom_from_linear(ell)
    assert list(H.matrix[0]) == [1, Fraction(5, 2)]
    back = linear_from_hom(H, S)
    w = S.w_point(np.array([[0.3]]))
    assert np.allclose(back(w), ell(w))
    S1 = splitting("H1")
    e = GraphFunction.constant(S1, [0, 0], BoxDomain.single(S1, [-1], [1]))
    assert list(hom_from_linear(e).matrix[0]) == [1, 0, 0]


def test_h1_linear_map_is_a_homomorphism():
    phi = h1_linear(3)
    H = hom_from_linear(phi)
    assert list(H.matrix[0]) == [1, 3, 0]
    G = phi.group
    rng = np.random.default_rng(8)
    a, b = (phi.splitting.w_point(rng.uniform(-1, 1, (50, 1))) for _ in range(2))
    assert np.allclose(G.mul(H(a), H(b)), H(G.mul(a, b)), atol=1e-12)
    assert image_is_subgroup(H)


def test_naive_h1_map_is_not_intrinsically_linear():
    # w ↦ w·(0, c x, 0) = (x, c x, c x²/2) is not a homomorphism
    S = splitting("H1")
    naive = GraphFunction.polynomial(S, ["3*w1", "0"], [-1], [1])
    with pytest.raises(HomomorphismError) as exc:
        hom_from_linear(naive)
    assert exc.value.reason == "linearity"


def test_linear_from_hom_rejects_bad_projection():
    S = splitting("H1")
    H = HomogeneousHom(S.group, S.W, exact([[2, 1, 0]]))
    with pytest.raises(HomomorphismError) as exc:
        linear_from_hom(H, S)
    assert exc.value.reason == "projection"


def test_bracket_violation_detected():
    S = splitting("H2")
    # [X1, X2] = 0 but the images X1 + X4 and X2 bracket to -X5
    H = HomogeneousHom(S.group, S.W, exact([[1, 0, 0, 1, 0], [0, 1, 0, 0, 0]]))
    assert H.bracket_residual() == 1
    with pytest.raises(HomomorphismError) as exc:
        linear_from_hom(H, S)
    assert exc.value.reason == "brackets"


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(CATALOG), st.integers(0, 10_000))
def test_images_of_admissible_homs_are_subgroups(name, seed):
    S = splitting(name)
    rng = np.random.default_rng(seed)
    G = S.group
    # graph homomorphisms of W over L built from random linear first-layer data when W is horizontal
    if S.W.homogeneous_dimension(G.algebra) != S.dim_W:
        H = HomogeneousHom.inclusion(G, S.W)
    else:
        A = G.algebra
        L1 = [r for r in S.L.basis if A.weights[next(i for i, v in enumerate(r) if v)] == 1]
        M = exact(np.array(S.W.basis, dtype=object))
        for i in range(S.dim_W):
            for r in L1:
                M[i] = M[i] + Fraction(int(rng.integers(-3, 4))) * np.array(r, dtype=object)
        H = HomogeneousHom(G, S.W, M)
        if H.bracket_residual() > 0:
            return
    assert image_is_subgroup(H, rng_seed=seed)
