"""Numerical Pansu and intrinsic differentiation.

The Pansu difference quotient of ``f`` at ``a0`` in direction ``u`` is

    D_t(u) = δ_{1/t}( f(a0)⁻¹ · f(a0 · δ_t u) ),

evaluated on a geometric ladder of scales ``t``.  Its coordinates are power
series in ``t`` for smooth maps, so consecutive ladder values are combined by
first-order Richardson extrapolation before the Cauchy test.  Only the images
of the first-layer basis of W are estimated directly; the rest of the
homomorphism is generated by brackets and then cross-checked on held-out
directions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import _linalg as la
from .algebra import Subspace
from .exceptions import DomainError, EstimationError, NotDifferentiableError, PreconditionError
from .graph import (
    Domain,
    HomogeneousHom,
    IntrinsicFunction,
    IntrinsicLinearMap,
    graph_map,
    projection_residual,
    translate,
)
from .group import CarnotGroup, exact, is_exact, to_float

DEFAULT_SCALES = tuple(2.0 ** -k for k in range(3, 13))
DEFAULT_TOL = 1e-4
MONOTONE_SLACK = 1.1
MIN_SCALES = 5
# roundoff model for the noise floor of the float residuals
_NOISE_FACTOR = 1e3


@dataclass
class DifferentiabilityReport:
    base_point: np.ndarray
    hom: HomogeneousHom | None
    scales: np.ndarray
    residuals: np.ndarray
    cauchy: np.ndarray
    converged: bool
    validation_residual: float = 0.0
    bracket_residual: float = 0.0
    projection_residual: float | None = None
    exact: bool = False
    message: str = ""
    direction_residuals: dict = field(default_factory=dict, repr=False)

    @property
    def matrix(self) -> np.ndarray | None:
        return None if self.hom is None else self.hom.matrix

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])


def _weights_power(weights: np.ndarray, factor, ex: bool) -> np.ndarray:
    if ex:
        return np.array([factor ** int(w) for w in weights], dtype=object)
    return float(factor) ** weights.astype(float)


def _ladder(scales, ex: bool) -> list:
    scales = list(DEFAULT_SCALES if scales is None else scales)
    if any(not t > 0 for t in scales) or any(b >= a for a, b in zip(scales, scales[1:])):
        raise PreconditionError("scales must be positive and strictly decreasing")
    return [la.as_fraction(t) for t in scales] if ex else [float(t) for t in scales]


def _probe_directions(B: np.ndarray, weights: np.ndarray) -> list[np.ndarray]:
    """Held-out directions: combinations the reconstruction has not seen."""
    d = len(B)
    first = [i for i in range(d) if weights[i] == 1]
    higher = [i for i in range(d) if weights[i] > 1]
    half = Fraction(1, 2) if B.dtype == object else 0.5
    probes = [B[i] for i in higher]
    if len(first) >= 2:
        alt = sum((B[i] * (1 if m % 2 == 0 else -1) for m, i in enumerate(first)), B[first[0]] * 0)
        probes.append(alt)
    mid = sum((B[i] for i in range(d)), B[0] * 0) * half
    # opposite pair catches two-sided kinks such as |w| at 0
    probes += [mid, -mid]
    return probes


def _admissible(group: CarnotGroup, a0, u, ladder, domain: Domain | None):
    """Largest suffix of the ladder on which a0·δ_t(σu) stays in the domain, per sign σ."""
    best = None
    for sign in (1, -1):
        v = u * sign
        if domain is None:
            return sign, 0
        pts = np.stack([group.mul(a0, group.dilate(t, v)) for t in ladder])
        inside = np.asarray(domain.contains(pts))
        # first index from which all remaining scales are inside
        start = len(ladder)
        for i in range(len(ladder) - 1, -1, -1):
            if not inside[i]:
                break
            start = i
        if start == 0:
            return sign, 0
        if best is None or start < best[1]:
            best = (sign, start)
    return best


def _generate_hom(group: CarnotGroup, source: Subspace, first_images: dict[int, np.ndarray], ex: bool):
    """Extend first-layer images to all of Lie(W) by brackets.

    Returns (matrix, kernel_residual).  The kernel residual measures how far
    the images violate the linear relations among the generating brackets.
    """
    A = group.algebra
    d, n = source.dim, group.n
    B = np.array(source.basis, dtype=object).reshape(d, n)
    pivots = [next(i for i, v in enumerate(r) if v != 0) for r in source.basis]
    weights = A.weights[pivots]
    M = np.empty((d, n), dtype=object)
    M[...] = Fraction(0)
    if not ex:
        M = np.zeros((d, n))
    for i, img in first_images.items():
        M[i] = img
    first = [i for i in range(d) if weights[i] == 1]
    kernel_res = 0.0
    for a in range(2, A.step + 1):
        target = [i for i in range(d) if weights[i] == a]
        if not target:
            continue
        prev = [i for i in range(d) if weights[i] == a - 1]
        pairs = [(i, j) for i in first for j in prev if not (a == 2 and j <= i)]
        gens = [A.bracket(B[i], B[j]) for i, j in pairs]
        # parameters (coefficients over the target basis) of each generator
        gen_params = [[g[pivots[m]] for m in target] for g in gens]
        if la.rank(gen_params) < len(target):
            raise PreconditionError("first layer of W does not generate W: not a Carnot subgroup")
        images = [A.bracket(M[i], M[j]) for i, j in pairs]
        # express each target basis vector as a combination of generators
        T = [[gen_params[p][m] for p in range(len(pairs))] for m in range(len(target))]
        for m, idx in enumerate(target):
            e = [Fraction(int(mm == m)) for mm in range(len(target))]
            sol = _solve_min(T, e)
            acc = sum((images[p] * (sol[p] if ex else float(sol[p])) for p in range(len(pairs)) if sol[p] != 0), M[idx] * 0)
            M[idx] = acc
        for kv in la.nullspace(T, len(pairs)) if T else []:
            rel = sum((images[p] * (kv[p] if ex else float(kv[p])) for p in range(len(pairs)) if kv[p] != 0), M[0] * 0)
            kernel_res = max(kernel_res, float(np.max(np.abs(to_float(rel)))))
    return M, kernel_res


def _solve_min(T, e):
    """Some exact solution x of T x = e (T has full row rank)."""
    rows = len(T)
    cols = len(T[0]) if rows else 0
    aug = [list(T[r]) + [e[r]] for r in range(rows)]
    red, piv = la.rref(aug)
    x = [Fraction(0)] * cols
    for row, p in zip(red, piv):
        if p == cols:
            raise PreconditionError("inconsistent generating system")
        x[p] = row[cols]
    return x


def _noise_floor(scale_mag: float, ladder, weights) -> np.ndarray:
    eps = np.finfo(float).eps
    degrees = sorted(set(int(w) for w in weights))
    out = []
    for t in ladder:
        out.append(max((_NOISE_FACTOR * eps * scale_mag ** a) ** (1.0 / a) / float(t) for a in degrees))
    return np.array(out)


def pansu_diff(
    f: Callable,
    a0,
    group: CarnotGroup,
    source: Subspace,
    scales=None,
    tol: float = DEFAULT_TOL,
    domain: Domain | None = None,
    extrapolate: bool = True,
    strict: bool = True,
) -> DifferentiabilityReport:
    """Estimate the Pansu differential of ``f: W → G`` at ``a0``.

    ``f`` maps arrays of W-points to G-points.  Exact (Fraction) ``a0`` runs
    the whole ladder in rational arithmetic, provided ``f`` accepts it.
    With ``strict`` a non-convergent ladder or a bracket inconsistency raises
    :class:`NotDifferentiableError`; otherwise the report says
    ``converged=False``.
    """
    a0 = np.asarray(a0)
    ex = is_exact(a0)
    if not ex:
        a0 = a0.astype(float)
    ladder = _ladder(scales, ex)
    d, n = source.dim, group.n
    if d == 0:
        raise PreconditionError("source subgroup is trivial")
    B = np.array(source.basis, dtype=object).reshape(d, n)
    if not ex:
        B = B.astype(float)
    pivots = [next(i for i, v in enumerate(r) if v != 0) for r in source.basis]
    wts = group.weights[pivots]
    first = [i for i in range(d) if wts[i] == 1]
    directions = [B[i] for i in first] + _probe_directions(B, wts)
    n_first = len(first)

    signs, start = [], 0
    for u in directions:
        sgn, st = _admissible(group, a0, u, ladder, domain)
        signs.append(sgn)
        start = max(start, st)
    ladder = ladder[start:]
    if len(ladder) < MIN_SCALES:
        raise NotDifferentiableError(f"only {len(ladder)} ladder scales keep the probes inside the domain")
    m = len(ladder)
    U = np.stack([u * s for u, s in zip(directions, signs)])  # (K, n)
    K = len(U)

    pts = np.stack([group.mul(a0, group.dilate(t, U)) for t in ladder])  # (m, K, n)
    f0 = np.asarray(f(a0[None, :]))[0]
    vals = np.asarray(f(pts.reshape(m * K, n))).reshape(m, K, n)
    incr = group.mul(group.inv(f0), vals)
    one = Fraction(1) if ex else 1.0
    D = np.stack([incr[i] * _weights_power(group.weights, one / ladder[i], ex) for i in range(m)])

    if extrapolate:
        E = [(D[i] * ladder[i - 1] - D[i - 1] * ladder[i]) * (one / (ladder[i - 1] - ladder[i])) for i in range(1, m)]
    else:
        E = [D[i] for i in range(m)]
    E = np.stack(E)
    limit = E[-1]  # (K, n) in the signed directions
    cauchy = np.full(m, np.nan)
    off = m - len(E)
    for i in range(1, len(E)):
        cauchy[i + off] = float(np.max(np.abs(to_float(E[i] - E[i - 1]))))

    # unsign: in exponential coordinates df[-u] = -df[u]
    unsigned = np.stack([limit[k] * signs[k] for k in range(K)])
    layer1 = group.weights == 1
    first_images = {}
    for k, i in enumerate(first):
        img = unsigned[k].copy()
        img[~layer1] = 0
        first_images[i] = img
    M, kernel_res = _generate_hom(group, source, first_images, ex)
    hom = HomogeneousHom(group, source, M)

    probes = U[n_first:]
    probe_unsigned = np.stack([directions[k] for k in range(n_first, K)]) if K > n_first else np.zeros((0, n))
    validation = 0.0
    if len(probes):
        pred = hom(probe_unsigned)
        validation = float(np.max(np.abs(to_float(unsigned[n_first:] - pred))))
    bracket_res = hom.bracket_residual()

    # differential quotients per scale, in the signed directions
    dfU = hom(U)
    norms_u = np.asarray(group.hnorm(U), dtype=float)
    residuals = np.empty(m)
    per_dir = np.empty((m, K))
    for i in range(m):
        q = np.asarray(group.hnorm(group.mul(group.inv(dfU), D[i])), dtype=float) / norms_u
        per_dir[i] = q
        residuals[i] = float(np.max(q))

    if ex:
        floor = np.zeros(m)
    else:
        mag = 1.0 + float(np.max(np.abs(f0))) + float(np.max(np.abs(a0)))
        floor = _noise_floor(mag, ladder, group.weights)
    monotone = all(residuals[i + 1] <= MONOTONE_SLACK * residuals[i] + floor[i + 1] for i in range(m - 1))
    tail = cauchy[~np.isnan(cauchy)][-3:]
    cauchy_ok = len(tail) == 3 and bool(np.all(tail <= tol))
    problems = []
    if not cauchy_ok:
        problems.append(f"ladder not Cauchy (last differences {np.array2string(tail, precision=3)})")
    if not monotone:
        problems.append("residuals do not decrease along the ladder")
    if kernel_res > tol or bracket_res > tol:
        problems.append(f"bracket-generation inconsistency {max(kernel_res, bracket_res):.3e}")
    if validation > tol:
        problems.append(f"held-out directions disagree with the reconstruction by {validation:.3e}")
    converged = not problems
    report = DifferentiabilityReport(
        base_point=a0,
        hom=hom,
        scales=np.array([float(t) for t in ladder]),
        residuals=residuals,
        cauchy=cauchy,
        converged=converged,
        validation_residual=validation,
        bracket_residual=max(kernel_res, bracket_res),
        exact=ex,
        message="; ".join(problems),
        direction_residuals={"per_direction": per_dir},
    )
    if strict and not converged:
        raise NotDifferentiableError("Pansu differentiation failed: " + report.message, report)
    return report


def intrinsic_diff(
    phi: IntrinsicFunction,
    a0,
    scales=None,
    tol: float = DEFAULT_TOL,
    extrapolate: bool = True,
    strict: bool = True,
) -> tuple[IntrinsicLinearMap | None, DifferentiabilityReport]:
    """Intrinsic differential ``d^φφ_{a0}[w] = w⁻¹ · dΦ_{a0}[w]``.

    Runs :func:`pansu_diff` on the graph map and checks ``π_W ∘ dΦ = id``.
    """
    S = phi.splitting
    if not S.normal:
        raise PreconditionError("intrinsic differentiation via the graph map needs L normal")
    if phi.is_table:
        raise PreconditionError("sample-table functions are not differentiated")
    a0 = np.asarray(a0)
    if is_exact(a0) and not phi.supports_exact:
        a0 = to_float(a0)
    if not float(np.asarray(phi.domain.interior_margin(a0[None, :]))[0]) > 0:
        raise DomainError("base point must be an interior point of the domain")

    def Phi(w):
        return phi.graph_map(w, check=False)

    report = pansu_diff(Phi, a0, S.group, S.W, scales, tol, phi.domain, extrapolate, strict=False)
    report.projection_residual = projection_residual(report.hom, S)
    if report.projection_residual > tol:
        report.converged = False
        msg = f"π_W ∘ dΦ differs from the identity by {report.projection_residual:.3e}"
        report.message = "; ".join(filter(None, [report.message, msg]))
    if not report.converged:
        if strict:
            raise NotDifferentiableError("intrinsic differentiation failed: " + report.message, report)
        return None, report
    return IntrinsicLinearMap(S, report.hom), report


@dataclass
class QuotientTrace:
    scales: np.ndarray
    quotients: np.ndarray  # (scales, directions)

    @property
    def sup(self) -> np.ndarray:
        return np.max(self.quotients, axis=1)


def intrinsic_quotient_trace(phi: IntrinsicFunction, a0, ell: IntrinsicLinearMap | Callable, scales=None, directions=None) -> QuotientTrace:
    """``‖ℓ(b)⁻¹ · φ_{p0}(b)‖ / ‖b‖`` along ``b = δ_t(u)``, ``p0 = φ(a0)⁻¹ a0⁻¹``."""
    S, G = phi.splitting, phi.group
    a0 = np.asarray(a0)
    ex = is_exact(a0) and phi.supports_exact
    if not ex:
        a0 = to_float(a0)
    ladder = _ladder(scales, ex)
    p0 = G.mul(G.inv(phi(a0[None, :], check=False)[0]), G.inv(a0))
    shifted = translate(phi, p0)
    if directions is None:
        B = np.array(S.W.basis, dtype=object).reshape(S.dim_W, G.n)
        directions = list(B if ex else B.astype(float))
    cols = []
    for u in directions:
        u = np.asarray(u)
        sgn, start = _admissible(G, G.identity(ex), u, ladder, shifted.domain)
        row = np.full(len(ladder), np.nan)
        for i, t in enumerate(ladder):
            if i < start:
                continue
            b = G.dilate(t, u * sgn)[None, :]
            val = G.mul(G.inv(ell(b)), shifted(b, check=False))
            row[i] = float(np.asarray(G.hnorm(val))[0]) / float(np.asarray(G.hnorm(b))[0])
        cols.append(row)
    return QuotientTrace(np.array([float(t) for t in ladder]), np.stack(cols, axis=1))


# ---------------------------------------------------------------------------
# blow-ups


@dataclass
class BlowupTrace:
    lambdas: np.ndarray
    distances: np.ndarray
    counts: np.ndarray


def _subgroup_ball_sample(group: CarnotGroup, T: Subspace, R: float, per_axis: int) -> np.ndarray:
    """Grid sample of ``T ∩ B̄(e, R)``."""
    A = group.algebra
    Tb = T.float_basis()
    pivots = [next(i for i, v in enumerate(r) if v != 0) for r in T.basis]
    wts = A.weights[pivots]
    half = np.empty(T.dim)
    for i in range(T.dim):
        blk = Tb[wts == wts[i]][:, A.layer_slices[wts[i] - 1]]
        smin = np.linalg.svd(blk, compute_uv=False).min()
        half[i] = R ** wts[i] / smin
    axes = [np.linspace(-h, h, per_axis) for h in half]
    mesh = np.meshgrid(*axes, indexing="ij")
    params = np.stack([m.ravel() for m in mesh], axis=-1)
    pts = params @ Tb
    return pts[np.asarray(group.hnorm(pts)) <= R]


def _one_sided_distance(group: CarnotGroup, P: np.ndarray, T: np.ndarray, chunk: int = 256) -> float:
    worst = 0.0
    invT = group.inv(T)
    for s in range(0, len(P), chunk):
        p = P[s:s + chunk]
        dist = group.hnorm(group.mul(invT[None, :, :], p[:, None, :]))
        worst = max(worst, float(np.max(np.min(dist, axis=1))))
    return worst


def blowup_tangent_check(
    phi: IntrinsicFunction,
    a0,
    T,
    lambdas=(1, 2, 4, 8, 16),
    R: float = 1.0,
    graph_per_axis: int = 801,
    tangent_per_axis: int = 2001,
    reach: float = 4.0,
    min_samples: int = 20,
) -> BlowupTrace:
    """Sampled one-sided Hausdorff distance from blown-up graphs to ``T``.

    At each λ the graph is sampled over ``a0 · δ_{1/λ}(box)`` (the only part
    of U that can land in the ball), mapped by ``p ↦ δ_λ(Φ(a0)⁻¹ p)`` and
    intersected with ``B̄(e, R)``; the distance to ``T ∩ B̄(e, R)`` is the
    max over those points of the distance to a fine grid on ``T``.
    """
    S, G = phi.splitting, phi.group
    if not isinstance(T, Subspace):
        T = Subspace.span(T, G.n)
    a0 = to_float(a0)
    base = graph_map(phi, a0[None, :], check=False)[0]
    Tpts = _subgroup_ball_sample(G, T, R, tangent_per_axis if T.dim == 1 else max(11, int(tangent_per_axis ** (1 / T.dim))))
    dists, counts = [], []
    d = S.dim_W
    per = graph_per_axis if d == 1 else max(5, int(graph_per_axis ** (1 / d)))
    axes = [np.linspace(-1, 1, per)] * d
    mesh = np.meshgrid(*axes, indexing="ij")
    unit = np.stack([m.ravel() for m in mesh], axis=-1)
    for lam in lambdas:
        half = (reach * R) ** S.w_weights.astype(float)
        v = S.w_point(unit * half)
        w = G.mul(a0, G.dilate(1.0 / lam, v))
        w = w[np.asarray(phi.domain.contains(w))]
        if not len(w):
            raise EstimationError(f"no graph samples near the base point at λ={lam}")
        pts = G.dilate(lam, G.mul(G.inv(base), graph_map(phi, w, check=False)))
        pts = pts[np.asarray(G.hnorm(pts)) <= R]
        if len(pts) < min_samples:
            raise EstimationError(f"only {len(pts)} samples land in the ball at λ={lam}")
        dists.append(_one_sided_distance(G, pts, Tpts))
        counts.append(len(pts))
    return BlowupTrace(np.asarray(lambdas, dtype=float), np.array(dists), np.array(counts))

