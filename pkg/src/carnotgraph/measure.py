"""Covering estimates of Hausdorff content, Jacobians, and the area formula check.

The content of a sampled set at scale δ is ``N(δ)·δ^k`` with ``N(δ)`` the
number of centers a greedy covering by closed homogeneous δ-balls uses,
candidates taken in lexicographic order.  No dimensional normalisation
constant is applied; every comparison made here is a ratio of two contents
computed the same way, so the constant cancels.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .algebra import Subspace
from .calculus import DEFAULT_TOL, intrinsic_diff
from .exceptions import EstimationError, NotDifferentiableError, PreconditionError
from .graph import BoxDomain, GraphFunction, HomogeneousHom, IntrinsicFunction
from .group import CarnotGroup, to_float

log = logging.getLogger(__name__)

DEFAULT_DELTAS = (0.2, 0.1, 0.05)
DEFAULT_MC_SAMPLES = 10_000
MIN_POINTS_PER_BALL = 5.0
# image-space samples per finest δ along each W axis, indexed by dim W
DEFAULT_RESOLUTION = {1: 100, 2: 8, 3: 4}


@dataclass
class MeasureEstimate:
    value: float
    error: float
    method: str
    scale: float | None = None
    samples: int = 0
    raw: float | None = None
    extrapolated: float | None = None
    table: list[tuple[float, int, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.value < 0 or self.error < 0:
            raise ValueError("measure estimates and error bars are nonnegative")
        if self.method not in ("covering", "curve-length", "classical-oracle"):
            raise ValueError(f"unknown method {self.method!r}")


def greedy_cover_count(group: CarnotGroup, points: np.ndarray, delta: float) -> int:
    """Number of closed δ-balls a greedy lexicographic covering uses."""
    P = np.asarray(points, dtype=float)
    if len(P) == 0:
        return 0
    order = np.lexsort(P.T[::-1])
    P = P[order]
    x = P[:, 0]
    # |first coordinate gap| <= δ / w_1 for any point inside the ball
    reach = delta / group.norm_weights[0]
    covered = np.zeros(len(P), dtype=bool)
    count, i, N = 0, 0, len(P)
    while i < N:
        c = P[i]
        lo = np.searchsorted(x, x[i] - reach, side="left")
        hi = np.searchsorted(x, x[i] + reach, side="right")
        d = group.hnorm(group.mul(-c, P[lo:hi]))
        covered[lo:hi] |= np.asarray(d) <= delta
        count += 1
        while i < N and covered[i]:
            i += 1
    return count


def _richardson(deltas: np.ndarray, values: np.ndarray) -> float:
    """Intercept of the least-squares line value = a + b·δ."""
    A = np.stack([np.ones_like(deltas), deltas], axis=1)
    coef, *_ = np.linalg.lstsq(A, values, rcond=None)
    return float(coef[0])


def hausdorff_content(
    group: CarnotGroup,
    points,
    k: float,
    deltas=DEFAULT_DELTAS,
    extrapolate: bool = False,
    min_points_per_ball: float = MIN_POINTS_PER_BALL,
) -> MeasureEstimate:
    """``N(δ)·δ^k`` over a δ ladder.

    ``value`` is the finest-δ content, or the linear-in-δ extrapolation when
    ``extrapolate`` is set; both are kept on the estimate.  The error bar is
    the gap between the reported value and the nearest other ladder estimate,
    but never less than the content ``δ^k`` of a single ball.
    """
    P = np.asarray(points, dtype=float).reshape(-1, group.n)
    deltas = sorted((float(d) for d in np.atleast_1d(deltas)), reverse=True)
    if len(P) == 0:
        return MeasureEstimate(0.0, 0.0, "covering", deltas[-1], 0, 0.0, 0.0 if extrapolate else None, [])
    table = []
    for d in deltas:
        N = greedy_cover_count(group, P, d)
        table.append((d, N, N * d ** k))
    dmin, nmin, _ = table[-1]
    if len(P) / nmin < min_points_per_ball:
        raise EstimationError(
            f"sampling too coarse for δ={dmin}: {len(P) / nmin:.1f} points per covering ball "
            f"(need {min_points_per_ball})"
        )
    vals = np.array([t[2] for t in table])
    raw = float(vals[-1])
    if extrapolate and len(table) >= 2:
        ext = max(_richardson(np.array(deltas), vals), 0.0)
        value, err = ext, abs(ext - raw)
    else:
        ext = None
        value = raw
        err = abs(raw - vals[-2]) if len(vals) >= 2 else 0.0
    # a covering count is only known to within one ball
    err = max(err, dmin ** k)
    return MeasureEstimate(value, err, "covering", dmin, len(P), raw, ext, table)


def curve_length(group: CarnotGroup, points) -> MeasureEstimate:
    """Polygonal length ``Σ hdist(p_i, p_{i+1})`` of an ordered sample."""
    P = np.asarray(points, dtype=float).reshape(-1, group.n)
    if len(P) < 2:
        return MeasureEstimate(0.0, 0.0, "curve-length", None, len(P))
    steps = np.atleast_1d(group.hdist(P[:-1], P[1:]))
    if len(P) >= 3:
        skip = np.atleast_1d(group.hdist(P[:-2], P[2:]))
        pair = steps[:-1] + steps[1:]
        back = (pair > 0) & (skip < 0.1 * pair)
        if back.any():
            warnings.warn(
                f"curve sample back-tracks at {int(back.sum())} places; is it ordered?",
                RuntimeWarning,
                stacklevel=2,
            )
    total = float(np.sum(steps))
    # coarsening by 2 gives a lower bound; the gap is the refinement error bar
    coarse = float(np.sum(np.atleast_1d(group.hdist(P[:-2:2], P[2::2])))) if len(P) >= 3 else total
    return MeasureEstimate(total, abs(total - coarse), "curve-length", None, len(P))


# ---------------------------------------------------------------------------
# Jacobians


def _ball_params(group: CarnotGroup, source: Subspace, per_axis: int, radius: float = 1.0) -> np.ndarray:
    """Grid of W-parameters whose points lie in the closed W-ball of ``radius``."""
    A = group.algebra
    Sb = source.float_basis()
    pivots = [next(i for i, v in enumerate(r) if v != 0) for r in source.basis]
    wts = A.weights[pivots]
    half = np.empty(source.dim)
    for i in range(source.dim):
        blk = Sb[wts == wts[i]][:, A.layer_slices[wts[i] - 1]]
        half[i] = (radius / group.norm_weights[wts[i] - 1]) ** wts[i] / np.linalg.svd(blk, compute_uv=False).min()
    axes = [np.linspace(-h, h, per_axis) for h in half]
    mesh = np.meshgrid(*axes, indexing="ij")
    params = np.stack([m.ravel() for m in mesh], axis=-1)
    return params[np.asarray(group.hnorm(params @ Sb)) <= radius]


def _stretch(M: np.ndarray) -> float:
    return max(1.0, float(np.max(np.linalg.norm(to_float(M), axis=1))))


def _per_axis(dim: int, stretch: float, deltas, resolution: int | None, extent: float = 2.0) -> int:
    res = resolution or DEFAULT_RESOLUTION.get(dim, 3)
    return int(np.ceil(extent * stretch * res / min(deltas))) + 1


def jacobian(
    F: HomogeneousHom,
    k: float | None = None,
    deltas=DEFAULT_DELTAS,
    extrapolate: bool = True,
    resolution: int | None = None,
) -> MeasureEstimate:
    """``H^k(F(B(e,1))) / H^k(B(e,1))`` with matched δ ladders and one grid.

    The same parameter grid of the unit ball of the source is used for the
    denominator and (mapped by F) for the numerator.
    """
    G = F.group
    src = F.source
    if k is None:
        k = src.homogeneous_dimension(G.algebra)
    Sb = src.float_basis()
    M = to_float(F.matrix)
    per = _per_axis(src.dim, _stretch(M), deltas, resolution)
    params = _ball_params(G, src, per)
    den = hausdorff_content(G, params @ Sb, k, deltas, extrapolate)
    if den.value <= den.error or den.value == 0:
        raise EstimationError("denominator content is consistent with zero")
    num = hausdorff_content(G, params @ M, k, deltas, extrapolate)
    J = num.value / den.value
    rel = np.hypot(num.error / max(num.value, 1e-300), den.error / den.value)
    raw = (num.raw / den.raw) if num.raw and den.raw else None
    ext = (num.extrapolated / den.extrapolated) if extrapolate and den.extrapolated else None
    table = [(d, nn, vn / vd) for (d, nn, vn), (_, _, vd) in zip(num.table, den.table)]
    return MeasureEstimate(J, J * rel, "covering", den.scale, len(params), raw, ext, table)


class JacobianCache:
    """Memoizes :func:`jacobian` on a quantized differential matrix.

    Matrices are bucketed on a grid of relative spacing ``quantum``
    (default 1e-3, an order below the estimator's own error bar); the first
    estimate computed in a bucket is reused for the whole bucket.
    """

    def __init__(self, quantum: float = 1e-3, **kwargs):
        self.quantum = quantum
        self.kwargs = kwargs
        self._store: dict = {}
        self.hits = 0

    def __call__(self, F: HomogeneousHom) -> MeasureEstimate:
        M = to_float(F.matrix)
        q = self.quantum * max(1.0, float(np.max(np.abs(M))))
        key = (id(F.group), F.source.basis, tuple(np.round(M.ravel() / q).astype(np.int64)))
        if key in self._store:
            self.hits += 1
            return self._store[key]
        est = jacobian(F, **self.kwargs)
        self._store[key] = est
        return est


# ---------------------------------------------------------------------------
# area formula


@dataclass
class AreaConfig:
    deltas: tuple = DEFAULT_DELTAS
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    tol: float = DEFAULT_TOL
    scales: tuple | None = None
    extrapolate: bool = True
    resolution: int | None = None
    max_failure_fraction: float = 0.01


@dataclass
class AreaReport:
    lhs: float
    rhs: float
    lhs_err: float
    rhs_err: float
    rel_discrepancy: float
    k: int
    domain_content: MeasureEstimate
    lhs_estimate: MeasureEstimate
    mean_jacobian: float
    jacobian_stderr: float
    mc_samples: int
    failures: int
    seed: int
    aborted: bool = False
    message: str = ""
    lhs_table: list = field(default_factory=list)
    domain_table: list = field(default_factory=list)


def _box_grid(V: BoxDomain, per_axis: int) -> np.ndarray:
    return V.grid_params(per_axis)


def _graph_sample(phi: IntrinsicFunction, V: BoxDomain, per_axis: int) -> np.ndarray:
    S = phi.splitting
    return phi.graph_map(S.w_point(_box_grid(V, per_axis)), check=False)


def area_check(phi: GraphFunction, V: BoxDomain | None = None, config: AreaConfig | None = None) -> AreaReport:
    """Compare both sides of the area formula on ``V ⊆ U``.

    LHS: covering content of a dense grid sample of ``Φ(V)``.
    RHS: covering content of V times the Monte-Carlo mean of ``J(dΦ_x)`` over
    Haar-uniform ``x ∈ V``.
    """
    cfg = config or AreaConfig()
    S = phi.splitting
    G = S.group
    V = V or phi.domain
    if not isinstance(V, BoxDomain):
        raise PreconditionError("V must be a union of boxes")
    k = S.k
    d = S.dim_W
    extent = max(float(np.max(hi - lo)) for lo, hi in V.boxes)

    # RHS first: its differentials give the stretch needed for the LHS grid
    xs = S.w_point(V.sample_params(cfg.mc_samples, cfg.seed))
    jac = JacobianCache(deltas=cfg.deltas, extrapolate=cfg.extrapolate, resolution=cfg.resolution)
    Js, Jerrs, stretch, failures = [], [], 1.0, 0
    for x in xs:
        try:
            _, rep = intrinsic_diff(phi, x, cfg.scales, cfg.tol)
        except NotDifferentiableError:
            failures += 1
            continue
        est = jac(rep.hom)
        Js.append(est.value)
        Jerrs.append(est.error)
        stretch = max(stretch, _stretch(rep.matrix))
    base_per = _per_axis(d, 1.0, cfg.deltas, cfg.resolution, extent)
    dom = hausdorff_content(G, S.w_point(_box_grid(V, base_per)), k, cfg.deltas, cfg.extrapolate)
    if failures > cfg.max_failure_fraction * len(xs):
        msg = f"differentiation failed at {failures} of {len(xs)} sampled points"
        nan = float("nan")
        return AreaReport(nan, nan, nan, nan, nan, k, dom, dom, nan, nan, len(xs), failures, cfg.seed, True, msg)
    Js = np.array(Js)
    meanJ = float(Js.mean())
    stderr = float(Js.std(ddof=1) / np.sqrt(len(Js))) if len(Js) > 1 else 0.0
    rhs = dom.value * meanJ
    rhs_err = dom.value * (stderr + float(np.mean(Jerrs))) + meanJ * dom.error

    per = _per_axis(d, stretch, cfg.deltas, cfg.resolution, extent)
    lhs_est = hausdorff_content(G, _graph_sample(phi, V, per), k, cfg.deltas, cfg.extrapolate)
    lhs = lhs_est.value
    rel = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    log.debug("area check: lhs=%g rhs=%g (%d jacobians, %d cache hits)", lhs, rhs, len(Js), jac.hits)
    return AreaReport(
        lhs, rhs, lhs_est.error, rhs_err, rel, k, dom, lhs_est, meanJ, stderr, len(xs), failures, cfg.seed,
        lhs_table=lhs_est.table, domain_table=dom.table,
    )


def classical_area_oracle(phi: GraphFunction, V: BoxDomain | None = None, nodes: int = 64, h: float = 1e-5) -> float:
    """Euclidean area of the graph over V: Gauss–Legendre quadrature of
    ``sqrt(det(JᵀJ))`` with ``J`` the Jacobian of the parametrised graph map,
    ``∇φ`` by central differences.  Abelian groups only.
    """
    S = phi.splitting
    G = S.group
    if not G.algebra.is_abelian or G.step != 1:
        raise PreconditionError("the classical oracle needs an abelian group")
    V = V or phi.domain
    Bw, Bl = S.W.float_basis(), S.L.float_basis()
    d = S.dim_W
    x, wq = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for lo, hi in V.boxes:
        axes = [(lo[i] + hi[i]) / 2 + (hi[i] - lo[i]) / 2 * x for i in range(d)]
        wts = [(hi[i] - lo[i]) / 2 * wq for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        P = np.stack([m.ravel() for m in mesh], axis=-1)
        Wt = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1).reshape(-1, d), axis=1)
        grads = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            grads.append((phi.rule(P + e) - phi.rule(P - e)) / (2 * h))
        grad = np.stack(grads, axis=1)  # (m, d, dim L)
        J = Bw[None, :, :] + grad @ Bl  # (m, d, n): row i = dΦ/dp_i
        gram = J @ np.transpose(J, (0, 2, 1))
        total += float(np.sum(Wt * np.sqrt(np.linalg.det(gram))))
    return total
