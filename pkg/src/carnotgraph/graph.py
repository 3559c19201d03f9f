"""Intrinsic graphs of maps ``φ: U ⊆ W → L``.

W-points and L-points are ambient group coordinates.  Rules and boxes are
written in *parameters*: the coefficients over the canonical (RREF, layer
ordered) bases of Lie(W) and Lie(L), named ``w1, w2, ...`` and ``l1, l2, ...``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import _linalg as la
from .algebra import Subspace
from .exceptions import CarnotError, DomainError, EstimationError, HomomorphismError, ParseError, PreconditionError
from .group import CarnotGroup, exact, is_exact, to_float
from .splitting import Splitting

TRANSLATION_TOL = 1e-9
HOM_TOL = 1e-9


# ---------------------------------------------------------------------------
# domains


class Domain:
    """A Borel subset of W with decidable membership and Haar-uniform sampling."""

    splitting: Splitting

    def contains(self, w) -> np.ndarray:
        raise NotImplementedError

    def sample(self, count: int, rng_seed=None) -> np.ndarray:
        raise NotImplementedError

    def interior_margin(self, w) -> np.ndarray:
        """Parameter distance to the complement; positive only inside."""
        raise NotImplementedError


@dataclass(eq=False)
class BoxDomain(Domain):
    """Finite union of boxes ``lo <= params <= hi`` in W-parameters."""

    splitting: Splitting
    boxes: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __post_init__(self):
        d = self.splitting.dim_W
        boxes = []
        for lo, hi in self.boxes:
            lo = np.asarray([float(v) for v in lo])
            hi = np.asarray([float(v) for v in hi])
            if lo.shape != (d,) or hi.shape != (d,):
                raise DomainError(f"box bounds need {d} entries")
            if np.any(hi <= lo):
                raise DomainError("box must have hi > lo in every coordinate")
            boxes.append((lo, hi))
        if not boxes:
            raise DomainError("domain needs at least one box")
        self.boxes = tuple(boxes)

    @classmethod
    def single(cls, splitting: Splitting, lo, hi) -> "BoxDomain":
        return cls(splitting, ((np.atleast_1d(lo), np.atleast_1d(hi)),))

    def _box_hits(self, p: np.ndarray) -> np.ndarray:
        return np.stack([np.all((p >= lo) & (p <= hi), axis=-1) for lo, hi in self.boxes], axis=-1)

    def contains(self, w) -> np.ndarray:
        p = to_float(self.splitting.w_params(w))
        return np.any(self._box_hits(p), axis=-1)

    def interior_margin(self, w) -> np.ndarray:
        p = to_float(self.splitting.w_params(w))
        margins = [np.min(np.minimum(p - lo, hi - p), axis=-1) for lo, hi in self.boxes]
        return np.max(np.stack(margins, axis=-1), axis=-1)

    @property
    def volumes(self) -> np.ndarray:
        return np.array([np.prod(hi - lo) for lo, hi in self.boxes])

    def sample_params(self, count: int, rng_seed=None) -> np.ndarray:
        """Uniform on the union (overlaps thinned by their multiplicity)."""
        rng = np.random.default_rng(rng_seed)
        vol = self.volumes
        out, total = [], 0
        while total < count:
            m = max(64, 2 * (count - total))
            which = rng.choice(len(self.boxes), size=m, p=vol / vol.sum())
            lo = np.stack([self.boxes[i][0] for i in which])
            hi = np.stack([self.boxes[i][1] for i in which])
            p = rng.uniform(lo, hi)
            mult = self._box_hits(p).sum(axis=-1)
            keep = rng.uniform(size=m) < 1.0 / mult
            out.append(p[keep])
            total += int(keep.sum())
        return np.concatenate(out)[:count]

    def sample(self, count: int, rng_seed=None) -> np.ndarray:
        return self.splitting.w_point(self.sample_params(count, rng_seed))

    def grid_params(self, per_axis: int) -> np.ndarray:
        """Regular grid over every box (lexicographic order)."""
        pts = []
        for lo, hi in self.boxes:
            axes = [np.linspace(a, b, per_axis) for a, b in zip(lo, hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts.append(np.stack([m.ravel() for m in mesh], axis=-1))
        return np.concatenate(pts)


@dataclass(eq=False)
class ShiftedDomain(Domain):
    """``U_q = {a ∈ W : π_W(q⁻¹ a) ∈ U}``."""

    base: Domain
    q: np.ndarray

    @property
    def splitting(self) -> Splitting:
        return self.base.splitting

    def _pull(self, a):
        G = self.splitting.group
        return self.splitting.pi_W(G.mul(G.inv(self.q), a))

    def contains(self, a) -> np.ndarray:
        return self.base.contains(self._pull(a))

    def interior_margin(self, a) -> np.ndarray:
        return self.base.interior_margin(self._pull(a))

    def push(self, b) -> np.ndarray:
        """Inverse of the pull-back: the a ∈ U_q with π_W(q⁻¹ a) = b."""
        return self.splitting.pi_W(self.splitting.group.mul(self.q, b))

    def sample(self, count: int, rng_seed=None) -> np.ndarray:
        return self.push(self.base.sample(count, rng_seed))


# ---------------------------------------------------------------------------
# rules: W-parameters -> L-parameters


@dataclass
class PolynomialRule:
    """One polynomial in ``w1..wd`` per L-parameter; exact on Fraction input."""

    terms: list[list[tuple[Fraction, tuple[int, ...]]]]
    n_w: int
    sources: list[str] = field(default_factory=list)

    supports_exact = True

    @classmethod
    def from_strings(cls, expressions: Sequence[str], n_w: int) -> "PolynomialRule":
        import sympy
        from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

        syms = sympy.symbols([f"w{i + 1}" for i in range(n_w)]) if n_w else []
        syms = list(syms) if isinstance(syms, (list, tuple)) else [syms]
        local = {str(s): s for s in syms}
        terms = []
        for text in expressions:
            try:
                expr = parse_expr(str(text), local_dict=local, transformations=standard_transformations + (convert_xor,))
            except Exception as exc:  # sympy raises a zoo of types
                raise ParseError(f"cannot parse polynomial {text!r}: {exc}") from None
            extra = expr.free_symbols - set(syms)
            if extra:
                raise ParseError(f"unknown variables {sorted(map(str, extra))} in {text!r}")
            try:
                poly = sympy.Poly(expr, *syms) if syms else None
            except sympy.PolynomialError:
                raise ParseError(f"not a polynomial in the W parameters: {text!r}") from None
            if poly is None:
                terms.append([(Fraction(str(sympy.nsimplify(expr))), ())])
                continue
            row = []
            for monom, coeff in poly.terms():
                if not coeff.is_Rational:
                    coeff = sympy.nsimplify(coeff, rational=True)
                row.append((Fraction(int(coeff.p), int(coeff.q)), tuple(int(e) for e in monom)))
            terms.append(row)
        return cls(terms, n_w, list(map(str, expressions)))

    @classmethod
    def linear(cls, matrix, n_w: int) -> "PolynomialRule":
        """``l_j = sum_i matrix[j][i] w_i``."""
        terms = []
        for row in matrix:
            t = []
            for i, c in enumerate(row):
                c = la.as_fraction(c)
                if c:
                    e = [0] * n_w
                    e[i] = 1
                    t.append((c, tuple(e)))
            terms.append(t)
        return cls(terms, n_w)

    def __call__(self, params) -> np.ndarray:
        p = np.asarray(params)
        ex = is_exact(p)
        batch = p.shape[:-1]
        cols = []
        for row in self.terms:
            if ex:
                acc = np.empty(batch, dtype=object)
                acc[...] = Fraction(0)
            else:
                acc = np.zeros(batch)
            for coeff, mon in row:
                c = coeff if ex else float(coeff)
                val = c
                for i, e in enumerate(mon):
                    if e:
                        val = val * p[..., i] ** e
                acc = acc + val
            cols.append(acc)
        if not cols:
            return np.zeros(batch + (0,), dtype=object if ex else float)
        return np.stack(cols, axis=-1)


@dataclass
class SampleTableRule:
    """Nearest-sample lookup; meant for Lipschitz-constant estimation only."""

    params: np.ndarray
    values: np.ndarray

    supports_exact = False

    def __post_init__(self):
        from scipy.spatial import cKDTree

        self.params = np.asarray(self.params, dtype=float)
        if self.params.ndim == 1:
            self.params = self.params[:, None]
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        self._tree = cKDTree(self.params)

    def __call__(self, params) -> np.ndarray:
        p = to_float(params)
        _, idx = self._tree.query(p.reshape(-1, self.params.shape[1]))
        return self.values[idx].reshape(p.shape[:-1] + (self.values.shape[1],))


@dataclass
class CallableRule:
    func: Callable
    supports_exact: bool = False

    def __call__(self, params) -> np.ndarray:
        return np.asarray(self.func(params))


# ---------------------------------------------------------------------------
# functions W -> L


class IntrinsicFunction:
    splitting: Splitting
    domain: Domain
    supports_exact: bool = False
    is_table: bool = False

    def evaluate(self, w) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, w, check: bool = True) -> np.ndarray:
        w = np.asarray(w)
        if check and not np.all(self.domain.contains(w)):
            raise DomainError("point outside the domain of φ")
        return self.evaluate(w)

    @property
    def group(self) -> CarnotGroup:
        return self.splitting.group

    def graph_map(self, w, check: bool = True) -> np.ndarray:
        return graph_map(self, w, check)


class GraphFunction(IntrinsicFunction):
    """``φ`` given by a rule on parameters over a box-union domain."""

    def __init__(self, splitting: Splitting, domain: Domain, rule):
        self.splitting = splitting
        self.domain = domain
        if not hasattr(rule, "supports_exact"):
            rule = CallableRule(rule)
        self.rule = rule
        self.supports_exact = bool(rule.supports_exact)
        self.is_table = isinstance(rule, SampleTableRule)

    def evaluate(self, w) -> np.ndarray:
        p = self.splitting.w_params(w)
        if not self.supports_exact and is_exact(p):
            p = to_float(p)
        return self.splitting.l_point(self.rule(p))

    @classmethod
    def polynomial(cls, splitting: Splitting, expressions: Sequence[str], lo=None, hi=None, domain: Domain | None = None):
        """Convenience constructor: ``expressions[j]`` gives ``l{j+1}``."""
        if len(expressions) != splitting.dim_L:
            raise PreconditionError(f"need {splitting.dim_L} expressions, one per L parameter")
        rule = PolynomialRule.from_strings(expressions, splitting.dim_W)
        if domain is None:
            domain = BoxDomain.single(splitting, lo, hi)
        return cls(splitting, domain, rule)

    @classmethod
    def constant(cls, splitting: Splitting, l_params, domain: Domain):
        rule = PolynomialRule([[(la.as_fraction(c), (0,) * splitting.dim_W)] if c else [] for c in l_params], splitting.dim_W)
        return cls(splitting, domain, rule)


def graph_map(phi: IntrinsicFunction, w, check: bool = True) -> np.ndarray:
    """``Φ(w) = w · φ(w)``."""
    return phi.group.mul(w, phi(w, check=check))


class TranslatedFunction(IntrinsicFunction):
    """The intrinsic translation ``φ_q``, whose graph is ``q · graph(φ)``.

    ``mode="fast"`` uses the closed form available for normal L,
    ``mode="generic"`` goes through the projections, ``mode="verify"`` computes
    both and raises if they disagree by more than ``tol``.
    """

    def __init__(self, phi: IntrinsicFunction, q, mode: str = "fast", tol: float = TRANSLATION_TOL):
        if mode not in ("fast", "generic", "verify"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode != "generic" and not phi.splitting.normal:
            raise PreconditionError("the closed-form translation needs L normal")
        self.base = phi
        self.splitting = phi.splitting
        self.q = np.asarray(q)
        self.mode = mode
        self.tol = tol
        self.domain = ShiftedDomain(phi.domain, self.q)
        self.supports_exact = phi.supports_exact
        self.is_table = phi.is_table
        self.qW, self.qL = self.splitting.project(self.q)

    def evaluate_fast(self, a) -> np.ndarray:
        G = self.group
        qW, qL = self.qW, self.qL
        inner = G.mul(G.inv(qW), a)
        conj = G.mul(G.mul(G.inv(a), G.mul(qW, qL)), G.mul(G.inv(qW), a))
        return G.mul(conj, self.base(inner, check=False))

    def evaluate_generic(self, a) -> np.ndarray:
        G = self.group
        bW, bL = self.splitting.project(G.mul(G.inv(self.q), a))
        return G.mul(G.inv(bL), self.base(bW, check=False))

    def evaluate(self, a) -> np.ndarray:
        if self.mode == "generic":
            return self.evaluate_generic(a)
        fast = self.evaluate_fast(a)
        if self.mode == "verify":
            gen = self.evaluate_generic(a)
            diff = np.max(np.abs(to_float(fast - gen))) if np.size(fast) else 0.0
            if diff > self.tol:
                raise CarnotError(f"fast and generic intrinsic translations disagree by {diff:.3e}")
        return fast


def translate(phi: IntrinsicFunction, q, mode: str = "fast", tol: float = TRANSLATION_TOL) -> TranslatedFunction:
    return TranslatedFunction(phi, q, mode, tol)


# ---------------------------------------------------------------------------
# intrinsic Lipschitz constant


@dataclass
class LipschitzEstimate:
    value: float
    pairs: int
    degenerate_pairs: int


def lipschitz_quotients(phi: IntrinsicFunction, wa, wb) -> tuple[np.ndarray, np.ndarray]:
    """Per pair: ``‖π_L(Φ(w)⁻¹Φ(w'))‖`` and ``‖π_W(Φ(w)⁻¹Φ(w'))‖``."""
    G = phi.group
    rel = G.mul(G.inv(graph_map(phi, wa, check=False)), graph_map(phi, wb, check=False))
    rw, rl = phi.splitting.project(rel)
    return np.atleast_1d(G.hnorm(rl)), np.atleast_1d(G.hnorm(rw))


def intrinsic_lip_constant(phi: IntrinsicFunction, points=None, pairs=None, zero_tol: float = 0.0) -> LipschitzEstimate:
    """Max over sampled pairs of the L-to-W norm ratio of graph increments.

    Give either ``points`` (all unordered pairs are used) or ``pairs=(wa, wb)``.
    Pairs whose W-increment norm is ``<= zero_tol`` are skipped and counted.
    """
    if pairs is None:
        if points is None:
            raise ValueError("need points or pairs")
        points = np.asarray(points, dtype=float)
        if len(points) < 2:
            raise PreconditionError("need at least two sample points")
        i, j = np.triu_indices(len(points), k=1)
        wa, wb = points[i], points[j]
    else:
        wa, wb = (np.asarray(p, dtype=float) for p in pairs)
    if not (np.all(phi.domain.contains(wa)) and np.all(phi.domain.contains(wb))):
        raise DomainError("sample points must lie in the domain")
    num, den = lipschitz_quotients(phi, wa, wb)
    good = den > zero_tol
    if not good.any():
        raise EstimationError("all sampled pairs are degenerate")
    return LipschitzEstimate(float(np.max(num[good] / den[good])), int(good.sum()), int((~good).sum()))


# ---------------------------------------------------------------------------
# homogeneous homomorphisms and intrinsically linear maps


@dataclass(eq=False)
class HomogeneousHom:
    """Graded linear map Lie(source) → Lie(G), stored by the images of the
    canonical source basis (row ``i`` = image of basis vector ``i``)."""

    group: CarnotGroup
    source: Subspace
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        if self.matrix.shape != (self.source.dim, self.group.n):
            raise PreconditionError(f"matrix must have shape ({self.source.dim}, {self.group.n})")

    @property
    def pivots(self) -> list[int]:
        return [next(i for i, v in enumerate(r) if v != 0) for r in self.source.basis]

    @property
    def source_weights(self) -> np.ndarray:
        return self.group.weights[self.pivots]

    def params(self, w) -> np.ndarray:
        return np.asarray(w)[..., self.pivots]

    def __call__(self, w) -> np.ndarray:
        p = self.params(w)
        M = self.matrix
        if is_exact(p) and not is_exact(M):
            p = to_float(p)
        elif is_exact(M) and not is_exact(p):
            M = to_float(M)
        return p @ M

    def source_basis(self, exact_mode: bool = False) -> np.ndarray:
        if exact_mode:
            return np.array(self.source.basis, dtype=object).reshape(self.source.dim, self.group.n)
        return self.source.float_basis()

    def bracket_residual(self) -> float:
        """Max over basis pairs of |H([b_i, b_j]) - [H b_i, H b_j]|."""
        ex = is_exact(self.matrix)
        B = self.source_basis(ex)
        br = self.group.algebra.bracket
        worst = 0.0
        for i, j in itertools.combinations(range(self.source.dim), 2):
            lhs = self(br(B[i], B[j]))
            rhs = br(self.matrix[i], self.matrix[j])
            worst = max(worst, float(np.max(np.abs(to_float(lhs - rhs)))))
        return worst

    def grading_residual(self) -> float:
        """Size of the image components lying outside the source layer."""
        w = self.group.weights
        worst = 0.0
        for row, deg in zip(self.matrix, self.source_weights):
            off = to_float(row)[w != deg]
            if off.size:
                worst = max(worst, float(np.max(np.abs(off))))
        return worst

    def compose_dilation(self, lam) -> "HomogeneousHom":
        """``H ∘ δ_λ``."""
        if is_exact(self.matrix):
            lam = la.as_fraction(lam)
            f = np.array([lam ** int(d) for d in self.source_weights], dtype=object)
        else:
            f = float(lam) ** self.source_weights.astype(float)
        return HomogeneousHom(self.group, self.source, self.matrix * f[:, None])

    @classmethod
    def inclusion(cls, group: CarnotGroup, source: Subspace, exact_mode: bool = True) -> "HomogeneousHom":
        M = np.array(source.basis, dtype=object).reshape(source.dim, group.n)
        return cls(group, source, M if exact_mode else M.astype(float))


@dataclass(eq=False)
class IntrinsicLinearMap:
    """``ℓ(w) = w⁻¹ · H(w)``, valued in L, for a homomorphism with π_W∘H = id."""

    splitting: Splitting
    hom: HomogeneousHom

    def __call__(self, w) -> np.ndarray:
        G = self.splitting.group
        return G.mul(G.inv(w), self.hom(w))

    def graph_map(self, w) -> np.ndarray:
        return self.hom(w)

    def as_graph_function(self, domain: Domain) -> GraphFunction:
        S = self.splitting

        def rule(params):
            return S.l_params(self(S.w_point(params)))

        return GraphFunction(S, domain, CallableRule(rule, supports_exact=True))


def _linearity_probes(d: int) -> np.ndarray:
    """Deterministic non-basis parameter vectors used to check linearity."""
    probes = [np.ones(d), np.arange(1, d + 1, dtype=float) / d, (-1.0) ** np.arange(d) * 0.5]
    return np.array(probes)


def hom_from_linear(ell, splitting: Splitting | None = None, tol: float = HOM_TOL) -> HomogeneousHom:
    """Graph map ``w ↦ w · ℓ(w)`` of an intrinsically linear ℓ, as a homomorphism.

    ``ell`` is an :class:`IntrinsicLinearMap` or any callable W → L (for
    example a :class:`GraphFunction`).  Raises :class:`HomomorphismError` when
    the graph map is not linear in exponential coordinates or does not
    respect brackets.
    """
    if isinstance(ell, IntrinsicLinearMap):
        H = ell.hom
    else:
        S = splitting or ell.splitting
        G = S.group
        ex = bool(getattr(ell, "supports_exact", False))
        B = np.array(S.W.basis, dtype=object).reshape(S.dim_W, G.n)
        if not ex:
            B = B.astype(float)
        call = (lambda w: ell(w, check=False)) if isinstance(ell, IntrinsicFunction) else ell
        M = G.mul(B, call(B))
        H = HomogeneousHom(G, S.W, M)
        probes = S.w_point(_linearity_probes(S.dim_W))
        lin = np.max(np.abs(to_float(G.mul(probes, call(probes)) - H(probes))))
        if lin > tol:
            raise HomomorphismError("linearity", f"graph map is not linear in exponential coordinates (residual {lin:.3e})", lin)
    res = H.bracket_residual()
    if res > tol:
        raise HomomorphismError("brackets", f"graph map does not respect brackets (residual {res:.3e})", res)
    grad = H.grading_residual()
    if grad > tol:
        raise HomomorphismError("linearity", f"graph map does not commute with dilations (residual {grad:.3e})", grad)
    return H


def projection_residual(H: HomogeneousHom, splitting: Splitting) -> float:
    """``max_i ‖π_W(H b_i)⁻¹ · b_i‖`` over the W basis (0 iff π_W∘H = id)."""
    G = splitting.group
    B = H.source_basis(is_exact(H.matrix))
    proj = splitting.pi_W(H(B))
    return float(np.max(np.atleast_1d(G.hnorm(G.mul(G.inv(proj), B))))) if len(B) else 0.0


def linear_from_hom(H: HomogeneousHom, splitting: Splitting, tol: float = HOM_TOL) -> IntrinsicLinearMap:
    if H.source != splitting.W:
        raise PreconditionError("homomorphism must be defined on W")
    G = splitting.group
    B = H.source_basis(is_exact(H.matrix))
    diff = np.max(np.abs(to_float(splitting.pi_W(H(B)) - B))) if len(B) else 0.0
    if diff > tol:
        raise HomomorphismError("projection", f"π_W ∘ H differs from the identity on W by {diff:.3e}", float(diff))
    res = H.bracket_residual()
    if res > tol:
        raise HomomorphismError("brackets", f"H does not respect brackets (residual {res:.3e})", res)
    return IntrinsicLinearMap(splitting, H)


def image_is_subgroup(H: HomogeneousHom, count: int = 200, rng_seed=0, tol: float = 1e-9) -> bool:
    """Sampled check that the image of H is closed under products and dilations."""
    rng = np.random.default_rng(rng_seed)
    G = H.group
    Bf = H.source.float_basis()
    a = rng.uniform(-1, 1, (count, H.source.dim)) @ Bf
    b = rng.uniform(-1, 1, (count, H.source.dim)) @ Bf
    Mf = to_float(H.matrix)
    image = Subspace.span([list(r) for r in H.matrix], G.n) if H.source.dim else Subspace.zero(G.n)
    img_basis = image.float_basis()

    def in_image(x):
        if not len(img_basis):
            return np.all(np.abs(x) <= tol)
        coef, *_ = np.linalg.lstsq(img_basis.T, x.T, rcond=None)
        return np.all(np.abs(coef.T @ img_basis - x) <= tol * np.maximum(1, np.abs(x).max()))

    prod = G.mul(H.params(a) @ Mf, H.params(b) @ Mf)
    dil = G.dilate(2.7, H.params(a) @ Mf)
    return bool(in_image(prod) and in_image(dil))
