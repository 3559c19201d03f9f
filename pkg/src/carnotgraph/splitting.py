"""Complementary homogeneous subgroups ``G = W · L`` and their projections."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _linalg as la
from .algebra import (
    StratifiedAlgebra,
    Subspace,
    check_carnot_subgroup,
    complementary,
    ideal_witness,
    is_graded_subalgebra,
)
from .exceptions import DomainError, SplittingError
from .group import CarnotGroup, exact, is_exact, to_float

MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class _Layer:
    sl: slice
    proj_exact: np.ndarray  # row vector r -> r @ P is the W-part
    proj: np.ndarray


@dataclass(eq=False)
class Splitting:
    """A validated pair (W, L) of complementary graded subalgebras.

    ``normal`` records whether L is an ideal.  :func:`make_splitting` insists
    on it by default; the non-normal case is only built on request, for the
    counterexample computations.
    """

    group: CarnotGroup
    W: Subspace
    L: Subspace
    normal: bool
    carnot: bool
    layers: tuple[_Layer, ...] = field(repr=False)

    @property
    def algebra(self) -> StratifiedAlgebra:
        return self.group.algebra

    @property
    def k(self) -> int:
        """Homogeneous dimension of W."""
        return self.W.homogeneous_dimension(self.algebra)

    @property
    def dim_W(self) -> int:
        return self.W.dim

    @property
    def dim_L(self) -> int:
        return self.L.dim

    # -- parametrizations -------------------------------------------------
    # The canonical bases are in RREF, so the parameters of a point of W are
    # just its coordinates at the pivot columns.

    @property
    def w_pivots(self) -> list[int]:
        return [next(i for i, v in enumerate(r) if v != 0) for r in self.W.basis]

    @property
    def l_pivots(self) -> list[int]:
        return [next(i for i, v in enumerate(r) if v != 0) for r in self.L.basis]

    @property
    def w_weights(self) -> np.ndarray:
        """Dilation degree of each W parameter."""
        return self.algebra.weights[self.w_pivots]

    @property
    def l_weights(self) -> np.ndarray:
        return self.algebra.weights[self.l_pivots]

    def _basis(self, S: Subspace, ex: bool) -> np.ndarray:
        if ex:
            return np.array(S.basis, dtype=object).reshape(S.dim, self.group.n)
        return S.float_basis()

    def w_point(self, params) -> np.ndarray:
        params = np.asarray(params)
        return params @ self._basis(self.W, is_exact(params))

    def l_point(self, params) -> np.ndarray:
        params = np.asarray(params)
        return params @ self._basis(self.L, is_exact(params))

    def w_params(self, w) -> np.ndarray:
        return np.asarray(w)[..., self.w_pivots]

    def l_params(self, l) -> np.ndarray:
        return np.asarray(l)[..., self.l_pivots]

    # -- membership -------------------------------------------------------

    def _off_part(self, g, W_side: bool) -> np.ndarray:
        g = np.asarray(g)
        ex = is_exact(g)
        out = []
        for layer in self.layers:
            r = g[..., layer.sl]
            wpart = r @ (layer.proj_exact if ex else layer.proj)
            out.append(r - wpart if W_side else wpart)
        return np.concatenate(out, axis=-1)

    def in_W(self, g, tol: float = MEMBERSHIP_TOL):
        off = self._off_part(g, True)
        if is_exact(off):
            return np.all(off == 0, axis=-1)
        scale = np.maximum(1.0, np.max(np.abs(to_float(g)), axis=-1))
        return np.max(np.abs(off), axis=-1) <= tol * scale

    def in_L(self, g, tol: float = MEMBERSHIP_TOL):
        off = self._off_part(g, False)
        if is_exact(off):
            return np.all(off == 0, axis=-1)
        scale = np.maximum(1.0, np.max(np.abs(to_float(g)), axis=-1))
        return np.max(np.abs(off), axis=-1) <= tol * scale

    # -- projections ------------------------------------------------------

    def project(self, g) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(g_W, g_L)`` with ``g = g_W · g_L``.

        Layer by layer: the layer-a coordinate of ``w · l`` is
        ``w_a + l_a + R_a`` where ``R_a`` only involves lower layers, so the
        residual ``g_a - R_a`` is split along ``V_a ∩ W`` and ``V_a ∩ L``.
        """
        (g,) = self.group._check(g)
        ex = is_exact(g)
        if ex:
            w = np.empty(g.shape, dtype=object)
            w[...] = Fraction(0)
        else:
            g = np.asarray(g, dtype=float)
            w = np.zeros_like(g)
        l = w.copy()
        for a, layer in enumerate(self.layers):
            sl = layer.sl
            r = g[..., sl]
            if a:
                r = r - self.group.mul(w, l)[..., sl]
            wa = r @ (layer.proj_exact if ex else layer.proj)
            w[..., sl] = wa
            l[..., sl] = r - wa
        return w, l

    def pi_W(self, g) -> np.ndarray:
        return self.project(g)[0]

    def pi_L(self, g) -> np.ndarray:
        return self.project(g)[1]


def make_splitting(group, W_basis, L_basis, require_normal: bool = True) -> Splitting:
    """Validate a candidate pair and precompute the per-layer projections.

    ``group`` may be a :class:`CarnotGroup` or a bare algebra (default norm).
    Raises :class:`SplittingError` whose ``reason`` names the failed check.
    """
    if isinstance(group, StratifiedAlgebra):
        group = CarnotGroup(group)
    A = group.algebra
    n = A.n
    W = W_basis if isinstance(W_basis, Subspace) else (Subspace.span(W_basis, n) if len(W_basis) else Subspace.zero(n))
    L = L_basis if isinstance(L_basis, Subspace) else (Subspace.span(L_basis, n) if len(L_basis) else Subspace.zero(n))
    for label, S in (("W", W), ("L", L)):
        if not is_graded_subalgebra(A, S):
            raise SplittingError("not-graded", f"{label} is not a graded (homogeneous) subalgebra")
    if not complementary(A, W, L):
        raise SplittingError(
            "not-complementary",
            f"W (dim {W.dim}) and L (dim {L.dim}) are not complementary in dimension {n}",
        )
    wit = ideal_witness(A, L)
    normal = wit is None
    if require_normal and not normal:
        i, r = wit
        raise SplittingError("not-ideal", f"L is not an ideal: [X{i + 1}, L basis row {r + 1}] leaves L")
    carnot = check_carnot_subgroup(A, W)
    if normal and not carnot:
        raise SplittingError("not-carnot", "W is not a Carnot subgroup although L is normal")

    w_parts, l_parts = W.layer_parts(A), L.layer_parts(A)
    layers = []
    for sl, wa, lb in zip(A.layer_slices, w_parts, l_parts):
        rows = [r[sl] for r in wa] + [r[sl] for r in lb]
        inv = la.inverse(rows)
        dW = len(wa)
        d = sl.stop - sl.start
        # P = inv[:, :dW] @ Wa  (d x d)
        P = [
            [sum((inv[i][m] * wa[m][sl][j] for m in range(dW)), Fraction(0)) for j in range(d)]
            for i in range(d)
        ]
        P_exact = np.array(P, dtype=object).reshape(d, d)
        layers.append(_Layer(sl, P_exact, P_exact.astype(float)))
    return Splitting(group, W, L, normal, carnot, tuple(layers))


@dataclass
class ProjectionIdentityReport:
    w_discrepancy: float
    l_discrepancy: float

    @property
    def max_discrepancy(self) -> float:
        return max(self.w_discrepancy, self.l_discrepancy)


def verify_normal_projection_identities(S: Splitting, q, a) -> ProjectionIdentityReport:
    """Compare ``π_W(q⁻¹a)`` with ``q_W⁻¹ a`` and ``π_L(q⁻¹a)`` with
    ``a⁻¹ q_W q_L⁻¹ q_W⁻¹ a``, both sides computed independently."""
    G = S.group
    if not np.all(S.in_W(a)):
        raise DomainError("a must lie in W")
    qW, qL = S.project(q)
    lhs_w, lhs_l = S.project(G.mul(G.inv(q), a))
    rhs_w = G.mul(G.inv(qW), a)
    rhs_l = G.mul(G.mul(G.mul(G.inv(a), qW), G.mul(G.inv(qL), G.inv(qW))), a)
    dw = np.max(np.abs(to_float(lhs_w - rhs_w))) if np.size(lhs_w) else 0.0
    dl = np.max(np.abs(to_float(lhs_l - rhs_l))) if np.size(lhs_l) else 0.0
    return ProjectionIdentityReport(float(dw), float(dl))


def splitting_from_definition(definition, group: CarnotGroup | None = None, require_normal: bool = True) -> Splitting:
    if "W" not in definition.subgroups or "L" not in definition.subgroups:
        raise SplittingError("not-complementary", "group file defines no 'subgroup W' / 'subgroup L'")
    group = group or CarnotGroup.from_definition(definition)
    return make_splitting(group, definition.subgroups["W"], definition.subgroups["L"], require_normal)

