"""Stratified Lie algebras given by structure constants on a graded basis.

All yes/no questions (ideal, subalgebra, Carnot subgroup) are answered with
exact rational arithmetic, so they never depend on a tolerance.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _linalg as la
from .exceptions import DimensionError, PreconditionError

MAX_STEP = 4


@dataclass(frozen=True)
class StratifiedAlgebra:
    """Structure constants ``c[i][j][k]`` with ``[X_i, X_j] = sum_k c[i][j][k] X_k``.

    Indices are 0-based here; files and the CLI use the 1-based numbering
    ``X_1 .. X_n``.  The basis is ordered by layer.
    """

    layer_dims: tuple[int, ...]
    structure_constants: tuple  # n x n x n nested tuples of Fraction
    name: str = ""

    def __post_init__(self):
        c = self.structure_constants
        n = len(c)
        if any(len(row) != n or any(len(col) != n for col in row) for row in c):
            raise DimensionError("structure constants must form an n x n x n array")

    @classmethod
    def from_brackets(
        cls,
        layer_dims: Sequence[int],
        brackets: Mapping[tuple[int, int], Mapping[int, object]] | Iterable[tuple[int, int, int, object]],
        name: str = "",
        n: int | None = None,
        antisymmetrize: bool = True,
    ) -> "StratifiedAlgebra":
        """Build from 0-based entries ``(i, j, k, value)`` meaning ``c[i][j][k] = value``.

        With ``antisymmetrize`` the entry ``c[j][i][k] = -value`` is filled in.
        """
        if n is None:
            n = sum(layer_dims)
        c = [[[Fraction(0)] * n for _ in range(n)] for _ in range(n)]
        if isinstance(brackets, Mapping):
            entries = [(i, j, k, v) for (i, j), ks in brackets.items() for k, v in ks.items()]
        else:
            entries = list(brackets)
        for i, j, k, v in entries:
            v = la.as_fraction(v)
            c[i][j][k] = v
            if antisymmetrize and i != j:
                c[j][i][k] = -v
        frozen = tuple(tuple(tuple(col) for col in row) for row in c)
        return cls(tuple(int(d) for d in layer_dims), frozen, name)

    @property
    def n(self) -> int:
        return len(self.structure_constants)

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    s = step

    @cached_property
    def weights(self) -> np.ndarray:
        """Dilation degree of each coordinate (1 for the first layer, ...)."""
        return np.repeat(np.arange(1, self.step + 1), self.layer_dims)

    @cached_property
    def layer_slices(self) -> tuple[slice, ...]:
        out, start = [], 0
        for d in self.layer_dims:
            out.append(slice(start, start + d))
            start += d
        return tuple(out)

    def layer_of(self, i: int) -> int:
        """1-based layer of the 0-based basis index ``i``."""
        return int(self.weights[i])

    @property
    def homogeneous_dimension(self) -> int:
        return sum((a + 1) * d for a, d in enumerate(self.layer_dims))

    @cached_property
    def nonzero_terms(self) -> tuple[tuple[int, int, int, Fraction], ...]:
        c = self.structure_constants
        n = self.n
        return tuple(
            (i, j, k, c[i][j][k])
            for i in range(n) for j in range(n) for k in range(n)
            if c[i][j][k] != 0
        )

    @cached_property
    def _float_terms(self):
        return tuple((i, j, k, float(v)) for i, j, k, v in self.nonzero_terms)

    @cached_property
    def is_abelian(self) -> bool:
        return not self.nonzero_terms

    def bracket(self, x, y):
        """Lie bracket of coordinate vectors; works on batches (..., n).

        Object arrays (or sequences) of Fractions give exact results.
        """
        x = np.asarray(x)
        y = np.asarray(y)
        if x.shape[-1] != self.n or y.shape[-1] != self.n:
            raise DimensionError(f"vectors must have length {self.n}")
        exact = x.dtype == object or y.dtype == object
        shape = np.broadcast_shapes(x.shape, y.shape)
        if exact:
            out = np.empty(shape, dtype=object)
            out[...] = Fraction(0)
            terms = self.nonzero_terms
        else:
            out = np.zeros(shape, dtype=np.result_type(x, y, float))
            terms = self._float_terms
        for i, j, k, v in terms:
            out[..., k] += v * (x[..., i] * y[..., j])
        return out

    def basis_vector(self, i: int) -> list[Fraction]:
        v = [Fraction(0)] * self.n
        v[i] = Fraction(1)
        return v


@dataclass(frozen=True)
class Subspace:
    """A linear subspace of the algebra, stored by its canonical RREF basis.

    For homogeneous subspaces the RREF rows are automatically layer-pure, so
    two subspaces are equal exactly when their ``basis`` tuples are.
    """

    n: int
    basis: tuple[tuple[Fraction, ...], ...] = field(default=())

    @classmethod
    def span(cls, rows: Sequence[Sequence], n: int | None = None) -> "Subspace":
        rows = [list(r) for r in rows]
        if n is None:
            if not rows:
                raise DimensionError("cannot infer n from an empty basis")
            n = len(rows[0])
        if any(len(r) != n for r in rows):
            raise DimensionError(f"basis vectors must have length {n}")
        red, _ = la.rref(rows)
        return cls(n, tuple(tuple(r) for r in red))

    @classmethod
    def coordinate(cls, n: int, indices: Iterable[int]) -> "Subspace":
        """Span of the 0-based basis vectors ``indices``."""
        rows = []
        for i in indices:
            r = [0] * n
            r[i] = 1
            rows.append(r)
        return cls.span(rows, n)

    @classmethod
    def whole(cls, n: int) -> "Subspace":
        return cls.coordinate(n, range(n))

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(n, ())

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, v: Sequence) -> bool:
        return la.in_span(v, self.basis)

    def coordinates(self, v: Sequence):
        return la.coordinates(v, self.basis)

    def layer_parts(self, algebra: StratifiedAlgebra) -> list[list[list[Fraction]]]:
        """Basis of ``S ∩ V_a`` for every layer ``a`` (list indexed from 0)."""
        parts = []
        for sl in algebra.layer_slices:
            if not self.basis:
                parts.append([])
                continue
            outside = [c for c in range(self.n) if not (sl.start <= c < sl.stop)]
            # coefficients whose combination vanishes outside layer a
            system = [[row[c] for row in self.basis] for c in outside]
            if system:
                coeffs = la.nullspace(system, self.dim)
            else:
                coeffs = [[Fraction(int(i == j)) for j in range(self.dim)] for i in range(self.dim)]
            vecs = [
                [sum((cf * row[c] for cf, row in zip(cvec, self.basis)), Fraction(0)) for c in range(self.n)]
                for cvec in coeffs
            ]
            parts.append(la.rref(vecs)[0] if vecs else [])
        return parts

    def layer_dims(self, algebra: StratifiedAlgebra) -> tuple[int, ...]:
        return tuple(len(p) for p in self.layer_parts(algebra))

    def is_homogeneous(self, algebra: StratifiedAlgebra) -> bool:
        return sum(self.layer_dims(algebra)) == self.dim

    def homogeneous_dimension(self, algebra: StratifiedAlgebra) -> int:
        return sum((a + 1) * d for a, d in enumerate(self.layer_dims(algebra)))

    def float_basis(self) -> np.ndarray:
        """Basis as a (dim, n) float array."""
        return np.array([[float(v) for v in r] for r in self.basis], dtype=float).reshape(self.dim, self.n)


@dataclass
class ValidationReport:
    violations: list[tuple[str, tuple[int, ...]]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def axioms_failed(self) -> set[str]:
        return {axiom for axiom, _ in self.violations}


def validate_algebra(A: StratifiedAlgebra) -> ValidationReport:
    """Check antisymmetry, Jacobi, grading and stratification.

    Witness indices are 1-based, matching the file format.
    """
    n = A.n
    if sum(A.layer_dims) != n or any(d <= 0 for d in A.layer_dims):
        raise DimensionError(f"layer_dims {A.layer_dims} do not partition n={n}")
    if A.step > MAX_STEP:
        raise DimensionError(f"step {A.step} exceeds the supported maximum {MAX_STEP}")
    c = A.structure_constants
    report = ValidationReport()

    for i, j in itertools.combinations_with_replacement(range(n), 2):
        for k in range(n):
            if c[i][j][k] != -c[j][i][k]:
                report.violations.append(("antisymmetry", (i + 1, j + 1, k + 1)))

    # Jacobi: [x,[y,z]] + [y,[z,x]] + [z,[x,y]] = 0 on basis triples
    e = [np.array(A.basis_vector(i), dtype=object) for i in range(n)]
    for i, j, k in itertools.combinations(range(n), 3):
        x, y, z = e[i], e[j], e[k]
        jac = A.bracket(x, A.bracket(y, z)) + A.bracket(y, A.bracket(z, x)) + A.bracket(z, A.bracket(x, y))
        if any(v != 0 for v in jac):
            report.violations.append(("jacobi", (i + 1, j + 1, k + 1)))

    w = A.weights
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if c[i][j][k] != 0 and w[k] != w[i] + w[j]:
                    report.violations.append(("grading", (i + 1, j + 1, k + 1)))

    # V_{a+1} = [V_1, V_a]
    sl = A.layer_slices
    for a in range(1, A.step):
        brackets = [
            list(A.bracket(e[i], e[j])) for i in range(sl[0].start, sl[0].stop) for j in range(sl[a - 1].start, sl[a - 1].stop)
        ]
        target = Subspace.coordinate(n, range(sl[a].start, sl[a].stop))
        generated = la.rank(brackets + [list(r) for r in target.basis]) if brackets else target.dim
        if la.rank(brackets) != target.dim or generated != target.dim:
            report.violations.append(("stratification", (a + 1,)))
    return report


def bracket(A: StratifiedAlgebra, x, y):
    return A.bracket(x, y)


def _exact(v) -> np.ndarray:
    return np.array([la.as_fraction(t) for t in v], dtype=object)


def ideal_witness(A: StratifiedAlgebra, S: Subspace) -> tuple[int, int] | None:
    """First (basis index i, subspace row r) with [X_i, v_r] outside S, 0-based."""
    for i in range(A.n):
        x = _exact(A.basis_vector(i))
        for r, v in enumerate(S.basis):
            if not S.contains(list(A.bracket(x, _exact(v)))):
                return i, r
    return None


def is_ideal(A: StratifiedAlgebra, S: Subspace) -> bool:
    return ideal_witness(A, S) is None


def is_subalgebra(A: StratifiedAlgebra, S: Subspace) -> bool:
    rows = [_exact(v) for v in S.basis]
    for u, v in itertools.combinations(rows, 2):
        if not S.contains(list(A.bracket(u, v))):
            return False
    return True


def is_graded_subalgebra(A: StratifiedAlgebra, S: Subspace) -> bool:
    return S.is_homogeneous(A) and is_subalgebra(A, S)


def check_carnot_subgroup(A: StratifiedAlgebra, W: Subspace) -> bool:
    """True iff the first layer of W generates the rest of Lie(W) by brackets."""
    if not is_graded_subalgebra(A, W):
        raise PreconditionError("W must be a graded subalgebra")
    parts = W.layer_parts(A)
    first = [_exact(v) for v in parts[0]]
    for a in range(1, A.step):
        target = parts[a]
        gens = [list(A.bracket(u, _exact(v))) for u in first for v in parts[a - 1]]
        if la.rank(gens) != len(target):
            return False
        if target and la.rank(gens + target) != len(target):
            return False
    return True


def complementary(A: StratifiedAlgebra, W: Subspace, L: Subspace) -> bool:
    return W.dim + L.dim == A.n and la.rank(list(W.basis) + list(L.basis)) == A.n


def check_normal_complement_is_carnot(A: StratifiedAlgebra, W: Subspace, L: Subspace) -> bool:
    """For complementary graded W, L with L an ideal, W must be a Carnot subgroup.

    A False return is an internal inconsistency; a RuntimeWarning is emitted.
    """
    for label, S in (("W", W), ("L", L)):
        if not is_graded_subalgebra(A, S):
            raise PreconditionError(f"{label} is not a graded subalgebra")
    if not complementary(A, W, L):
        raise PreconditionError("W and L are not complementary subspaces")
    if not is_ideal(A, L):
        raise PreconditionError("L is not an ideal")
    ok = check_carnot_subgroup(A, W)
    if not ok:
        warnings.warn(
            "normal complement W failed the Carnot-subgroup check; this contradicts "
            "the bracket-generation argument and indicates an internal inconsistency",
            RuntimeWarning,
            stacklevel=2,
        )
    return ok
