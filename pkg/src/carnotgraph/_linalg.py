"""Exact linear algebra over the rationals.

Matrices are lists of rows, entries are :class:`fractions.Fraction`.  Only the
handful of routines the algebra layer needs: reduced row-echelon form, rank,
null space, span membership and solving for coordinates in a basis.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Row = list[Fraction]
Matrix = list[Row]


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # exact binary value, never a decimal guess
        return Fraction(x)
    return Fraction(x)


def to_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[as_fraction(v) for v in row] for row in rows]


def rref(rows: Sequence[Sequence]) -> tuple[Matrix, list[int]]:
    """Reduced row-echelon form; returns (nonzero rows, pivot columns)."""
    m = to_matrix(rows)
    if not m:
        return [], []
    ncols = len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        m[r] = [v / p for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[0])


def nullspace(rows: Sequence[Sequence], ncols: int | None = None) -> Matrix:
    """Basis of {x : M x = 0} as a list of vectors."""
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    red, pivots = rref(rows) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(red, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def in_span(v: Sequence, rows: Sequence[Sequence]) -> bool:
    if not any(as_fraction(x) != 0 for x in v):
        return True
    return rank(list(rows) + [list(v)]) == rank(rows)


def coordinates(v: Sequence, basis: Sequence[Sequence]) -> Row | None:
    """Coefficients c with sum c_i basis_i = v, or None if v is not in the span.

    ``basis`` must be linearly independent.
    """
    d = len(basis)
    n = len(v)
    # columns are basis vectors; augment with v
    aug = [[as_fraction(basis[j][i]) for j in range(d)] + [as_fraction(v[i])] for i in range(n)]
    red, pivots = rref(aug)
    if d in pivots:
        return None
    c = [Fraction(0)] * d
    for row, p in zip(red, pivots):
        c[p] = row[d]
    return c


def inverse(rows: Sequence[Sequence]) -> Matrix:
    n = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(to_matrix(rows))]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)) or len(red) < n:
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red]
