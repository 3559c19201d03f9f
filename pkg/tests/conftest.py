from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from carnotgraph import _linalg as la
from carnotgraph.algebra import Subspace, is_graded_subalgebra, is_ideal, complementary
from carnotgraph.group import CarnotGroup
from carnotgraph.groupfile import catalog_names, load_group
from carnotgraph.splitting import splitting_from_definition

CATALOG = catalog_names()

# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def group(name: str) -> CarnotGroup:
    return CarnotGroup.from_definition(load_group(name))


def splitting(name: str):
    return splitting_from_definition(load_group(name))


def rand_float(G: CarnotGroup, m: int, rng, scale: float = 1.0) -> np.ndarray:
    return rng.uniform(-scale, scale, (m, G.n))


def rand_exact(G: CarnotGroup, m: int, rng, den: int = 7) -> np.ndarray:
    nums = rng.integers(-2 * den, 2 * den + 1, (m, G.n))
    dens = rng.integers(1, den + 1, (m, G.n))
    out = np.empty((m, G.n), dtype=object)
    for i in range(m):
        for j in range(G.n):
            out[i, j] = Fraction(int(nums[i, j]), int(dens[i, j]))
    return out


def _ideal_closure(A, rows):
    rows = [list(r) for r in rows]
    e = [np.array(A.basis_vector(i), dtype=object) for i in range(A.n)]
    while True:
        red, _ = la.rref(rows) if rows else ([], [])
        new = [list(A.bracket(x, np.array(v, dtype=object))) for x in e for v in red]
        if la.rank(list(red) + new) == len(red):
            return [list(r) for r in red]
        rows = list(red) + new


def random_normal_splitting(A, rng, tries: int = 200):
    """A random graded pair (W, L) with L an ideal, by rejection; None if none found."""
    small = np.array([-1, 0, 0, 1, 2])
    for _ in range(tries):
        seeds = []
        for sl in A.layer_slices:
            d = sl.stop - sl.start
            for _ in range(rng.integers(0, d + 1)):
                v = [0] * A.n
                for j in range(sl.start, sl.stop):
                    v[j] = int(rng.choice(small))
                seeds.append(v)
        L = Subspace.span(_ideal_closure(A, seeds), A.n) if seeds else Subspace.zero(A.n)
        if not is_graded_subalgebra(A, L) or not is_ideal(A, L):
            continue
        w_rows = []
        for part, sl in zip(L.layer_parts(A), A.layer_slices):
            need = (sl.stop - sl.start) - len(part)
            chosen: list[list] = []
            for _ in range(50):
                if len(chosen) == need:
                    break
                v = [0] * A.n
                for j in range(sl.start, sl.stop):
                    v[j] = int(rng.choice(small))
                if la.rank(part + chosen + [v]) == len(part) + len(chosen) + 1:
                    chosen.append(v)
            w_rows += chosen
        W = Subspace.span(w_rows, A.n) if w_rows else Subspace.zero(A.n)
        if complementary(A, W, L) and is_graded_subalgebra(A, W):
            return W, L
    return None


@pytest.fixture(params=CATALOG)
def catalog_name(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
