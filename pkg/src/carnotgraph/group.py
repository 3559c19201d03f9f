"""Carnot groups in exponential coordinates of the first kind.

Points are plain numpy arrays of shape ``(n,)`` or ``(m, n)``.  Float arrays
give floating results; object arrays of :class:`~fractions.Fraction` (see
:func:`exact`) run the same formulas exactly.
"""
from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _linalg as la
from .algebra import MAX_STEP, StratifiedAlgebra
from .exceptions import DimensionError, EstimationError, PreconditionError

HALF = Fraction(1, 2)
TWELFTH = Fraction(1, 12)
TWENTYFOURTH = Fraction(1, 24)

MIN_ACCEPTANCE = 1e-3


def exact(x) -> np.ndarray:
    """Convert coordinates to an object array of Fractions (floats converted exactly)."""
    a = np.asarray(x, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = la.as_fraction(v)
    return out


def is_exact(x) -> bool:
    return isinstance(x, np.ndarray) and x.dtype == object


def to_float(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class CarnotGroup:
    """Group law, dilations and a homogeneous norm for a stratified algebra.

    Parameters
    ----------
    algebra : StratifiedAlgebra
    norm_weights : sequence of float, optional
        Positive weight per layer in ``max_a w_a |g_a|^(1/a)``; default all 1.
    """

    def __init__(self, algebra: StratifiedAlgebra, norm_weights: Sequence[float] | None = None):
        if algebra.step > MAX_STEP:
            raise DimensionError(f"step {algebra.step} > {MAX_STEP} is not supported")
        self.algebra = algebra
        if norm_weights is None:
            norm_weights = (1.0,) * algebra.step
        if len(norm_weights) != algebra.step or any(w <= 0 for w in norm_weights):
            raise ValueError("norm_weights must be positive, one per layer")
        self.norm_weights = tuple(float(w) for w in norm_weights)

    @classmethod
    def from_definition(cls, definition) -> "CarnotGroup":
        return cls(definition.algebra, definition.norm_weights)

    def __repr__(self):
        return f"CarnotGroup({self.algebra.name or 'unnamed'}, layers={self.algebra.layer_dims})"

    @property
    def n(self) -> int:
        return self.algebra.n

    @property
    def step(self) -> int:
        return self.algebra.step

    @property
    def homogeneous_dimension(self) -> int:
        return self.algebra.homogeneous_dimension

    @property
    def weights(self) -> np.ndarray:
        return self.algebra.weights

    def identity(self, exact_mode: bool = False) -> np.ndarray:
        return exact(np.zeros(self.n, dtype=int)) if exact_mode else np.zeros(self.n)

    def _check(self, *points):
        out = []
        for p in points:
            p = p if isinstance(p, np.ndarray) else np.asarray(p)
            if p.shape[-1] != self.n:
                raise DimensionError(f"point of length {p.shape[-1]} does not belong to a group of dimension {self.n}")
            out.append(p)
        if any(is_exact(p) for p in out):
            out = [p if is_exact(p) else exact(p) for p in out]
        return out

    def mul(self, g, h) -> np.ndarray:
        """Product via the BCH series, truncated at the step."""
        x, y = self._check(g, h)
        br = self.algebra.bracket
        ex = is_exact(x)
        half, c12, c24 = (HALF, TWELFTH, TWENTYFOURTH) if ex else (0.5, 1.0 / 12.0, 1.0 / 24.0)
        z = x + y
        s = self.step
        if s >= 2:
            xy = br(x, y)
            z = z + half * xy
            if s >= 3:
                x_xy = br(x, xy)
                z = z + c12 * (x_xy - br(y, xy))
                if s >= 4:
                    z = z - c24 * br(y, x_xy)
        return z

    def inv(self, g) -> np.ndarray:
        (g,) = self._check(g)
        return -g

    def conjugate(self, g, h) -> np.ndarray:
        """``g · h · g⁻¹``."""
        return self.mul(self.mul(g, h), self.inv(g))

    def dilate(self, lam, g) -> np.ndarray:
        (g,) = self._check(g)
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        if is_exact(g):
            lam = la.as_fraction(lam)
            factors = np.array([lam ** int(w) for w in self.weights], dtype=object)
        else:
            factors = float(lam) ** self.weights.astype(float)
        return g * factors

    def hnorm(self, g) -> np.ndarray | float:
        """``max_a w_a |g_a|_2^(1/a)`` over the layers."""
        (g,) = self._check(g)
        if is_exact(g):
            g = to_float(g)
        parts = []
        for a, sl in enumerate(self.algebra.layer_slices, start=1):
            r = np.sqrt(np.sum(g[..., sl] ** 2, axis=-1))
            parts.append(self.norm_weights[a - 1] * r ** (1.0 / a))
        out = np.max(np.stack(parts, axis=-1), axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def hdist(self, g, h):
        return self.hnorm(self.mul(self.inv(g), h))

    def _ball_box(self, r: float) -> np.ndarray:
        half_widths = np.empty(self.n)
        for a, sl in enumerate(self.algebra.layer_slices, start=1):
            half_widths[sl] = (r / self.norm_weights[a - 1]) ** a
        return half_widths

    def sample_ball(self, center, r: float, count: int, rng_seed=None, batch: int | None = None) -> np.ndarray:
        """Haar-uniform sample of the closed ball ``{g : hdist(center, g) <= r}``.

        Rejection sampling from the coordinate box around the identity, then
        left translation by ``center`` (Lebesgue measure is bi-invariant in
        these coordinates).
        """
        if r <= 0 or count <= 0:
            raise ValueError("need r > 0 and count > 0")
        rng = np.random.default_rng(rng_seed)
        hw = self._ball_box(r)
        accepted: list[np.ndarray] = []
        total = drawn = 0
        batch = batch or max(256, 4 * count)
        while total < count:
            cand = rng.uniform(-hw, hw, size=(batch, self.n))
            keep = cand[np.asarray(self.hnorm(cand)) <= r]
            drawn += batch
            accepted.append(keep)
            total += len(keep)
            if drawn >= 10_000 and total / drawn < MIN_ACCEPTANCE:
                raise EstimationError(f"rejection acceptance rate {total / drawn:.2e} below {MIN_ACCEPTANCE}")
        pts = np.concatenate(accepted)[:count]
        center = to_float(self._check(center)[0])
        return self.mul(center, pts)

    @cached_property
    def ball_box_volume(self) -> float:
        return float(np.prod(2 * self._ball_box(1.0)))


def quasi_triangle_constant(group: CarnotGroup, count: int = 1000, rng_seed=0, scale: float = 1.0) -> float:
    """Empirical sup of hdist(g,k) / (hdist(g,h) + hdist(h,k)) over random triples."""
    rng = np.random.default_rng(rng_seed)
    g, h, k = (rng.uniform(-scale, scale, size=(count, group.n)) for _ in range(3))
    num = group.hdist(g, k)
    den = group.hdist(g, h) + group.hdist(h, k)
    mask = den > 0
    return float(np.max(num[mask] / den[mask])) if mask.any() else 1.0


def check_points(X, group: CarnotGroup, allow_exact: bool = True) -> np.ndarray:
    """Validate a batch of group points, sklearn ``check_array`` style.

    Returns a 2-D array of shape (m, n).  Rejects non-finite values and wrong
    widths.
    """
    if isinstance(X, np.ndarray) and X.dtype == object and allow_exact:
        arr = X
    else:
        arr = np.asarray(X, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("points contain NaN or infinity")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != group.n:
        raise DimensionError(f"expected points of shape (m, {group.n}), got {arr.shape}")
    return arr


def require_positive(name: str, value) -> None:
    if not value > 0:
        raise PreconditionError(f"{name} must be positive, got {value}")
