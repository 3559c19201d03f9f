"""scikit-learn style wrappers for the two point-cloud operations.

Only projection onto a splitting and covering content fit the
``fit``/``transform`` shape; differentiation and the area check act on
functions rather than samples and stay plain functions.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .group import CarnotGroup, check_points
from .groupfile import load_group
from .measure import DEFAULT_DELTAS, hausdorff_content
from .splitting import Splitting, make_splitting, splitting_from_definition


def _resolve(group, W, L) -> Splitting:
    if isinstance(group, Splitting):
        return group
    if isinstance(group, str):
        d = load_group(group)
        if W is None and L is None:
            return splitting_from_definition(d)
        group = CarnotGroup.from_definition(d)
    return make_splitting(group, W, L)


class SplittingProjector(TransformerMixin, BaseEstimator):
    """``g ↦ (w params, l params)`` with ``g = g_W · g_L``.

    ``inverse_transform`` multiplies the two factors back together.
    """

    def __init__(self, group="H1", W=None, L=None):
        self.group = group
        self.W = W
        self.L = L

    def fit(self, X=None, y=None):
        self.splitting_ = _resolve(self.group, self.W, self.L)
        self.n_features_in_ = self.splitting_.group.n
        return self

    def transform(self, X):
        check_is_fitted(self, "splitting_")
        S = self.splitting_
        gW, gL = S.project(check_points(X, S.group))
        return np.concatenate([S.w_params(gW), S.l_params(gL)], axis=-1)

    def inverse_transform(self, X):
        check_is_fitted(self, "splitting_")
        S = self.splitting_
        X = np.asarray(X)
        k = S.dim_W
        return S.group.mul(S.w_point(X[..., :k]), S.l_point(X[..., k:]))


class HausdorffContent(BaseEstimator):
    """Covering estimate of ``H^k`` for a sampled set; ``fit`` does the work."""

    def __init__(self, group="H1", k=1.0, deltas=DEFAULT_DELTAS, extrapolate=False):
        self.group = group
        self.k = k
        self.deltas = deltas
        self.extrapolate = extrapolate

    def fit(self, X, y=None):
        G = self.group
        if isinstance(G, str):
            G = CarnotGroup.from_definition(load_group(G))
        X = check_points(X, G, allow_exact=False) if len(X) else np.zeros((0, G.n))
        self.estimate_ = hausdorff_content(G, X, self.k, self.deltas, self.extrapolate)
        self.content_ = self.estimate_.value
        self.error_ = self.estimate_.error
        self.n_features_in_ = G.n
        return self
