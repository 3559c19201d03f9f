from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from carnotgraph.exceptions import DimensionError
from carnotgraph.estimators import HausdorffContent, SplittingProjector

from conftest import CATALOG, group, rand_float


@pytest.mark.parametrize("name", CATALOG)
def test_projector_round_trip(name, rng):
    G = group(name)
    X = rand_float(G, 50, rng)
    proj = SplittingProjector(group=name).fit()
    Z = proj.transform(X)
    assert Z.shape == (50, G.n)
    assert np.max(np.abs(proj.inverse_transform(Z) - X)) <= 1e-12


def test_projector_params_and_validation():
    proj = SplittingProjector(group="H1", W=[[1, 0, 0]], L=[[0, 1, 0], [0, 0, 1]])
    assert clone(proj).get_params() == proj.get_params()
    with pytest.raises(NotFittedError):
        proj.transform(np.zeros((1, 3)))
    proj.fit()
    assert proj.transform(np.zeros(3)).shape == (1, 3)
    with pytest.raises(DimensionError):
        proj.transform(np.zeros((2, 4)))
    with pytest.raises(ValueError):
        proj.transform(np.array([[np.nan, 0, 0]]))


def test_hausdorff_content_estimator():
    X = np.zeros((2001, 3))
    X[:, 0] = np.linspace(0, 1, 2001)
    est = HausdorffContent(group="H1", k=1, extrapolate=True).fit(X)
    assert abs(est.content_ - 1.0) <= 0.05
    assert est.error_ > 0 and est.n_features_in_ == 3
    assert HausdorffContent(group="H1").fit(np.zeros((0, 3))).content_ == 0.0
