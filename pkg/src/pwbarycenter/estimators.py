"""Estimator-style wrappers with the usual ``fit`` / ``get_params`` surface."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ValidationError
from .measures import DiscreteMeasure
from .mmot import BarycenterProblem, pushforward_barycenter, solve_mmot
from .onedim import OneDimProblem, barycenter_quantile
from .pbarycenter import (DEFAULT_TOL, PointConfiguration, objective,
                          solve_point_barycenter)


def _as_measure_list(marginals) -> list[DiscreteMeasure]:
    out = []
    for item in marginals:
        if isinstance(item, DiscreteMeasure):
            out.append(item)
        elif isinstance(item, tuple) and len(item) == 2:
            out.append(DiscreteMeasure(*item))
        else:
            out.append(DiscreteMeasure(np.asarray(item, dtype=float),
                                       np.full(len(item), 1.0 / len(item))))
    if not out:
        raise ValidationError("no marginals given")
    return out


class PBarycenter(BaseEstimator):
    """p-barycenter of the rows of ``X`` weighted by ``sample_weight``.

    Parameters
    ----------
    p : float, default=2.0
        Exponent, 1 < p < inf.
    tol : float, default=1e-10
        Target Euler-Lagrange residual of the iterative solver.

    Attributes
    ----------
    location_ : ndarray of shape (n_features,)
    eta_ : ndarray of shape (n_samples,)
        Convex weights with ``location_ = eta_ @ X``.
    residual_ : float
    singular_set_ : frozenset
    """

    def __init__(self, p: float = 2.0, tol: float = DEFAULT_TOL):
        self.p = p
        self.tol = tol

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X, dtype=float)
        if sample_weight is None:
            sample_weight = np.full(X.shape[0], 1.0 / X.shape[0])
        w = np.asarray(sample_weight, dtype=float)
        if w.shape != (X.shape[0],) or np.any(w <= 0):
            raise ValidationError("sample_weight must be positive, one per row")
        res = solve_point_barycenter(PointConfiguration(X, w / w.sum(), self.p), self.tol)
        self._X, self._w = X, w / w.sum()
        self.location_ = res.z
        self.eta_ = res.eta
        self.residual_ = res.residual
        self.singular_set_ = res.singular_set
        self.n_features_in_ = X.shape[1]
        return self

    def score(self, X=None, y=None) -> float:
        """Negative weighted cost sum_i w_i |x_i - location_|^p on the fitted data."""
        check_is_fitted(self, "location_")
        return -float(objective(self._X[None], self._w, float(self.p),
                                self.location_[None])[0])


class MultiMarginalBarycenter(BaseEstimator):
    """Exact barycenter of discrete measures through the multi-marginal LP.

    ``fit`` takes a list of marginals, each a :class:`DiscreteMeasure`, a
    ``(points, weights)`` tuple or a bare point array (uniform weights).

    Attributes
    ----------
    plan_ : TransportPlan
    cost_ : float
    barycenter_ : DiscreteMeasure
    """

    def __init__(self, p: float = 2.0, lam=None):
        self.p = p
        self.lam = lam

    def fit(self, marginals, y=None):
        prob = BarycenterProblem(_as_measure_list(marginals), self.lam, self.p)
        self.plan_, self.cost_ = solve_mmot(prob)
        self.barycenter_ = pushforward_barycenter(self.plan_)
        return self


class QuantileBarycenter(TransformerMixin, BaseEstimator):
    """One-dimensional barycenter through pointwise barycenters of quantiles.

    ``transform`` maps levels in (0, 1] to barycenter quantiles, reading the
    fitted grid as the quantile function of ``m`` equal-mass atoms.
    """

    def __init__(self, p=2.0, lam=None, m: int = 1000):
        self.p = p
        self.lam = lam
        self.m = m

    def fit(self, marginals, y=None):
        prob = OneDimProblem(_as_measure_list(marginals), self.lam, self.p, self.m)
        self.quantiles_ = barycenter_quantile(prob)
        return self

    def transform(self, y):
        check_is_fitted(self, "quantiles_")
        y = np.asarray(y, dtype=float)
        if np.any((y <= 0) | (y > 1)):
            raise ValidationError("levels must lie in (0, 1]")
        m = self.quantiles_.m
        k = np.clip(np.ceil(y * m).astype(int) - 1, 0, m - 1)
        return self.quantiles_.values[k]
