"""scikit-learn style wrapper around the effective-maturity fit."""

import math

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .analytic import european_weight_density
from .errors import ContractError


class EffectiveMaturityFit(RegressorMixin, BaseEstimator):
    """Fit the logit-normal weight density with a free maturity.

    ``X`` holds weights in (0, 1) (shape ``(n,)`` or ``(n, 1)``) and ``y``
    the observed density there.  The fit minimizes the weighted squared
    misfit over ``log(alpha)`` in ``[log(alpha_min), log(alpha_max)]``.

    Attributes
    ----------
    alpha_ : float
        Fitted effective maturity.
    residual_ : float
        ``||y - fit|| / ||y||`` (weighted L2) on the training points.

    Examples
    --------
    >>> import numpy as np
    >>> from optrace.analytic import european_weight_density
    >>> w = np.linspace(0.05, 0.95, 19)
    >>> est = EffectiveMaturityFit().fit(w, european_weight_density(w, 0.7))
    >>> round(est.alpha_, 6)
    0.7
    """

    def __init__(self, alpha_min=1e-3, alpha_max=1e3):
        self.alpha_min = alpha_min
        self.alpha_max = alpha_max

    @staticmethod
    def _as_w(X):
        w = np.asarray(X, dtype=float)
        if w.ndim == 2:
            if w.shape[1] != 1:
                raise ContractError("X must have a single feature (the weight)")
            w = w[:, 0]
        return w

    def fit(self, X, y, sample_weight=None):
        w = self._as_w(X)
        y = np.asarray(y, dtype=float)
        if w.shape != y.shape or w.size < 3:
            raise ContractError("need at least 3 (w, density) pairs of equal length")
        sw = np.ones_like(y) if sample_weight is None else np.asarray(sample_weight, float)

        def loss(la):
            return float(np.sum(sw * (y - european_weight_density(w, math.exp(la))) ** 2))

        res = optimize.minimize_scalar(
            loss, bounds=(math.log(self.alpha_min), math.log(self.alpha_max)),
            method="bounded", options={"xatol": 1e-10})
        self.alpha_ = math.exp(res.x)
        self.residual_ = math.sqrt(res.fun / float(np.sum(sw * y * y)))
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "alpha_")
        return european_weight_density(self._as_w(X), self.alpha_)
