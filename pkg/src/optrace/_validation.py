"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import math
import numbers

import numpy as np

from .errors import ContractError, DegenerateDistributionError, DomainError


def check_positive(value, name):
    """Return ``value`` as float, raising DomainError unless finite and > 0."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return value


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise DomainError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or value < 0.0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
    return value


def check_alpha(alpha):
    """Extract a strictly positive effective maturity.

    Accepts a float or anything with an ``alpha`` attribute.  A zero maturity
    gives a point mass at 1/2, which has no density.
    """
    alpha = getattr(alpha, "alpha", alpha)
    alpha = check_nonnegative(alpha, "alpha")
    if alpha == 0.0:
        raise DegenerateDistributionError(
            "alpha == 0: the weight is a point mass at 1/2"
        )
    return alpha


def check_weights(w):
    """Return ``w`` as a float ndarray with every entry in the open (0, 1)."""
    arr = np.asarray(w, dtype=float)
    if arr.size and not np.all((arr > 0.0) & (arr < 1.0)):
        bad = arr[~((arr > 0.0) & (arr < 1.0))].ravel()[0]
        raise DomainError(f"weights must lie in the open interval (0, 1), got {bad!r}")
    return arr


def check_mu(mu, *, negative=False, positive=False, nonpositive=False):
    if not isinstance(mu, numbers.Real) or isinstance(mu, bool) or not math.isfinite(mu):
        raise DomainError(f"mu must be a finite real number, got {mu!r}")
    mu = float(mu)
    if negative and not mu < 0:
        raise ContractError(f"this operation requires mu < 0, got {mu}")
    if positive and not mu > 0:
        raise ContractError(f"this operation requires mu > 0, got {mu}")
    if nonpositive and not mu <= 0:
        raise ContractError(f"this operation requires mu <= 0, got {mu}")
    return mu


def scalar_or_array(result, template):
    """Return a Python float when ``template`` was a scalar, else the array."""
    if np.ndim(template) == 0:
        return float(np.asarray(result).reshape(()))
    return result
