"""Closed-form weight densities and their critical maturities.

All densities take weights ``w`` in the open interval (0, 1), scalar or
array, and return values of the same shape.
"""

import math

import numpy as np
from scipy import integrate, special

from ._validation import check_alpha, check_mu, check_weights, scalar_or_array
from .core import CorrelationScale, DensityCurve, as_correlation, interior_grid
from .errors import DegenerateDistributionError, DomainError, NumericalError


def _logit(w):
    return np.log(w) - np.log1p(-w)


def european_weight_density(w, alpha):
    """Logit-normal density of the terminal weight of two independent GBMs.

    ``ln(w/(1-w))`` is Gaussian with variance ``4 alpha``; the drift index
    cancels between numerator and denominator, so no ``mu`` argument.
    """
    alpha = check_alpha(alpha)
    arr = check_weights(w)
    y = _logit(arr)
    p = np.exp(-y * y / (8.0 * alpha)) / (math.sqrt(8.0 * math.pi * alpha) * arr * (1.0 - arr))
    return scalar_or_array(p, w)


def effective_alpha(alpha, chi):
    """Maturity seen by the weight once the increments are spring coupled."""
    alpha = check_alpha(alpha)
    chi = as_correlation(chi)
    return alpha * chi.g_sq / 2.0


def correlated_european_weight_density(w, alpha, chi):
    """Terminal-weight density for increments coupled at scale ``chi``.

    Same logit-normal law with ``alpha`` replaced by
    ``alpha * chi**2 / (2 + chi**2)``, see :func:`effective_alpha`.
    """
    chi = as_correlation(chi)
    alpha = check_alpha(alpha)
    a_eff = effective_alpha(alpha, chi)
    if a_eff == 0.0:
        raise DegenerateDistributionError("coupling collapsed the weight to a point mass")
    return european_weight_density(w, a_eff)


def european_weight_cdf(w, alpha, chi=None):
    """CDF of the (possibly coupled) terminal weight; accepts the closed [0, 1]."""
    a_eff = effective_alpha(alpha, chi if chi is not None else CorrelationScale())
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore"):
        y = np.log(w) - np.log1p(-w)
    return special.ndtr(y / (2.0 * math.sqrt(a_eff)))


def critical_maturity_european(chi=None):
    """Maturity at which the terminal-weight density turns bimodal.

    ``1/2`` for independent assets and ``(2 + chi^2) / (2 chi^2)`` otherwise;
    ``chi -> 0`` returns ``math.inf``.
    """
    if chi is None:
        return 0.5
    if not isinstance(chi, CorrelationScale):
        if chi == 0:
            return math.inf
        chi = CorrelationScale(chi)
    if chi.independent:
        return 0.5
    return 0.5 + chi.inv_chi**2


# --- Asian weight, mu = 0 -------------------------------------------------

_GAUSS_CUTOFF = -math.log(1e-16)


def _asian_mu0_scalar(w, alpha, epsabs):
    r = math.sqrt(w / (1.0 - w))
    inv4a = 1.0 / (4.0 * alpha)
    c = math.pi**2 * inv4a

    def f(u):
        ch = math.cosh(u)
        eta = math.asinh(r * ch)
        return ch / math.cosh(eta) * math.cos(math.pi * u / alpha) * math.exp(
            c - 4.0 * (u * u + eta * eta) * inv4a
        )

    # exp(-u^2 / alpha) < 1e-16 beyond u_max
    u_max = math.sqrt(_GAUSS_CUTOFF * alpha)
    # the oscillation has period 2 alpha; give quad the zero crossings
    n_half = int(u_max / alpha)
    points = [alpha * (k + 0.5) for k in range(min(n_half, 48))] or None
    pref = 2.0 / (math.pi * alpha * math.sqrt(w * (1.0 - w) ** 3))
    val, err, *_ = integrate.quad(f, 0.0, u_max, points=points, full_output=1,
                                  epsabs=0.1 * epsabs / pref, epsrel=1e-12, limit=400)
    # for small alpha the cosine cancels a factor exp(pi^2 / 4 alpha); the
    # roundoff floor of that cancellation is accepted on top of epsabs
    floor = 1e-12 * pref * math.exp(c) * math.sqrt(math.pi * alpha)
    if not math.isfinite(val) or pref * err > max(epsabs, floor):
        raise NumericalError("mu=0 Asian weight quadrature did not converge",
                             w=w, alpha=alpha, error=pref * err)
    return pref * val


def asian_mu0_weight_density(w, alpha, epsabs=1e-10):
    """Exact density of the Asian weight for zero drift index.

    Evaluates the u-integral representation (even integrand, truncated where
    the Gaussian envelope drops below 1e-16) by adaptive quadrature.  Both
    halves of (0, 1) are computed directly, so ``p(w) == p(1 - w)`` holds
    only to quadrature accuracy and serves as an implementation check.
    """
    alpha = check_alpha(alpha)
    arr = check_weights(w)
    out = np.array([_asian_mu0_scalar(float(v), alpha, epsabs) for v in np.ravel(arr)])
    return scalar_or_array(out.reshape(arr.shape), w)


def asian_weight_asymptotic(w, alpha):
    """Large-weight asymptotic of the mu = 0 Asian weight density.

    Valid for ``w`` in (1/2, 1); reflect with ``1 - w`` for the lower half.
    """
    alpha = check_alpha(alpha)
    arr = check_weights(w)
    if np.any(arr <= 0.5):
        raise DomainError("asymptotic form is for w > 1/2; evaluate at 1 - w instead")
    sw = np.sqrt(arr)
    lz = np.log1p(sw) - 0.5 * np.log1p(-arr)
    s = 1.0 + sw * lz
    expo = -lz * lz / alpha + math.pi**2 * sw * lz / (4.0 * alpha * s)
    p = np.exp(expo) / (np.sqrt(s) * np.sqrt(math.pi * alpha * arr) * (1.0 - arr))
    return scalar_or_array(p, w)


def limiting_beta_density(w, mu):
    """Beta(mu, mu) density, the infinite-maturity weight law for mu > 0."""
    mu = check_mu(mu)
    if mu <= 0:
        raise DomainError("no limiting weight density for mu <= 0")
    arr = check_weights(w)
    logc = special.gammaln(2 * mu) - 2 * special.gammaln(mu)
    p = np.exp(logc + (mu - 1.0) * (np.log(arr) + np.log1p(-arr)))
    return scalar_or_array(p, w)


# --- curves ----------------------------------------------------------------

# closed-form mass is used outside [TAIL_CUT, 1 - TAIL_CUT], where large-alpha
# and small-mu densities pile up faster than a uniform grid resolves
TAIL_CUT = 0.05


def tail_cut_on(grid):
    """The grid point at or just above :data:`TAIL_CUT` (or ``grid[0]``)."""
    i = int(np.searchsorted(grid, TAIL_CUT))
    return float(grid[min(i, grid.size // 2)])


def european_curve(alpha, chi=None, n=None):
    grid = interior_grid() if n is None else interior_grid(n)
    chi = as_correlation(chi)
    vals = correlated_european_weight_density(grid, alpha, chi)
    cut = tail_cut_on(grid)
    tail = 2.0 * float(european_weight_cdf(cut, alpha, chi))
    return DensityCurve(grid, vals, "analytic",
                        {"model": "european", "alpha": float(alpha), "chi": chi.chi},
                        tail_mass=tail, tail_cut=cut)


def beta_curve(mu, n=None):
    grid = interior_grid() if n is None else interior_grid(n)
    vals = limiting_beta_density(grid, mu)
    cut = tail_cut_on(grid)
    tail = 2.0 * float(special.betainc(mu, mu, cut))
    return DensityCurve(grid, vals, "limiting", {"model": "beta-limit", "mu": float(mu)},
                        tail_mass=tail, tail_cut=cut)


def asian_mu0_curve(alpha, n=None):
    grid = interior_grid() if n is None else interior_grid(n)
    vals = asian_mu0_weight_density(grid, alpha)
    return DensityCurve(grid, vals, "quadrature", {"model": "asian-mu0", "alpha": float(alpha)})
