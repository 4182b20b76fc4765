"""Density of the exponential functional tau = int_0^T exp(sigma B_t - mu sigma^2 t / 2) dt.

Every formula here is written in the dimensionless variable
``tp = sigma**2 * tau / 2``.  Public ``psi_*`` functions take ``tau`` in
time units and return a density per unit ``tau``; the Jacobian ``sigma**2/2``
is applied in exactly one place, :func:`_per_tau`.

For mu <= 0 the density factorizes as

    Psi(tau) = (sigma^2/2) 2^mu e^{-alpha mu^2/4} e^{-1/tp} tp^{-1-mu} psi(alpha, tp)

with ``psi`` an x-integral of ``x^{-1-mu} exp(-tp x^2/4) theta(x, alpha)``.
``theta`` is an oscillatory xi-integral that cancels catastrophically for
small x; there it is evaluated from an exact series obtained by moving the
xi contour onto the saddle line (see :func:`theta`).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from ._validation import check_alpha, check_mu, check_positive
from .core import ModelParams
from .errors import ContractError, DomainError, NumericalError
from .special import bessel_k0, confluent_u, laguerre_generalized, log_confluent_u

__all__ = [
    "PsiEvaluation",
    "TabulatedPsi",
    "bessel_k0",
    "confluent_u",
    "laguerre_generalized",
    "psi_approx_negative_mu",
    "psi_discrete_branch",
    "psi_exact_negative_mu",
    "psi_infinity",
    "psi_integral",
    "psi_large_tau_asymptotic",
    "psi_lognormal_tail",
    "psi_small_tau_limit",
    "theta",
    "theta_large_x_asymptotic",
    "theta_small_x_asymptotic",
    "theta_switch_point",
]

METHODS = (
    "discrete_branch",
    "exact_negative_mu",
    "approx_negative_mu",
    "limiting_infinity",
    "large_tau_asymptotic",
    "small_tau_asymptotic",
)


@dataclass(frozen=True)
class PsiEvaluation:
    """Density values of tau together with the method that produced them.

    ``tau`` and ``value`` are floats for scalar input and arrays otherwise.
    """

    tau: object
    value: object
    method: str
    error_estimate: object = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if np.any(np.asarray(self.value) < 0):
            raise NumericalError("negative density value", method=self.method)

    def __float__(self):
        return float(self.value)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.value, dtype=dtype)


def _params(params, mu_check):
    if not isinstance(params, ModelParams):
        raise ContractError("params must be a ModelParams instance")
    mu_check(params.mu)
    return params


def _tau_prime(tau, sigma):
    t = np.asarray(tau, dtype=float)
    if np.any(~(t > 0)) or np.any(~np.isfinite(t)):
        raise DomainError("tau must be finite and > 0")
    return 0.5 * sigma * sigma * t


def _per_tau(per_tp, sigma):
    return 0.5 * sigma * sigma * per_tp


def _wrap(tau, value, method, err=0.0, **meta):
    if np.ndim(tau) == 0:
        value = float(np.asarray(value).reshape(()))
        tau = float(tau)
    return PsiEvaluation(tau, value, method, err, meta)


# --- mu > 0 ----------------------------------------------------------------

def psi_discrete_branch(tau, params, alpha):
    """Discrete-branch part of Psi for mu > 0 (terms 0 <= n < mu/2)."""
    p = _params(params, lambda m: check_mu(m, positive=True))
    alpha = check_alpha(alpha)
    mu = p.mu
    tp = _tau_prime(tau, p.sigma)
    z = 1.0 / tp
    total = np.zeros_like(tp)
    n_terms = math.ceil(mu / 2.0)
    for n in range(n_terms):
        g = mu - 2 * n
        lag = laguerre_generalized(n, g, z)
        logmag = (-z - alpha * n * (mu - n) - special.gammaln(1 + mu - n)
                  + (1 + mu - n) * np.log(z))
        total = total + (-1) ** n * g * lag * np.exp(logmag)
    # the truncated sum can dip below zero only through roundoff
    total = np.maximum(total, 0.0)
    return _wrap(tau, _per_tau(total, p.sigma), "discrete_branch", n_terms=n_terms)


def psi_infinity(tau, params):
    """Infinite-maturity density of tau for mu > 0: an inverse-gamma law."""
    p = _params(params, lambda m: check_mu(m, positive=True))
    mu = p.mu
    tp = _tau_prime(tau, p.sigma)
    logv = -1.0 / tp - (1.0 + mu) * np.log(tp) - special.gammaln(mu)
    return _wrap(tau, _per_tau(np.exp(logv), p.sigma), "limiting_infinity")


# --- theta -----------------------------------------------------------------

# exp(-xi^2 / alpha) < 1e-18 beyond sqrt(_XI_CUT * alpha)
_XI_CUT = 18.0 * math.log(10.0)


def theta_small_x_asymptotic(x, alpha):
    """Leading small-x form ``2 asinh(1/2x) exp(-asinh^2(1/2x)/alpha) / (sqrt(pi) alpha^1.5)``."""
    alpha = check_alpha(alpha)
    ell = np.arcsinh(0.5 / np.asarray(x, dtype=float))
    return 2.0 * ell * np.exp(-ell * ell / alpha) / (math.sqrt(math.pi) * alpha**1.5)


def theta_large_x_asymptotic(x, alpha):
    """Leading large-x form ``2 K0(x) / (sqrt(pi) alpha^1.5)``."""
    alpha = check_alpha(alpha)
    return 2.0 * bessel_k0(x) / (math.sqrt(math.pi) * alpha**1.5)


def _theta_quad(x, alpha):
    a = alpha
    k = 2.0 * math.pi / a

    def f(xi):
        return math.exp(-x * (math.cosh(xi) - 1.0) - xi * xi / a) * (
            math.pi * math.cos(k * xi) - xi * math.sin(k * xi))

    xi_max = min(math.sqrt(_XI_CUT * a), math.acosh(1.0 + 45.0 / x))
    n_per = int(xi_max / (0.5 * a))
    points = [0.5 * a * (j + 0.5) for j in range(min(n_per, 60))] or None
    val, err, _ = integrate.quad(f, 0.0, xi_max, points=points, full_output=1,
                                 epsabs=0.0, epsrel=1e-12, limit=500)
    scale = 2.0 * math.exp(math.pi**2 / a - x) / (math.pi * a) ** 1.5
    # the cosine cancels most of the e^{pi^2/alpha}; its roundoff is accepted
    floor = 1e-13 * scale * math.pi * math.sqrt(a)
    if scale * err > max(1e-12, 1e-8 * abs(scale * val), floor):
        raise NumericalError("theta quadrature did not converge",
                             x=x, alpha=alpha, error=scale * err)
    return scale * val


def _theta_series(x, alpha, tol=1e-17, kmax=80):
    # Deforming xi -> xi + i pi/2 ... onto the saddle line and summing the
    # exponential term by term gives, with L = ln(2/x) and v = 2L/alpha,
    #   theta = pi^-2 e^{-L^2/alpha} sum_k (x^2/4)^k / k!
    #           * 1/2 int e^{-alpha t^2/4} (-i pi)(t + i v) / Gamma(k+1+v-it) dt
    # The t-integrand is entire and Gaussian damped, so the trapezoid rule
    # converges geometrically.
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ell = np.log(2.0 / x)
    v = (2.0 / alpha) * ell
    # 1/Gamma grows like exp(pi |t| / 2); cut where the product is < e^-40
    t_max = (0.5 * math.pi + math.sqrt(0.25 * math.pi**2 + 40.0 * alpha)) / (0.5 * alpha)
    h = min(0.25, 0.5 / math.sqrt(alpha))
    m = int(math.ceil(t_max / h))
    t = h * np.arange(-m, m + 1)
    gauss = np.exp(-0.25 * alpha * t * t)
    lin = (-1j * math.pi) * (t[None, :] + 1j * v[:, None])
    base = -ell * ell / alpha
    log_q = 2.0 * np.log(0.5 * x)
    total = np.zeros_like(x)
    for k in range(kmax):
        lg = special.loggamma(k + 1 + v[:, None] - 1j * t[None, :])
        logw = base[:, None] + k * log_q[:, None] - special.gammaln(k + 1) - lg
        term = 0.5 * h * np.sum((gauss[None, :] * lin * np.exp(logw)).real, axis=1)
        total = total + term
        if k >= 2 and np.all(np.abs(term) <= tol * np.abs(total)):
            break
    else:
        raise NumericalError("theta series did not converge", alpha=alpha, kmax=kmax)
    return total / math.pi**2


def theta_switch_point(alpha):
    """Abscissa where ``theta(method="auto")`` hands over from series to quadrature.

    The quadrature loses about ``exp(pi^2/alpha)`` to cancellation and the
    series about ``exp(x^2/4 + x)``; the switch balances the two, but never
    below x = 1.
    """
    c = math.pi**2 / alpha
    return max(1.0, -2.0 + 2.0 * math.sqrt(1.0 + c))


def theta(x, alpha, method="auto"):
    """Oscillatory kernel of the mu <= 0 factorization.

    ``theta(x, alpha) = 2 e^{pi^2/alpha} (pi alpha)^{-3/2}
    int_0^inf exp(-x cosh xi - xi^2/alpha) (pi cos(2 pi xi/alpha) - xi sin(2 pi xi/alpha)) dxi``

    ``method`` is ``"quadrature"`` (adaptive Gauss-Kronrod, loses all
    accuracy to cancellation once x << 1), ``"series"`` (exact saddle-line
    series, cost grows like x^2) or ``"auto"`` (series below
    :func:`theta_switch_point`).
    """
    alpha = check_alpha(alpha)
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)) or np.any(~np.isfinite(xa)):
        raise DomainError("theta needs finite x > 0")
    flat = xa.ravel()
    out = np.empty_like(flat)
    if method == "auto":
        small = flat <= theta_switch_point(alpha)
    elif method == "series":
        small = np.ones(flat.shape, bool)
    elif method == "quadrature":
        small = np.zeros(flat.shape, bool)
    else:
        raise ValueError(f"unknown theta method {method!r}")
    if small.any():
        out[small] = _theta_series(flat[small], alpha)
    for i in np.flatnonzero(~small):
        out[i] = _theta_quad(float(flat[i]), alpha)
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


# --- psi(alpha, tp) for mu <= 0 --------------------------------------------

def psi_small_tau_limit(mu, alpha):
    """Leading large-alpha value of ``psi(alpha, 0)``."""
    mu = check_mu(mu, negative=True)
    alpha = check_alpha(alpha)
    return special.gamma(-mu / 2) ** 2 / (math.sqrt(math.pi) * 2 ** (1 + mu) * alpha**1.5)


def _s_range(tp, alpha):
    # integrand mass in s = ln x sits below s_c = ln 2 - ln(tp)/2
    s_c = math.log(2.0) - 0.5 * math.log(tp) if tp > 0 else 0.0
    s_c = min(s_c, 0.0)
    lo = -math.sqrt(s_c * s_c + 46.0 * alpha) - 4.0
    hi = math.log(60.0) if tp < 1e-3 else min(math.log(60.0), s_c + 3.5)
    return lo, max(hi, lo + 1.0), s_c


def psi_integral(tp, mu, alpha, epsrel=1e-10):
    """``psi(alpha, tp) = int_0^inf x^{-1-mu} exp(-tp x^2/4) theta(x, alpha) dx``.

    Nested adaptive quadrature for one dimensionless ``tp >= 0``.  Below
    x = 1 the integral runs in s = ln x to resolve the integrable endpoint.
    """
    mu = check_mu(mu, nonpositive=True)
    alpha = check_alpha(alpha)
    if not tp >= 0:
        raise DomainError("tp must be >= 0")
    lo, hi, s_c = _s_range(tp, alpha)

    def f_s(s):
        xx = math.exp(s)
        return math.exp(-mu * s - 0.25 * tp * xx * xx) * theta(xx, alpha)

    split = min(0.0, hi)
    pts = [p for p in (s_c, s_c - math.sqrt(alpha)) if lo < p < split]
    try:
        v1, e1 = integrate.quad(f_s, lo, split, points=sorted(pts) or None,
                                epsabs=0.0, epsrel=epsrel, limit=400)
        v2 = e2 = 0.0
        if hi > 0.0:
            v2, e2 = integrate.quad(lambda xx: xx ** (-1.0 - mu) * math.exp(-0.25 * tp * xx * xx)
                                    * theta(xx, alpha), 1.0, math.exp(hi),
                                    epsabs=0.0, epsrel=epsrel, limit=400)
    except NumericalError as exc:
        raise NumericalError("inner theta evaluation failed", tp=tp, **exc.diagnostics) from exc
    val, err = v1 + v2, e1 + e2
    if not val > 0 or err > 1e-6 * val:
        raise NumericalError("psi x-integral did not converge", tp=tp, mu=mu,
                             alpha=alpha, value=val, error=err)
    return val, err


def _log_prefactor(mu, alpha, tp):
    # per-tp density = 2^mu e^{-alpha mu^2/4} e^{-1/tp} tp^{-1-mu} psi
    return mu * math.log(2.0) - 0.25 * alpha * mu * mu - 1.0 / tp - (1.0 + mu) * np.log(tp)


def psi_exact_negative_mu(tau, params, alpha):
    """Psi(tau) for mu <= 0 from the nested theta/psi quadrature.

    mu = 0 is accepted as well: the x-integral still converges there, which
    gives an independent route to the mu = 0 weight density.
    """
    p = _params(params, lambda m: check_mu(m, nonpositive=True))
    alpha = check_alpha(alpha)
    tp = _tau_prime(tau, p.sigma)
    flat = tp.ravel()
    vals = np.empty_like(flat)
    errs = np.empty_like(flat)
    for i, t in enumerate(flat):
        v, e = psi_integral(float(t), p.mu, alpha)
        scale = math.exp(_log_prefactor(p.mu, alpha, float(t)))
        vals[i], errs[i] = v * scale, e * scale
    vals = _per_tau(vals.reshape(tp.shape), p.sigma)
    errs = _per_tau(errs.reshape(tp.shape), p.sigma)
    if np.ndim(tau) == 0:
        errs = float(errs)
    return _wrap(tau, vals, "exact_negative_mu", errs, validated=alpha >= 5.0)


def _approx_log_per_tp(tp, mu, alpha):
    a = -mu / 2.0
    logc = (2.0 * special.gammaln(a) - 0.5 * math.log(math.pi) - 1.5 * math.log(alpha)
            - 0.25 * alpha * mu * mu - math.log(2.0))
    tp = np.atleast_1d(tp)
    logu = np.array([log_confluent_u(a, 1.0 / t) for t in tp])
    return (logc - 1.0 / tp - (1.0 + mu / 2.0) * np.log(tp) + logu
            - np.arcsinh(np.sqrt(tp)) ** 2 / alpha)


def psi_approx_negative_mu(tau, params, alpha):
    """Large-alpha approximation of Psi(tau) for mu < 0.

    ``C e^{-1/tp} tp^{-1-mu/2} U(-mu/2, 1, 1/tp) exp(-asinh^2(sqrt tp)/alpha)``
    with ``C = sigma^2 Gamma(-mu/2)^2 e^{-alpha mu^2/4} / (4 sqrt(pi) alpha^1.5)``.
    Accurate to O(1/alpha); meant for alpha >= 10.
    """
    p = _params(params, lambda m: check_mu(m, negative=True))
    alpha = check_alpha(alpha)
    tp = _tau_prime(tau, p.sigma)
    logv = _approx_log_per_tp(tp.ravel(), p.mu, alpha).reshape(tp.shape)
    return _wrap(tau, _per_tau(np.exp(logv), p.sigma), "approx_negative_mu")


def psi_large_tau_asymptotic(tau, params, alpha):
    """Large-tau form of Psi for mu < 0, built from the small-x theta limit."""
    p = _params(params, lambda m: check_mu(m, negative=True))
    alpha = check_alpha(alpha)
    tp = _tau_prime(tau, p.sigma)
    if np.any(tp <= 1.0):
        raise DomainError("large-tau asymptotic needs tp > 1")
    mu = p.mu
    lt = np.log(tp)
    psi = (special.gamma(-mu / 2) / (math.sqrt(math.pi) * alpha**1.5 * 2 ** (1 + mu))
           * tp ** (mu / 2) * lt * np.exp(-lt * lt / (4.0 * alpha)))
    per_tp = np.exp(_log_prefactor(mu, alpha, tp)) * psi
    return _wrap(tau, _per_tau(per_tp, p.sigma), "large_tau_asymptotic")


def psi_lognormal_tail(tau, alpha):
    """Log-normal profile ``exp(-ln^2 tau / 4 alpha) / (2 sqrt(pi alpha) tau)``.

    ``tau`` is dimensionless here.  The profile is itself a normalized
    density with ``ln tau ~ N(0, 2 alpha)``, and it carries the large-tau
    decay of the mu = 0 functional up to a slowly varying factor.
    """
    alpha = check_alpha(alpha)
    t = np.asarray(tau, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("tau must be > 0")
    lt = np.log(t)
    v = np.exp(-lt * lt / (4.0 * alpha)) / (2.0 * math.sqrt(math.pi * alpha) * t)
    return float(v) if np.ndim(tau) == 0 else v


# --- tabulation ------------------------------------------------------------

class TabulatedPsi:
    """Spline of ``log(tp * Psi)`` against ``ln tp`` for one (method, mu, alpha).

    Calls take the dimensionless ``tp`` and return a density per unit ``tp``
    normalized to unit mass (the approximate form is not exactly normalized;
    the raw mass is kept in ``raw_mass``).  Outside the tabulated range the
    density is below ``exp(-decades_cut)`` times its peak and reported as 0.

    Build with :meth:`exact`, :meth:`approx` or :meth:`infinity`.
    """

    def __init__(self, log_tp, log_g, method, mu, alpha, raw_mass):
        self.log_tp = np.asarray(log_tp, dtype=float)
        self.log_g_nodes = np.asarray(log_g, dtype=float)
        self.method = method
        self.mu = mu
        self.alpha = alpha
        self.raw_mass = raw_mass
        self._spline = CubicSpline(self.log_tp, self.log_g_nodes - math.log(raw_mass))
        self.y_min = float(self.log_tp[0])
        self.y_max = float(self.log_tp[-1])

    def __repr__(self):
        return (f"TabulatedPsi(method={self.method!r}, mu={self.mu}, alpha={self.alpha}, "
                f"nodes={self.log_tp.size}, raw_mass={self.raw_mass:.9g})")

    def log_g(self, y):
        """``log(tp * density)`` at ``y = ln tp``; ``-inf`` outside the table."""
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, -np.inf)
        inside = (y >= self.y_min) & (y <= self.y_max)
        out[inside] = self._spline(y[inside])
        return out

    def logpdf(self, tp):
        tp = np.asarray(tp, dtype=float)
        return self.log_g(np.log(tp)) - np.log(tp)

    def __call__(self, tp):
        v = np.exp(self.logpdf(tp))
        return float(v) if np.ndim(tp) == 0 else v

    def mass(self):
        y = np.linspace(self.y_min, self.y_max, 20 * self.log_tp.size)
        return float(np.trapezoid(np.exp(self.log_g(y)), y))

    # builders

    @staticmethod
    def _node_grid(y_lo, y_hi, per_decade):
        n = int(math.ceil((y_hi - y_lo) / math.log(10.0) * per_decade)) + 1
        return np.linspace(y_lo, y_hi, n)

    @classmethod
    def _finish(cls, y, log_g, method, mu, alpha, cut):
        idx = np.flatnonzero(log_g > log_g.max() - cut)
        sl = slice(idx[0], idx[-1] + 1)
        y, log_g = y[sl], log_g[sl]
        mass = float(np.trapezoid(np.exp(log_g), y))
        return cls(y, log_g, method, mu, alpha, mass)

    @classmethod
    def exact(cls, mu, alpha, per_decade=40, cut=37.0, s_step=0.02):
        """Tabulate the exact mu <= 0 density.

        theta is computed once on a uniform s = ln x grid and every psi
        node is a trapezoid sum over that grid; the s-integrand is analytic
        and decays at both ends, so the sum converges geometrically in
        ``1/s_step``.
        """
        mu = check_mu(mu, nonpositive=True)
        alpha = check_alpha(alpha)
        y_hi = _tail_extent(mu, alpha, cut)
        y = cls._node_grid(-math.log(cut + 8.0), y_hi, per_decade)
        lo, _, _ = _s_range(math.exp(y_hi), alpha)
        s = np.arange(lo, math.log(60.0) + s_step, s_step)
        th = theta(np.exp(s), alpha)
        log_g = np.empty_like(y)
        ex2 = np.exp(2.0 * s)
        for i, yi in enumerate(y):
            tp = math.exp(yi)
            integrand = np.exp(-mu * s - 0.25 * tp * ex2) * th
            psi = s_step * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
            # far-tail nodes may underflow; _finish trims them
            log_g[i] = (_log_prefactor(mu, alpha, tp) + yi + math.log(psi)) if psi > 0 else -np.inf
        return cls._finish(y, log_g, "exact_negative_mu", mu, alpha, cut)

    @classmethod
    def approx(cls, mu, alpha, per_decade=40, cut=37.0):
        mu = check_mu(mu, negative=True)
        alpha = check_alpha(alpha)
        y_hi = _tail_extent(mu, alpha, cut)
        y = cls._node_grid(-math.log(cut + 8.0), y_hi, per_decade)
        tp = np.exp(y)
        log_g = _approx_log_per_tp(tp, mu, alpha) + y
        return cls._finish(y, log_g, "approx_negative_mu", mu, alpha, cut)

    @classmethod
    def infinity(cls, mu, per_decade=40, cut=37.0):
        mu = check_mu(mu, positive=True)
        y_hi = (cut + 5.0) / mu
        y = cls._node_grid(-math.log(cut + 8.0), y_hi, per_decade)
        log_g = -np.exp(-y) - mu * y - special.gammaln(mu)
        return cls._finish(y, log_g, "limiting_infinity", mu, math.inf, cut)


def _tail_extent(mu, alpha, cut):
    # log(tp Psi) ~ -(mu/2) y - y^2 / (4 alpha) for large y = ln tp, peaked
    # at y = -mu alpha; go cut + 10 below the peak
    return -mu * alpha + math.sqrt(4.0 * alpha * (cut + 10.0)) + 4.0
