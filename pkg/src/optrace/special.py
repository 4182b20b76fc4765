"""Special functions needed by the exponential-functional densities.

K0 and U(a, 1, z) are evaluated from their integral representations with
adaptive Gauss-Kronrod quadrature; only real arguments are supported.
"""

import math

import numpy as np
from scipy import integrate, special

from ._validation import check_positive
from .errors import ContractError, DomainError, NumericalError

EULER_GAMMA = 0.57721566490153286061


def gamma(x):
    """Real Gamma function (thin alias kept so callers import one module)."""
    return special.gamma(x)


def lgamma(x):
    return special.gammaln(x)


def laguerre_generalized(n, gamma, x):
    """Generalized Laguerre polynomial ``L_n^gamma(x)`` by forward recurrence.

    Uses ``(k+1) L_{k+1} = (2k + 1 + gamma - x) L_k - (k + gamma) L_{k-1}``.
    ``x`` may be an array.
    """
    if int(n) != n or n < 0:
        raise DomainError(f"order must be a non-negative integer, got {n!r}")
    n = int(n)
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if x.ndim else float(prev)
    cur = 1.0 + gamma - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + gamma - x) * cur - (k + gamma) * prev) / (k + 1)
    return cur if x.ndim else float(cur)


def _k0_scaled(x):
    # e^x K0(x) = int_0^inf exp(-x (cosh t - 1)) dt
    tmax = math.acosh(1.0 + 745.0 / x) if x < 1e300 else 1.0
    val, err = integrate.quad(
        lambda t: math.exp(-x * (math.cosh(t) - 1.0)) if t < 700 else 0.0,
        0.0, tmax, epsabs=0.0, epsrel=1e-13, limit=200,
    )
    if err > 1e-11 * abs(val):
        raise NumericalError("K0 quadrature did not converge", x=x, error=err)
    return val


def bessel_k0(x):
    """Modified Bessel function ``K0(x) = int_0^inf exp(-x cosh t) dt``, x > 0."""
    if np.ndim(x):
        return np.array([bessel_k0(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))
    x = check_positive(x, "x")
    return _k0_scaled(x) * math.exp(-x)


def bessel_k0e(x):
    """Exponentially scaled ``exp(x) K0(x)``; stays finite for large x."""
    x = check_positive(x, "x")
    return _k0_scaled(x)


def confluent_u(a, b, z):
    """Tricomi confluent hypergeometric ``U(a, 1, z)`` for a > 0, z > 0.

    Evaluates ``Gamma(a)^-1 int_0^inf e^{-zt} t^{a-1} (1+t)^{-a} dt`` after
    the substitution ``t = e^s``, which removes the endpoint singularity.
    Only ``b == 1`` is supported.
    """
    if np.ndim(z):
        return np.array([confluent_u(a, b, float(v)) for v in np.ravel(z)]).reshape(np.shape(z))
    if b != 1:
        raise ContractError("only b == 1 is implemented")
    if not a > 0:
        raise ContractError(f"U(a, 1, z) is only provided for a > 0, got a={a}")
    z = check_positive(z, "z")
    return math.exp(log_confluent_u(a, z))


def log_confluent_u(a, z):
    """Natural log of ``U(a, 1, z)``; usable where U itself under/overflows."""
    # integrand in s: exp(a s - z e^s - a log1p(e^s)); peak near log(a / z)
    peak = math.log(a / z) if z > a else 0.0
    fpeak = _log_u_integrand(peak, a, z)

    def f(s):
        return math.exp(_log_u_integrand(s, a, z) - fpeak)

    # left tail decays like e^{a s}; right tail double-exponentially
    lo = peak - (60.0 / a + 40.0)
    hi = math.log(max(z, 1e-300) ** -1 * 40.0 + 1.0) + 5.0
    hi = max(hi, peak + 5.0)
    pts = [p for p in (peak, math.log(1.0 / z) if z < 1 else None) if p is not None and lo < p < hi]
    val, err = integrate.quad(f, lo, hi, points=sorted(set(pts)) or None,
                              epsabs=0.0, epsrel=1e-12, limit=500)
    if not val > 0 or err > 1e-9 * val:
        raise NumericalError("U(a,1,z) quadrature did not converge", a=a, z=z, error=err)
    return math.log(val) + fpeak - special.gammaln(a)


def _log_u_integrand(s, a, z):
    es = math.exp(s) if s < 700 else math.inf
    return a * s - z * es - a * (s + math.log1p(math.exp(-s)) if s > 0 else math.log1p(es))
