"""Asian weight density as a scale mixture of two independent tau densities.

For independent positive ``tau1, tau2`` with common density ``psi``,

    P(w) = int_0^inf u psi(w u) psi((1 - w) u) du.

With ``u = exp(z) / sqrt(w (1 - w))`` and ``d = logit(w) / 2`` this becomes

    P(w) = 1 / (w (1 - w)) int exp(g(z + d) + g(z - d)) dz,   g(y) = log(e^y psi(e^y)),

so ``w -> 1 - w`` only flips the sign of ``d`` and the integrand is the same
sum with its terms swapped.
"""

import functools
import math
import warnings

import numpy as np
from scipy import integrate

from .analytic import tail_cut_on
from ._validation import check_alpha, check_mu, check_weights, scalar_or_array
from .core import DensityCurve, ModelParams, interior_grid, make_params
from .errors import ContractError, DomainError, NumericalError
from .psi import TabulatedPsi, psi_infinity

DEFAULT_QUAD = {"epsabs": 1e-10, "epsrel": 1e-10, "scan_step": 0.01,
                "scan_range": (-350.0, 350.0), "mass_tol": 1e-6}


def _half_logit(w):
    return 0.5 * (np.log(w) - np.log1p(-w))


class WeightConvolver:
    """Evaluate the weight density generated by one tau density.

    Parameters
    ----------
    psi : TabulatedPsi or callable
        Density of tau.  A callable is probed on a log grid (``scan_range``,
        ``scan_step``) to find its support, so any positive scale works.
        Objects exposing ``log_g(y)`` are used in log form directly.
    quad_config : dict, optional
        Overrides for :data:`DEFAULT_QUAD`.
    """

    def __init__(self, psi, quad_config=None):
        cfg = dict(DEFAULT_QUAD)
        cfg.update(quad_config or {})
        self.config = cfg
        self.psi = psi
        if hasattr(psi, "log_g"):
            self._g = psi.log_g
            self.support = (psi.y_min, psi.y_max)
        else:
            self._g = self._callable_log_g
            self.support = self._scan_support()
        self.mass = self._measure_mass()
        if abs(self.mass - 1.0) > cfg["mass_tol"]:
            warnings.warn(f"tau density integrates to {self.mass:.10g}, not 1",
                          RuntimeWarning, stacklevel=2)

    def _call_psi(self, t):
        try:
            v = np.asarray(self.psi(t), dtype=float)
            if v.shape != t.shape:
                raise ValueError
        except (TypeError, ValueError):
            v = np.array([float(self.psi(float(x))) for x in t])
        return v

    def _callable_log_g(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = getattr(self, "support", (-np.inf, np.inf))
        out = np.full(y.shape, -np.inf)
        inside = (y >= lo) & (y <= hi)
        if inside.any():
            with np.errstate(divide="ignore", over="ignore", under="ignore"):
                out[inside] = y[inside] + np.log(self._call_psi(np.exp(y[inside])))
        return out

    def _scan_support(self):
        lo, hi = self.config["scan_range"]
        y = np.arange(lo, hi + self.config["scan_step"], self.config["scan_step"])
        with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
            g = y + np.log(self._call_psi(np.exp(y)))
        g = np.where(np.isfinite(g), g, -np.inf)
        if not np.isfinite(g.max()):
            raise NumericalError("tau density vanishes on the whole scan range")
        idx = np.flatnonzero(g > g.max() - 45.0)
        pad = 4
        return (float(y[max(idx[0] - pad, 0)]), float(y[min(idx[-1] + pad, y.size - 1)]))

    def _measure_mass(self):
        lo, hi = self.support
        val, _ = integrate.quad_vec(lambda y: np.exp(self._g(np.atleast_1d(y))),
                                    lo, hi, epsabs=1e-13, epsrel=1e-12, limit=2000)
        return float(np.asarray(val).ravel()[0])

    def density(self, w):
        """Weight density at ``w`` (scalar or array in (0, 1))."""
        arr = check_weights(w)
        flat = arr.ravel()
        d = _half_logit(flat)
        lo, hi = self.support
        ad = np.abs(d)
        z_lo, z_hi = lo + ad.min(), hi - ad.min()
        if not z_hi > z_lo:
            return scalar_or_array(np.zeros_like(arr), w)
        g = self._g

        def f(z):
            return np.exp(g(z + d) + g(z - d))

        # the peak of the summand sits near the mode of g for small |d|
        cfg = self.config
        val, err = integrate.quad_vec(f, z_lo, z_hi, epsabs=cfg["epsabs"],
                                      epsrel=cfg["epsrel"], norm="max", limit=4000)
        if not np.all(np.isfinite(val)):
            raise NumericalError("weight convolution produced non-finite values")
        p = val / (flat * (1.0 - flat))
        return scalar_or_array(p.reshape(arr.shape), w)

    def lower_tail(self, w0):
        """``P(W < w0)`` by quadrature of ``p(e^t) e^t`` over ``t < ln w0``."""
        t_hi = math.log(w0)

        def f(t):
            ww = math.exp(t)
            return float(self.density(ww)) * ww

        val, err = integrate.quad(f, t_hi - 120.0, t_hi, epsabs=1e-14, epsrel=1e-9, limit=400)
        return val

    def curve(self, n=None, kind="quadrature", params=None):
        grid = interior_grid() if n is None else interior_grid(n)
        vals = self.density(grid)
        cut = tail_cut_on(grid)
        tail = 2.0 * self.lower_tail(cut)
        meta = dict(params or {})
        meta["tau_mass"] = self.mass
        return DensityCurve(grid, vals, kind, meta, tail_mass=tail, tail_cut=cut)


def weight_density_from_psi(psi, w, quad_config=None):
    """Weight density generated by the tau density ``psi`` at ``w``.

    Warns (RuntimeWarning) when ``psi`` is not normalized to within
    ``mass_tol``; the result is not renormalized.
    """
    return WeightConvolver(psi, quad_config).density(w)


@functools.lru_cache(maxsize=32)
def psi_table(method, mu, alpha):
    """Memoized :class:`TabulatedPsi`, keyed by (method, mu, alpha)."""
    if method == "exact":
        return TabulatedPsi.exact(mu, alpha)
    if method == "approx":
        return TabulatedPsi.approx(mu, alpha)
    if method == "infinity":
        return TabulatedPsi.infinity(mu)
    raise ContractError(f"unknown psi method {method!r}")


@functools.lru_cache(maxsize=32)
def _convolver(method, mu, alpha):
    return WeightConvolver(psi_table(method, mu, alpha))


def asian_weight_density_negative_mu(w, params, alpha, method="exact"):
    """Asian weight density for mu < 0 at finite maturity.

    ``method="exact"`` convolves the tabulated exact tau density;
    ``"approx"`` convolves the large-alpha approximation after rescaling it
    to unit mass.
    """
    if not isinstance(params, ModelParams):
        raise ContractError("params must be a ModelParams instance")
    mu = check_mu(params.mu, negative=True)
    alpha = check_alpha(alpha)
    if method not in ("exact", "approx"):
        raise ContractError(f"method must be 'exact' or 'approx', got {method!r}")
    return _convolver(method, mu, alpha).density(w)


def asian_negative_mu_curve(mu, alpha, method="exact", n=None):
    mu = check_mu(mu, negative=True)
    alpha = check_alpha(alpha)
    conv = _convolver(method, mu, alpha)
    return conv.curve(n, params={"model": "asian-neg-mu", "mu": mu, "alpha": alpha,
                                 "method": method})


def asian_exact_curve(mu, alpha, n=None):
    """Weight density for mu <= 0 from the exact tau density (mu = 0 included)."""
    mu = check_mu(mu, nonpositive=True)
    alpha = check_alpha(alpha)
    conv = _convolver("exact", mu, alpha)
    return conv.curve(n, params={"model": "asian-exact", "mu": mu, "alpha": alpha})


def beta_limit_from_psi(w, mu, quad_config=None):
    """Convolve the closed-form infinite-maturity tau density (mu > 0)."""
    mu = check_mu(mu)
    if mu <= 0:
        raise DomainError("the infinite-maturity tau density needs mu > 0")
    # sigma = sqrt(2) makes tau and tp coincide
    p = make_params(math.sqrt(2.0), mu=mu)
    return WeightConvolver(lambda t: psi_infinity(t, p).value, quad_config).density(w)


def fit_effective_maturity_curve(curve, lo=0.1, hi=0.9):
    """Least-squares European-form fit of a curve's interior.

    Returns ``(alpha_tilde, residual)``, the residual being the L2 norm of
    the misfit relative to the L2 norm of the data on ``[lo, hi]``.
    """
    from .estimators import EffectiveMaturityFit

    mask = (curve.grid >= lo) & (curve.grid <= hi)
    est = EffectiveMaturityFit().fit(curve.grid[mask], curve.values[mask])
    return est.alpha_, est.residual_
