import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from optrace import analytic as A
from optrace.core import CorrelationScale, make_params
from optrace.errors import DegenerateDistributionError, DomainError
from optrace.modality import center_curvature, classify


def _mp_logit_normal(w, alpha):
    w = mpmath.mpf(w)
    y = mpmath.log(w / (1 - w))
    return mpmath.exp(-y * y / (8 * alpha)) / (mpmath.sqrt(8 * mpmath.pi * alpha) * w * (1 - w))


class TestEuropean:
    def test_centre_value(self):
        mpmath.mp.dps = 30
        expect = float(_mp_logit_normal(0.5, mpmath.mpf(1) / 4))
        assert A.european_weight_density(0.5, 0.25) == pytest.approx(expect, rel=1e-15)
        assert expect == pytest.approx(1.595769121605731, rel=1e-15)

    def test_brute_force_two_dimensional_oracle(self):
        # W = 1 / (1 + exp(-sqrt(2 alpha) (Z1 - Z2))) for independent Gaussians
        alpha, w = 0.4, 0.3
        y0 = math.log(w / (1 - w))
        s = math.sqrt(2 * alpha)
        # P(W <= w) as a double integral, differentiated numerically
        def cdf(y):
            return integrate.dblquad(
                lambda z2, z1: math.exp(-(z1 * z1 + z2 * z2) / 2) / (2 * math.pi),
                -10, 10, lambda z1: z1 - y / s, lambda z1: 10, epsabs=1e-13)[0]
        h = 1e-3
        dens_y = (cdf(y0 + h) - cdf(y0 - h)) / (2 * h)
        assert dens_y / (w * (1 - w)) == pytest.approx(A.european_weight_density(w, alpha), rel=1e-6)

    @pytest.mark.parametrize("w", [0.1, 0.3, 0.45])
    def test_symmetry(self, w):
        assert A.european_weight_density(w, 0.6) == pytest.approx(
            A.european_weight_density(1 - w, 0.6), rel=1e-14)

    def test_curvature_sign_around_one_half(self):
        assert center_curvature(lambda w: A.european_weight_density(w, 0.25)) < 0
        assert center_curvature(lambda w: A.european_weight_density(w, 0.7)) > 0

    def test_threshold_bracket_with_small_delta(self):
        lo = center_curvature(lambda w: A.european_weight_density(w, 0.499), delta=1e-4,
                              richardson=False)
        hi = center_curvature(lambda w: A.european_weight_density(w, 0.501), delta=1e-4,
                              richardson=False)
        assert lo < 0 < hi

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(DomainError):
                A.european_weight_density(bad, 0.5)
        with pytest.raises(DegenerateDistributionError):
            A.european_weight_density(0.3, 0.0)

    def test_array_shape_kept(self):
        w = np.array([[0.2, 0.5], [0.7, 0.9]])
        assert A.european_weight_density(w, 0.3).shape == (2, 2)
        assert isinstance(A.european_weight_density(0.2, 0.3), float)

    def test_drift_does_not_enter(self):
        # European weights depend only on the log-price difference
        for s0 in (1.0, 100.0):
            make_params(1.0, mu=-1.7, s0=s0)
        assert "mu" not in A.european_weight_density.__code__.co_varnames

    def test_cdf_matches_density(self):
        w0 = 0.3
        val, _ = integrate.quad(lambda w: A.european_weight_density(w, 0.9), 0, w0, epsabs=1e-13)
        assert val == pytest.approx(float(A.european_weight_cdf(w0, 0.9)), rel=1e-10)

    @pytest.mark.parametrize("alpha", [0.05, 0.25, 0.7, 3.0, 20.0])
    def test_curve_normalized(self, alpha):
        c = A.european_curve(alpha)
        assert abs(c.norm_estimate - 1) < 1e-6
        assert c.symmetry_defect() <= 1e-9 * c.values.max()


class TestCorrelatedEuropean:
    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.01, 0.99), st.floats(0.01, 10.0))
    def test_independent_limit(self, w, alpha):
        assert A.correlated_european_weight_density(w, alpha, CorrelationScale()) == \
            A.european_weight_density(w, alpha)

    @pytest.mark.parametrize("chi", [0.3, 1.0, 4.0])
    def test_closed_form(self, chi):
        w, alpha = 0.27, 0.8
        y = math.log(w / (1 - w))
        c2 = chi * chi
        expect = math.sqrt((2 + c2) / (8 * math.pi * c2 * alpha)) / (w * (1 - w)) * \
            math.exp(-(2 + c2) * y * y / (8 * c2 * alpha))
        assert A.correlated_european_weight_density(w, alpha, chi) == pytest.approx(expect, rel=1e-13)

    def test_critical_maturities(self):
        assert A.critical_maturity_european(None) == 0.5
        assert A.critical_maturity_european(CorrelationScale()) == 0.5
        assert A.critical_maturity_european(math.sqrt(2)) == pytest.approx(1.0, rel=1e-15)
        assert A.critical_maturity_european(0) == math.inf

    @given(st.floats(1e-3, 1e3))
    def test_finite_chi_delays_transition(self, chi):
        assert A.critical_maturity_european(chi) >= 0.5

    def test_tiny_chi_is_degenerate(self):
        with pytest.raises(DegenerateDistributionError):
            A.correlated_european_weight_density(0.3, 1e-300, 1e-200)


class TestAsianZeroDrift:
    @pytest.mark.parametrize("alpha", [0.5, 3.5])
    @pytest.mark.parametrize("w", [0.2, 0.35])
    def test_symmetry(self, w, alpha):
        a = A.asian_mu0_weight_density(w, alpha)
        b = A.asian_mu0_weight_density(1 - w, alpha)
        assert abs(a - b) < 1e-8

    @pytest.mark.parametrize("alpha", [0.5, 1.63, 3.5])
    def test_normalized(self, alpha):
        # outer quadrature in the logit variable
        def f(y):
            w = 1 / (1 + math.exp(-y))
            return A.asian_mu0_weight_density(w, alpha) * w * (1 - w)
        val, _ = integrate.quad(f, 0, 12 * math.sqrt(alpha) + 10, epsabs=1e-11, limit=200)
        assert abs(2 * val - 1) < 1e-6

    def test_small_alpha_is_finite(self):
        v = A.asian_mu0_weight_density(np.array([0.01, 0.5]), 0.3)
        assert np.all(np.isfinite(v)) and np.all(v >= 0)

    def test_shapes(self):
        assert classify(A.asian_mu0_curve(0.5, n=401)).kind == "unimodal"
        flat = A.asian_mu0_curve(1.63, n=401)
        inner = flat.values[(flat.grid >= 0.2) & (flat.grid <= 0.8)]
        assert inner.max() - inner.min() <= 0.05 * inner.mean()
        assert classify(A.asian_mu0_curve(3.5, n=401)).bimodal

    def test_domain(self):
        with pytest.raises(DomainError):
            A.asian_mu0_weight_density(1.0, 1.0)


class TestAsymptotic:
    def test_close_to_exact_near_one(self):
        w = np.linspace(0.8, 0.98, 10)
        exact = A.asian_mu0_weight_density(w, 3.5)
        approx = A.asian_weight_asymptotic(w, 3.5)
        assert np.max(np.abs(approx / exact - 1)) <= 0.10

    def test_monotone_decay(self):
        w = np.linspace(0.9, 0.99999, 400)
        v = A.asian_weight_asymptotic(w, 1.0)
        assert np.all(np.diff(v) < 0)

    def test_inverse_sqrt_alpha(self):
        r = A.asian_weight_asymptotic(0.9, 4e4) / A.asian_weight_asymptotic(0.9, 1e4)
        assert r == pytest.approx(0.5, rel=1e-3)

    def test_lower_half_needs_reflection(self):
        with pytest.raises(DomainError):
            A.asian_weight_asymptotic(0.4, 1.0)
        with pytest.raises(DomainError):
            A.asian_weight_asymptotic(0.5, 1.0)


class TestBeta:
    def test_uniform(self):
        w = np.linspace(0.01, 0.99, 50)
        assert np.all(A.limiting_beta_density(w, 1.0) == 1.0)

    def test_centre_value(self):
        assert A.limiting_beta_density(0.5, 2.0) == pytest.approx(1.5, rel=1e-15)

    def test_u_shape(self):
        assert classify(A.beta_curve(0.5)).kind == "bimodal_U"
        v = A.limiting_beta_density(np.array([1e-8, 0.5]), 0.5)
        assert v[0] > 1e3 * v[1]

    @pytest.mark.parametrize("mu", [0.0, -1.0])
    def test_no_limit_for_nonpositive_mu(self, mu):
        with pytest.raises(DomainError):
            A.limiting_beta_density(0.5, mu)

    @pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
    def test_curve_normalized(self, mu):
        assert abs(A.beta_curve(mu).norm_estimate - 1) < 1e-6
