import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import special as sp

from optrace.errors import ContractError, DomainError
from optrace.special import (EULER_GAMMA, bessel_k0, bessel_k0e, confluent_u, gamma,
                             laguerre_generalized, lgamma, log_confluent_u)


def _laguerre_exact(n, a, x):
    # sum_k (-1)^k C(n + a, n - k) x^k / k! in rational arithmetic
    a, x = Fraction(a), Fraction(x)
    total = Fraction(0)
    for k in range(n + 1):
        binom = Fraction(1)
        for j in range(n - k):
            binom *= (a + k + 1 + j)
        binom /= math.factorial(n - k)
        total += (-1) ** k * binom * x**k / math.factorial(k)
    return total


class TestLaguerre:
    def test_order_zero(self):
        assert laguerre_generalized(0, 0.3, 2.0) == 1.0

    @pytest.mark.parametrize("g,x", [(0.0, 0.0), (0.7, 2.3), (-0.5, 10.0)])
    def test_order_one(self, g, x):
        assert laguerre_generalized(1, g, x) == pytest.approx(1 + g - x, rel=1e-15, abs=1e-15)

    def test_rational_oracle(self):
        exact = _laguerre_exact(5, Fraction(7, 10), Fraction(23, 10))
        assert laguerre_generalized(5, 0.7, 2.3) == pytest.approx(float(exact), rel=1e-13)

    @pytest.mark.parametrize("n", [2, 3, 7, 12])
    def test_matches_scipy(self, n):
        x = np.linspace(0, 20, 9)
        assert np.allclose(laguerre_generalized(n, 1.3, x), sp.eval_genlaguerre(n, 1.3, x),
                           rtol=1e-11, atol=1e-11)

    def test_rejects_bad_order(self):
        with pytest.raises(DomainError):
            laguerre_generalized(-1, 0.0, 1.0)
        with pytest.raises(DomainError):
            laguerre_generalized(1.5, 0.0, 1.0)


class TestBesselK0:
    def test_value_at_one(self):
        assert bessel_k0(1.0) == pytest.approx(0.42102443824070833, rel=1e-12)

    @pytest.mark.parametrize("x", [1e-6, 1e-3, 0.1, 1.0, 7.5, 50.0, 300.0])
    def test_against_mpmath(self, x):
        assert bessel_k0(x) == pytest.approx(float(mpmath.besselk(0, x)), rel=1e-12)

    def test_large_x_asymptotic(self):
        x = 50.0
        assert bessel_k0(x) * math.exp(x) * math.sqrt(x) == pytest.approx(math.sqrt(math.pi / 2),
                                                                          rel=1e-2)

    def test_small_x_log(self):
        x = 1e-3
        assert abs(bessel_k0(x) + math.log(x / 2) + EULER_GAMMA) < 1e-3

    def test_scaled_form(self):
        assert bessel_k0e(800.0) == pytest.approx(sp.k0e(800.0), rel=1e-12)

    def test_array(self):
        x = np.array([0.5, 2.0])
        assert np.allclose(bessel_k0(x), sp.k0(x), rtol=1e-12)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            bessel_k0(bad)


class TestConfluentU:
    def test_large_z(self):
        a, z = 0.5, 1e4
        assert confluent_u(a, 1, z) * z**a == pytest.approx(1.0, abs=1e-3)

    def test_half_order_at_one(self):
        assert confluent_u(0.5, 1, 1.0) == pytest.approx(float(mpmath.hyperu(0.5, 1, 1)), rel=1e-10)

    @pytest.mark.parametrize("z", [0.5, 2.0])
    def test_exponential_integral_identity(self, z):
        assert confluent_u(1.0, 1, z) == pytest.approx(math.exp(z) * sp.exp1(z), rel=1e-10)

    @pytest.mark.parametrize("a", [0.05, 0.5, 0.85, 2.0, 5.0])
    @pytest.mark.parametrize("z", [1e-6, 1e-2, 0.3, 4.0, 90.0])
    def test_against_scipy(self, a, z):
        assert confluent_u(a, 1, z) == pytest.approx(sp.hyperu(a, 1, z), rel=1e-9)

    def test_log_form_where_value_underflows(self):
        a, z = 3.0, 1e-200
        expect = float(mpmath.log(mpmath.hyperu(a, 1, mpmath.mpf(z))))
        assert log_confluent_u(a, z) == pytest.approx(expect, rel=1e-10)

    def test_contract(self):
        with pytest.raises(ContractError):
            confluent_u(0.5, 2, 1.0)
        with pytest.raises(ContractError):
            confluent_u(-0.5, 1, 1.0)
        with pytest.raises(DomainError):
            confluent_u(0.5, 1, 0.0)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 3.7, 12.5, 19.9])
def test_gamma_accuracy(x):
    assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-13)
    assert lgamma(x) == pytest.approx(float(mpmath.loggamma(x)), rel=1e-13, abs=1e-14)
