import math
import warnings

import numpy as np
import pytest

from optrace import analytic as A
from optrace import convolve as C
from optrace.core import interior_grid, make_params
from optrace.errors import ContractError, DomainError
from optrace.montecarlo import WalkConfig, chi_square_gof, run_race
from optrace.psi import TabulatedPsi


def _cdf_from(conv):
    # one vectorized density pass on a logit grid, integrated cumulatively
    y = np.linspace(-30.0, 30.0, 12001)
    w = 0.5 * (1 + np.tanh(0.5 * y))
    f = conv.density(w) * w * (1 - w)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(y))])
    cum /= cum[-1]

    def cdf(edges):
        e = np.clip(np.asarray(edges, float), 1e-300, 1 - 1e-16)
        return np.interp(np.log(e) - np.log1p(-e), y, cum)
    return cdf


class TestBetaLimit:
    @pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
    def test_matches_beta(self, mu):
        w = np.linspace(0.05, 0.95, 19)
        got = C.beta_limit_from_psi(w, mu)
        assert np.max(np.abs(got - A.limiting_beta_density(w, mu))) < 1e-4

    def test_table_route_agrees(self):
        w = np.linspace(0.1, 0.9, 9)
        conv = C.WeightConvolver(TabulatedPsi.infinity(2.0))
        assert np.max(np.abs(conv.density(w) - A.limiting_beta_density(w, 2.0))) < 1e-4

    def test_needs_positive_mu(self):
        with pytest.raises(DomainError):
            C.beta_limit_from_psi(0.5, -0.5)


class TestScaleMixture:
    def test_narrow_tau_concentrates_at_half(self):
        s = 1e-3
        psi = lambda t: np.exp(-0.5 * ((t - 1.0) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        conv = C.WeightConvolver(psi, {"scan_step": 1e-4, "scan_range": (-0.05, 0.05)})
        p = conv.density(np.array([0.45, 0.499, 0.5]))
        assert p[2] > 100
        assert p[0] < 1e-6 * p[2]
        assert p[1] < p[2]

    def test_mirror_symmetry(self):
        g = interior_grid(401)
        p = C.WeightConvolver(TabulatedPsi.exact(-1.0, 5.0)).density(g)
        assert np.max(np.abs(p - p[::-1]) / p) <= 1e-12

    def test_warns_on_unnormalized_input(self):
        p = make_params(math.sqrt(2.0), mu=2.0)
        from optrace.psi import psi_infinity
        with pytest.warns(RuntimeWarning, match="integrates to 2"):
            v = C.weight_density_from_psi(lambda t: 2 * psi_infinity(t, p).value, 0.5)
        # not renormalized: the density scales with the square of the mass
        assert v == pytest.approx(4 * 1.5, rel=1e-4)

    def test_normalized_input_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            C.beta_limit_from_psi(0.3, 1.0)

    def test_rejects_endpoints(self):
        with pytest.raises(DomainError):
            C.beta_limit_from_psi(1.0, 1.0)


class TestNegativeDrift:
    @pytest.mark.parametrize("alpha", [20.0, 50.0])
    def test_interior_scaling_collapse(self, alpha):
        w = np.linspace(0.2, 0.8, 13)
        p = C.asian_weight_density_negative_mu(w, make_params(1.0, mu=-1.0), alpha)
        s = p * math.sqrt(alpha) * w * (1 - w)
        assert (s.max() - s.min()) / s.mean() < 0.02

    def test_collapse_is_shared_across_alpha(self):
        w = np.linspace(0.2, 0.8, 7)
        s = [C.asian_weight_density_negative_mu(w, make_params(1.0, mu=-1.0), a) * math.sqrt(a)
             * w * (1 - w) for a in (20.0, 50.0)]
        assert np.max(np.abs(s[0] / s[1] - 1)) < 0.05

    def test_no_limiting_curve(self):
        c20 = C.asian_negative_mu_curve(-1.0, 20.0)
        c50 = C.asian_negative_mu_curve(-1.0, 50.0)
        m = (c20.grid >= 0.1) & (c20.grid <= 0.9)
        dist = np.max(np.abs(c20.values[m] - c50.values[m])) / c50.values[m].max()
        assert dist > 0.1
        # the interior keeps flattening
        assert c50(0.5) < c20(0.5)

    @pytest.mark.parametrize("alpha", [5.0, 20.0, 50.0])
    def test_curves_normalized(self, alpha):
        c = C.asian_negative_mu_curve(-1.0, alpha)
        assert abs(c.norm_estimate - 1) < 1e-4
        assert c.symmetry_defect() <= 1e-12 * c.values.max()

    @pytest.mark.parametrize("alpha", [5.0, 20.0, 50.0])
    def test_effective_maturity_fit(self, alpha):
        a_t, resid = C.fit_effective_maturity_curve(C.asian_negative_mu_curve(-1.0, alpha))
        assert resid <= 0.05
        assert 0 < a_t < alpha

    def test_approx_route_close_at_large_alpha(self):
        w = np.array([0.2, 0.5, 0.8])
        p = make_params(1.0, mu=-1.0)
        ex = C.asian_weight_density_negative_mu(w, p, 50.0, method="exact")
        ap = C.asian_weight_density_negative_mu(w, p, 50.0, method="approx")
        assert np.max(np.abs(ap / ex - 1)) < 0.02

    def test_contract(self):
        with pytest.raises(ContractError):
            C.asian_weight_density_negative_mu(0.5, make_params(1.0, mu=0.5), 5.0)
        with pytest.raises(ContractError):
            C.asian_weight_density_negative_mu(0.5, make_params(1.0, mu=-1.0), 5.0, method="x")

    def test_monte_carlo_cross_check(self):
        cfg = WalkConfig(mu=-1.0, n_steps=500, alpha_target=5.0, n_paths=100_000, seed=3,
                         n_bins=40)
        h = run_race(cfg, threads=1)
        cdf = _cdf_from(C._convolver("exact", -1.0, 5.0))
        probs = np.diff(cdf(h.bin_edges))
        expect = probs * h.n_paths
        z = (h.counts - expect) / np.sqrt(expect * (1 - probs))
        assert np.mean(np.abs(z) <= 3) >= 0.95
        assert np.max(np.abs(z)) < 4.5
        assert chi_square_gof(h, cdf)[2] > 0.01


def test_zero_drift_exact_route_matches_closed_quadrature():
    w = np.array([0.2, 0.4, 0.5])
    c = C.asian_exact_curve(0.0, 5.0)
    assert np.allclose(c(w), A.asian_mu0_weight_density(w, 5.0), rtol=1e-4)


def test_psi_table_cache():
    assert C.psi_table("exact", -1.0, 5.0) is C.psi_table("exact", -1.0, 5.0)
    with pytest.raises(ContractError):
        C.psi_table("other", -1.0, 5.0)
