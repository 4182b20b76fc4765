"""End-to-end acceptance checks, one group per numbered criterion.

Run with ``pytest tests/test_acceptance.py``; a PASS/FAIL line per criterion
is printed after the test session summary.
"""

import math
import time

import numpy as np
import pytest

from optrace import analytic as A
from optrace import cli, convolve
from optrace.core import CorrelationScale, make_params
from optrace.modality import (classify, critical_maturity, critical_maturity_mc,
                              phase_diagram)
from optrace.montecarlo import (WalkConfig, chi_square_gof, fit_effective_maturity, run_race,
                                sample_mean, simulate_checkpoints)
from optrace.psi import TabulatedPsi, psi_approx_negative_mu, psi_exact_negative_mu

criterion = pytest.mark.criterion


def _cli_value(argv, capsys, key="alpha_c"):
    assert cli.main(argv) == 0
    out = capsys.readouterr().out
    return dict(line.split("=", 1) for line in out.splitlines())[key]


# 1 -------------------------------------------------------------------------

@criterion(1, "European threshold 0.5 within 1e-6 by bisection, under 1 s")
def test_european_threshold(capsys):
    t = time.perf_counter()
    a_c = float(_cli_value(["critical", "european"], capsys))
    assert time.perf_counter() - t < 1.0
    assert abs(a_c - 0.5) <= 1e-6


# 2 -------------------------------------------------------------------------

@criterion(2, "correlated European threshold (2+chi^2)/(2 chi^2) within 1e-6")
@pytest.mark.parametrize("chi_sq", [0.5, 2.0, 8.0])
def test_correlated_threshold(chi_sq):
    chi = CorrelationScale(math.sqrt(chi_sq))
    est = critical_maturity(lambda a: (lambda w: A.correlated_european_weight_density(w, a, chi)),
                            (0.01, 20.0), tol=1e-9)
    assert abs(est.alpha_c - (2 + chi_sq) / (2 * chi_sq)) <= 1e-6


# 3 -------------------------------------------------------------------------

@criterion(3, "Asian zero-drift threshold 1.63 +- 0.05 from the quadrature density, under 2 min")
def test_asian_zero_drift_threshold(capsys):
    t = time.perf_counter()
    a_c = float(_cli_value(["critical", "asian-mu0"], capsys))
    assert time.perf_counter() - t < 120
    assert abs(a_c - 1.63) <= 0.05


# 4 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def negative_drift_race():
    t = time.perf_counter()
    cfg = WalkConfig(mu=-1.7, n_steps=300, dt=0.01, n_paths=1_000_000, seed=7)
    hists = simulate_checkpoints(cfg, [0.25, 1.5])
    return hists, time.perf_counter() - t


@pytest.fixture(scope="module")
def negative_drift_critical():
    t = time.perf_counter()
    est = critical_maturity_mc(-1.7)
    return est, time.perf_counter() - t


@criterion(4, "MC at mu=-1.7: bell at 0.25, M at 1.5, alpha_c 1.12 +- 0.1, fit residual <= 5%, "
              "under 10 min")
def test_negative_drift_shapes(negative_drift_race):
    (early, late), _ = negative_drift_race
    assert early.n_paths == late.n_paths == 1_000_000
    assert early.rejected == late.rejected == 0
    assert classify(early.to_curve()).kind == "unimodal"
    assert classify(late.to_curve()).kind == "bimodal_M"


@criterion(4, "MC at mu=-1.7: bell at 0.25, M at 1.5, alpha_c 1.12 +- 0.1, fit residual <= 5%, "
              "under 10 min")
def test_negative_drift_fit(negative_drift_race):
    for h in negative_drift_race[0]:
        _, resid = fit_effective_maturity(h)
        assert resid <= 0.05


@criterion(4, "MC at mu=-1.7: bell at 0.25, M at 1.5, alpha_c 1.12 +- 0.1, fit residual <= 5%, "
              "under 10 min")
def test_negative_drift_critical(negative_drift_critical, negative_drift_race):
    est, elapsed = negative_drift_critical
    assert est.conclusive
    assert abs(est.alpha_c - 1.12) <= 0.1
    assert elapsed + negative_drift_race[1] < 600


# 5 -------------------------------------------------------------------------

@criterion(5, "convolving the infinite-maturity tau density gives Beta(mu, mu) within 1e-4, "
              "under 1 min")
def test_beta_limit():
    t = time.perf_counter()
    w = np.linspace(0.05, 0.95, 91)
    for mu in (0.5, 1.0, 2.0):
        got = convolve.beta_limit_from_psi(w, mu)
        assert np.max(np.abs(got - A.limiting_beta_density(w, mu))) < 1e-4
    assert time.perf_counter() - t < 60


# 6 -------------------------------------------------------------------------

@criterion(6, "approximate vs exact tau density at mu=-1 within 10% on tau' in [0.1, 1e3], "
              "under 5 min")
@pytest.mark.parametrize("alpha", [20.0, 30.0, 50.0])
def test_tau_density_approximation(alpha):
    t = time.perf_counter()
    p = make_params(math.sqrt(2.0), mu=-1.0)  # tau' = tau
    tp = np.logspace(-1, 3, 41)
    ratio = psi_approx_negative_mu(tp, p, alpha).value / psi_exact_negative_mu(tp, p, alpha).value
    assert time.perf_counter() - t < 100
    worst = float(np.max(np.abs(ratio - 1)))
    assert worst <= 0.10, f"alpha={alpha}: worst relative gap {worst:.4f}"


# 7 -------------------------------------------------------------------------

@criterion(7, "1e6-path European histograms pass chi-square against the closed forms at p > 0.01, "
              "under 3 min")
@pytest.mark.parametrize("alpha,chi", [(0.25, None), (0.7, None), (1.0, 1.0)])
def test_european_monte_carlo(alpha, chi):
    t = time.perf_counter()
    c = CorrelationScale() if chi is None else CorrelationScale(chi)
    cfg = WalkConfig(chi=c, n_steps=16, alpha_target=alpha, n_paths=1_000_000, seed=2024,
                     n_bins=100)
    h = run_race(cfg, "european")
    _, _, p = chi_square_gof(h, lambda e: A.european_weight_cdf(e, alpha, c))
    assert time.perf_counter() - t < 60
    assert h.rejected == 0
    assert p > 0.01


# 8 -------------------------------------------------------------------------

MUS, INV_CHIS = (-1.0, 0.5, 2.0), (0.0, 0.5, 1.0)


@pytest.fixture(scope="module")
def sweep():
    t = time.perf_counter()
    pd = phase_diagram(MUS, INV_CHIS)
    return pd, time.perf_counter() - t


def _alpha_c_or_inf(cell):
    return math.inf if cell.verdict == "no transition" else cell.alpha_c


@criterion(8, "phase sweep: mu=2 never transitions, mu=0.5 and mu=-1 transition with alpha_c "
              "growing as chi falls, boundary at 1/chi=0 brackets mu=1, under 30 min")
def test_sweep_large_drift_row(sweep):
    pd, elapsed = sweep
    assert elapsed < 1800
    assert all(c.verdict == "no transition" for c in pd.row(2.0))


@criterion(8, "phase sweep: mu=2 never transitions, mu=0.5 and mu=-1 transition with alpha_c "
              "growing as chi falls, boundary at 1/chi=0 brackets mu=1, under 30 min")
@pytest.mark.parametrize("mu", [0.5, -1.0])
def test_sweep_transition_rows(sweep, mu):
    pd, _ = sweep
    row = pd.row(mu)
    assert all(c.verdict != "inconclusive" for c in row)
    assert row[0].verdict == "transition"
    a = [_alpha_c_or_inf(c) for c in row]
    assert all(x < y for x, y in zip(a, a[1:]) if math.isfinite(x))
    assert all(x <= y for x, y in zip(a, a[1:]))


@criterion(8, "phase sweep: mu=2 never transitions, mu=0.5 and mu=-1 transition with alpha_c "
              "growing as chi falls, boundary at 1/chi=0 brackets mu=1, under 30 min")
def test_sweep_boundary(sweep):
    pd, _ = sweep
    lo, hi = pd.boundary()[0.0]
    assert lo < 1.0 < hi
    # the transitioning region only shrinks as correlations strengthen
    trans = [{m for m in MUS if pd.cells[(m, r)].verdict == "transition"} for r in INV_CHIS]
    assert all(b <= a for a, b in zip(trans, trans[1:]))


@criterion(8, "phase sweep: mu=2 never transitions, mu=0.5 and mu=-1 transition with alpha_c "
              "growing as chi falls, boundary at 1/chi=0 brackets mu=1, under 30 min")
def test_sweep_transition_shapes(sweep):
    pd, _ = sweep
    assert pd.cells[(0.5, 0.0)].details["transition_class"] == "bimodal_U"
    assert pd.cells[(-1.0, 0.0)].details["transition_class"] == "bimodal_M"


# 9 -------------------------------------------------------------------------

@criterion(9, "properties: symmetry, normalization, s0-invariance, worker-count determinism")
@pytest.mark.parametrize("make", [
    lambda: A.european_curve(0.7),
    lambda: A.european_curve(1.3, chi=0.8),
    lambda: A.beta_curve(0.5),
    lambda: A.asian_mu0_curve(1.63),
    lambda: convolve.asian_negative_mu_curve(-1.0, 20.0),
    lambda: convolve.asian_exact_curve(0.0, 5.0),
], ids=["european", "european-correlated", "beta", "asian-mu0", "asian-neg-mu", "asian-exact-mu0"])
def test_quadrature_symmetry_and_mass(make):
    c = make()
    # mirrored grid points differ by an ulp, which steep edges amplify a little
    assert c.symmetry_defect() <= 1e-12 * c.values.max()
    assert abs(c.norm_estimate - 1) <= 1e-4


@criterion(9, "properties: symmetry, normalization, s0-invariance, worker-count determinism")
@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0])
def test_infinite_maturity_tau_mass(mu):
    assert abs(TabulatedPsi.infinity(mu).raw_mass - 1) <= 1e-8


@criterion(9, "properties: symmetry, normalization, s0-invariance, worker-count determinism")
@pytest.mark.parametrize("alpha", [20.0, 50.0])
def test_exact_tau_mass(alpha):
    assert abs(TabulatedPsi.exact(-1.0, alpha).raw_mass - 1) <= 1e-6


@criterion(9, "properties: symmetry, normalization, s0-invariance, worker-count determinism")
@pytest.mark.parametrize("mu,chi", [(-1.7, None), (0.5, 1.0), (0.0, None)])
def test_monte_carlo_symmetry(mu, chi):
    cfg = WalkConfig(mu=mu, chi=chi, n_steps=150, dt=0.02, n_paths=400_000, seed=77, n_bins=50)
    h = run_race(cfg)
    m, se = sample_mean(h)
    assert abs(m - 0.5) <= 3 * se
    d, s = h.density(), h.density_stderr()
    z = np.abs(d - d[::-1]) / np.maximum(np.hypot(s, s[::-1]), 1e-300)
    half = z[: len(z) // 2]
    assert np.mean(half <= 3) >= 0.95 and half.max() < 4.5
    assert abs(h.to_curve().norm_estimate - 1) < 1e-12


@criterion(9, "properties: symmetry, normalization, s0-invariance, worker-count determinism")
@pytest.mark.parametrize("style", ["asian", "european"])
def test_initial_price_invariance(style):
    base = dict(mu=-1.0, n_steps=100, dt=0.02, n_paths=100_000, seed=3)
    a = run_race(WalkConfig(**base), style, threads=1)
    b = run_race(WalkConfig(s0=250.0, **base), style, threads=1)
    assert np.array_equal(a.counts, b.counts)
    w = np.array([0.2, 0.5])
    p1 = convolve.asian_weight_density_negative_mu(w, make_params(1.0, mu=-1.0, s0=1.0), 5.0)
    p2 = convolve.asian_weight_density_negative_mu(w, make_params(1.0, mu=-1.0, s0=250.0), 5.0)
    assert np.array_equal(p1, p2)


@criterion(9, "properties: symmetry, normalization, s0-invariance, worker-count determinism")
@pytest.mark.parametrize("style", ["asian", "european"])
def test_worker_count_determinism(style):
    cfg = WalkConfig(mu=-1.7, n_steps=128, dt=0.01, n_paths=60_000, seed=5)
    ref = run_race(cfg, style, threads=1)
    for k in (2, 4):
        h = run_race(cfg, style, threads=k)
        assert np.array_equal(h.counts, ref.counts)
        assert np.array_equal(h.logit_counts, ref.logit_counts)
        assert h.params["sum_w"] == ref.params["sum_w"]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
