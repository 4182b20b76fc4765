"""Shape classification and critical-maturity searches."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from ._validation import check_mu, check_positive
from .core import (CorrelationScale, DensityCurve, ModalityReport, PhaseCell,
                   PhaseDiagram, as_correlation)
from .errors import ContractError
from .montecarlo import WalkConfig, logit_curvature, simulate_checkpoints

DEFAULT_DELTA = 1e-3


# --- classification --------------------------------------------------------

def _check_symmetric(curve, sym_tol, z_max):
    if not np.allclose(curve.grid + curve.grid[::-1], 1.0, rtol=0, atol=1e-12):
        raise ContractError("curve grid is not mirror symmetric about 1/2")
    v = curve.values
    diff = np.abs(v - v[::-1])
    if curve.kind == "mc":
        se = curve.stderr
        if se is None:
            raise ContractError("MC curve without standard errors")
        scale = np.sqrt(se**2 + se[::-1] ** 2)
        bad = diff > z_max * np.maximum(scale, 1e-300)
        if np.any(bad & (diff > 0)):
            raise ContractError(
                f"MC curve asymmetric beyond {z_max} standard errors "
                f"(max |z| = {float(np.max(diff / np.maximum(scale, 1e-300))):.3g})")
    elif np.max(diff) > sym_tol * max(np.max(v), 1e-300):
        raise ContractError(f"curve asymmetric: max |p(w) - p(1-w)| = {np.max(diff):.3g}")


def _smooth(values, half_width):
    if half_width < 1:
        return values
    k = np.ones(2 * half_width + 1) / (2 * half_width + 1)
    padded = np.concatenate([values[half_width:0:-1], values, values[-2:-half_width - 2:-1]])
    return np.convolve(padded, k, mode="valid")


def _center_value(curve, values):
    g = curve.grid
    return float(np.interp(0.5, g, values))


def classify(curve, prominence_eps=0.01, plateau_eps=0.05, sym_tol=1e-9,
             z_max=5.0, bandwidth=None, edge_frac=0.5):
    """Classify a symmetric weight density.

    Analytic and quadrature curves must be mirror symmetric to ``sym_tol``
    (relative to their maximum); MC curves to ``z_max`` standard errors per
    bin.  MC curves are then symmetrized and smoothed with a moving average
    of ``bandwidth`` bins (default: 2 bins each side), and a feature only
    counts when it clears ``z_max`` standard errors of the smoothed values.

    Decision order: bimodal when the right-half maximum sits away from 1/2
    and rises above p(1/2) by at least ``prominence_eps`` (relative):
    bimodal_U when the outermost grid value keeps at least ``edge_frac`` of
    the peak, bimodal_M when the density has fallen off towards the ends; then uniform plateau (``max - min <= plateau_eps * mean`` on
    [0.2, 0.8]); else unimodal.
    """
    if not isinstance(curve, DensityCurve):
        raise ContractError("classify expects a DensityCurve")
    _check_symmetric(curve, sym_tol, z_max)
    g = curve.grid
    if curve.kind == "mc":
        hw = 2 if bandwidth is None else int(bandwidth)
        v = _smooth(0.5 * (curve.values + curve.values[::-1]), hw)
        # standard error of the symmetrized moving average (bins independent)
        se2 = 0.25 * (curve.stderr**2 + curve.stderr[::-1] ** 2)
        se = np.sqrt(_smooth(se2, hw) / (2 * hw + 1))
    else:
        hw = 0
        v = np.asarray(curve.values, float)
        se = np.zeros_like(v)
    dw = float(np.min(np.diff(g)))
    p_half = _center_value(curve, v)
    # discrete second difference at 1/2 on the grid spacing
    curv = float(np.interp(0.5 + dw, g, v) + np.interp(0.5 - dw, g, v) - 2 * p_half)

    inner = (g >= 0.2) & (g <= 0.8)
    mean_inner = float(v[inner].mean())
    spread = float(v[inner].max() - v[inner].min())
    right = g >= 0.5
    i_max = int(np.argmax(np.where(right, v, -np.inf)))
    w_max, p_max = float(g[i_max]), float(v[i_max])
    prominence = (p_max - p_half) / p_max if p_max > 0 else 0.0
    details = {"prominence": prominence, "plateau_spread": spread / mean_inner,
               "bandwidth_bins": hw, "right_mode": w_max}

    # MC noise must not pass for structure: rises below z_max s.e. do not count
    se_half = float(np.interp(0.5, g, se))
    noise = z_max * math.hypot(float(se[i_max]), se_half)
    details["noise_floor"] = noise
    off_centre = w_max - 0.5 > 2 * dw and prominence >= prominence_eps and p_max - p_half > noise
    # the smoother's reflection would pull interior mass into the end bin
    edge = float(0.5 * (curve.values[0] + curve.values[-1]))
    edge_ratio = edge / p_max if p_max > 0 else 0.0
    details["edge_ratio"] = edge_ratio
    if off_centre and edge_ratio >= edge_frac:
        kind, modes = "bimodal_U", (1.0 - w_max, w_max)
    elif off_centre:
        kind, modes = "bimodal_M", (1.0 - w_max, w_max)
    elif spread <= max(plateau_eps * mean_inner, 2.0 * z_max * float(se[inner].max())):
        kind, modes = "uniform_plateau", ()
    else:
        kind, modes = "unimodal", (0.5,)
    return ModalityReport(kind, modes, curv, details)


# --- curvature at 1/2 -------------------------------------------------------

def center_curvature(density, delta=DEFAULT_DELTA, richardson=True):
    """Curvature estimate of ``density`` at w = 1/2 from symmetric differences.

    With ``D(d) = p(1/2 + d) + p(1/2 - d) - 2 p(1/2)`` the plain estimate is
    ``D(delta) / delta^2``.  The Richardson combination
    ``(16 D(delta) - D(2 delta)) / (12 delta^2)`` removes the ``delta^2``
    term, so the sign change in alpha no longer drifts with ``delta``.
    """
    def D(d):
        pts = np.array([0.5 + d, 0.5 - d, 0.5])
        p = np.asarray(density(pts), dtype=float)
        return (p[0] + p[1]) - 2.0 * p[2]

    if richardson:
        return (16.0 * D(delta) - D(2.0 * delta)) / (12.0 * delta * delta)
    return D(delta) / (delta * delta)


@dataclass(frozen=True)
class CriticalEstimate:
    """Result of a critical-maturity search.

    ``alpha_c`` is ``None`` when the searched range shows no transition.
    ``ci`` is a (lo, hi) interval when the estimate is statistical.
    """

    alpha_c: Optional[float]
    method: str
    bracket: tuple
    ci: Optional[tuple] = None
    conclusive: bool = True
    details: dict = field(default_factory=dict)

    @property
    def transition(self):
        return self.alpha_c is not None

    def __float__(self):
        if self.alpha_c is None:
            raise ValueError("no transition in the searched range")
        return float(self.alpha_c)


def critical_maturity(density_family, bracket, tol=1e-7, delta=DEFAULT_DELTA,
                      richardson=True, max_iter=200):
    """Bisection for the maturity where the curvature at 1/2 changes sign.

    ``density_family(alpha)`` must return a callable ``w -> p(w)`` (a
    function or a :class:`DensityCurve` whose grid resolves ``delta``).
    Returns a :class:`CriticalEstimate`; ``alpha_c`` is ``None`` when both
    bracket ends have the same curvature sign.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not 0 < lo < hi:
        raise ContractError("bracket must satisfy 0 < lo < hi")

    def sign(a):
        return center_curvature(density_family(a), delta, richardson)

    c_lo, c_hi = sign(lo), sign(hi)
    info = {"delta": delta, "richardson": richardson, "curvature_lo": c_lo, "curvature_hi": c_hi}
    if (c_lo > 0) == (c_hi > 0):
        return CriticalEstimate(None, "bisection", (lo, hi), details=info)
    n = 0
    while hi - lo > tol and n < max_iter:
        mid = 0.5 * (lo + hi)
        if (sign(mid) > 0) == (c_lo > 0):
            lo = mid
        else:
            hi = mid
        n += 1
    info["iterations"] = n
    return CriticalEstimate(0.5 * (lo + hi), "bisection", (lo, hi), details=info)


# --- Monte Carlo ------------------------------------------------------------

DEFAULT_MC_BUDGET = {
    "n_paths": 1_000_000,
    "alpha_lo": 0.25,
    "alpha_hi": 2.5,
    "alpha_step": 0.025,
    "n_steps_max": 512,
    "ci_level": 0.95,
    "ci_tol": 0.1,
    "seed": 20240607,
}


def _crossing(alphas, crit):
    """First upward zero crossing of ``crit`` by linear interpolation."""
    for i in range(1, len(alphas)):
        if crit[i - 1] <= 0 < crit[i]:
            t = crit[i - 1] / (crit[i - 1] - crit[i])
            return alphas[i - 1] + t * (alphas[i] - alphas[i - 1])
    return None


def critical_maturity_mc(mu, chi=None, mc_budget=None, threads=None, style="asian"):
    """Critical maturity from one checkpointed simulation.

    The race is simulated once up to ``alpha_hi`` with a fixed step and
    histogrammed at every ``alpha_step``.  At each checkpoint the centre
    curvature indicator comes from a polynomial fit to the log density of
    ``|logit(w)|`` (see :func:`~optrace.montecarlo.logit_curvature`); the
    estimate is its first upward zero.  The confidence interval is a
    Student-t interval over per-batch estimates (``n_batches`` contiguous
    groups of paths); when its half width exceeds ``ci_tol`` the estimate is
    flagged ``conclusive=False``.
    """
    mu = check_mu(mu)
    chi = as_correlation(chi)
    b = dict(DEFAULT_MC_BUDGET)
    b.update(mc_budget or {})
    a_lo, a_hi, step = b["alpha_lo"], b["alpha_hi"], b["alpha_step"]
    dt = 2.0 * a_hi / b["n_steps_max"]
    alphas = list(np.arange(a_lo, a_hi + 0.5 * step, step))
    cfg = WalkConfig(mu=mu, chi=chi, n_steps=b["n_steps_max"], dt=dt,
                     n_paths=b["n_paths"], seed=b["seed"],
                     n_batches=b.get("n_batches", 10))
    hists = simulate_checkpoints(cfg, alphas, style, threads)
    real = np.array([h.params["alpha"] for h in hists])
    crit = np.empty(len(hists))
    se = np.empty(len(hists))
    for j, h in enumerate(hists):
        crit[j], se[j] = logit_curvature(h.logit_edges, h.logit_counts)
    a_c = _crossing(real, crit)
    details = {"alphas": real, "criterion": crit, "criterion_se": se, "dt": dt,
               "n_paths": cfg.n_paths, "seed": cfg.seed,
               "bandwidth": float(hists[0].logit_edges[1] - hists[0].logit_edges[0]),
               "rejected": int(sum(h.rejected for h in hists))}
    if a_c is None:
        return CriticalEstimate(None, "mc-logit-curvature", (a_lo, a_hi), details=details)
    per_batch = []
    for k in range(cfg.n_batches):
        ck = [logit_curvature(h.logit_edges, h.params["logit_batch_counts"][k])[0]
              for h in hists]
        x = _crossing(real, np.array(ck))
        if x is not None:
            per_batch.append(x)
    details["batch_estimates"] = per_batch
    ci, conclusive = None, False
    if len(per_batch) >= 3:
        s = float(np.std(per_batch, ddof=1)) / math.sqrt(len(per_batch))
        # per-batch estimates carry 1/sqrt(B) of the paths each; scale to the full run
        half = float(stats.t.ppf(0.5 + 0.5 * b["ci_level"], len(per_batch) - 1)) * s
        ci = (a_c - half, a_c + half)
        conclusive = half <= b["ci_tol"] and len(per_batch) == cfg.n_batches
        details["ci_half_width"] = half
    return CriticalEstimate(a_c, "mc-logit-curvature", (a_lo, a_hi), ci, conclusive, details)


# --- correlated sweep and phase diagram ------------------------------------

DEFAULT_CELL_BUDGET = {
    "n_paths": 100_000,
    "dt": 0.05,
    # checkpoints share one set of paths, so a dense schedule costs little
    "alphas": tuple(0.125 * k for k in range(2, 41)) + (6.0, 7.0, 8.0, 10.0, 12.0, 14.0,
                                                         16.0, 18.0, 20.0),
    "z_sig": 3.0,
    "conv_eps": 0.05,
    "seed": 4242,
}


def _hist_curve_distance(h1, h2, lo=0.05, hi=0.95):
    """Relative sup-norm distance of two smoothed histogram densities on [lo, hi].

    The outermost bins are left out: for 0 < mu < 1 they keep filling long
    after the bulk has settled.
    """
    c = h1.centers
    m = (c >= lo) & (c <= hi)
    a = _smooth(h1.density(), 2)[m]
    b = _smooth(h2.density(), 2)[m]
    return float(np.max(np.abs(a - b)) / max(a.max(), b.max()))


def run_cell(mu, chi, budget=None, threads=None):
    """Simulate one (mu, chi) cell over a schedule of maturities.

    Verdicts: ``"transition"`` once the centre-curvature indicator exceeds
    ``z_sig`` standard errors; ``"no transition"`` when it stays below zero
    and the last two checkpoint histograms differ by less than ``conv_eps``
    (relative sup norm); ``"inconclusive"`` otherwise.
    """
    mu = check_mu(mu)
    chi = as_correlation(chi)
    b = dict(DEFAULT_CELL_BUDGET)
    b.update(budget or {})
    alphas = sorted(b["alphas"])
    n_max = int(round(2.0 * alphas[-1] / b["dt"]))
    cfg = WalkConfig(mu=mu, chi=chi, n_steps=n_max, dt=b["dt"], n_paths=b["n_paths"],
                     seed=b["seed"], n_bins=100)
    hists = simulate_checkpoints(cfg, alphas, "asian", threads)
    traj = []
    crit = []
    for h in hists:
        c, se = logit_curvature(h.logit_edges, h.logit_counts)
        rep = classify(h.to_curve())
        crit.append((c, se))
        traj.append((h.params["alpha"], h.params["n_steps"], c, se, rep.kind))
    real = np.array([t[0] for t in traj])
    cvals = np.array([c for c, _ in crit])
    sig = [c - b["z_sig"] * se > 0 for c, se in crit]
    dist = _hist_curve_distance(hists[-2], hists[-1])
    converged = dist < b["conv_eps"]
    if any(sig):
        a_c = _crossing(real, cvals)
        j = sig.index(True)
        verdict = "transition"
        n_c = int(traj[j][1]) if a_c is None else int(round(2.0 * a_c / b["dt"]))
    elif all(c + b["z_sig"] * se < 0 for c, se in crit[-2:]) and converged:
        verdict, a_c, n_c = "no transition", None, None
    else:
        verdict, a_c, n_c = "inconclusive", None, None
    # shape the density first turns into: near alpha_c it is flat, so take the
    # first bimodal class at or after the first significant checkpoint
    shape = None
    if verdict == "transition":
        later = [t[4] for t in traj[sig.index(True):] if t[4].startswith("bimodal")]
        shape = later[0] if later else traj[-1][4]
    inv = 0.0 if chi.independent else chi.inv_chi
    return PhaseCell(mu, inv, verdict, a_c, n_c, traj[-1][4], converged, tuple(traj),
                     {"final_distance": dist, "dt": b["dt"], "seed": cfg.seed,
                      "n_paths": cfg.n_paths, "transition_class": shape})


def chi_critical(mu, chi_grid, n_schedule=None, budget=None, threads=None):
    """Largest coupling scale on ``chi_grid`` whose race never turns bimodal.

    ``n_schedule`` (increasing step counts) overrides the maturity schedule
    through ``alpha = N dt / 2``.  Returns ``(chi_c, cells)`` with ``chi_c``
    ``None`` when every grid value transitions; ``cells`` maps chi to its
    :class:`~optrace.core.PhaseCell` (``n_c`` is the critical step count).
    """
    b = dict(DEFAULT_CELL_BUDGET)
    b.update(budget or {})
    if n_schedule is not None:
        n_schedule = sorted(int(n) for n in n_schedule)
        b["alphas"] = tuple(0.5 * n * b["dt"] for n in n_schedule)
    cells = {}
    for chi in chi_grid:
        cells[chi] = run_cell(mu, chi, b, threads)
    unimodal = [c for c, cell in cells.items() if cell.verdict == "no transition"]
    return (max(unimodal) if unimodal else None), cells


def phase_diagram(mu_grid, inv_chi_grid, budget=None, threads=None):
    """Sweep the (mu, 1/chi) plane; 1/chi = 0 means independent walks."""
    cells = {}
    for mu in mu_grid:
        for r in inv_chi_grid:
            r = float(r)
            if r < 0:
                raise ContractError("1/chi must be >= 0")
            chi = CorrelationScale() if r == 0 else CorrelationScale(1.0 / r)
            cells[(float(mu), r)] = run_cell(mu, chi, budget, threads)
    meta = dict(DEFAULT_CELL_BUDGET)
    meta.update(budget or {})
    return PhaseDiagram(tuple(float(m) for m in mu_grid), tuple(float(r) for r in inv_chi_grid),
                        cells, meta)
