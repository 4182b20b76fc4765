"""Monte Carlo race between two discretized (possibly coupled) walks.

Each walk is ``x_n = x_{n-1} - (mu/2) s2 dt + eta_n`` with ``Var(eta_n) = s2 dt``
and ``s2 = CorrelationScale.step_var``; the pair ``(eta1, eta2)`` is built from
``u ~ N(0, g^2 dt)`` and ``v ~ N(0, 2 dt)`` as ``((v + u)/2, (v - u)/2)``.
Maturity is measured with unit bare volatility, ``alpha = N dt / 2``.

Random numbers come from one Philox stream per fixed-size block of paths,
keyed by ``(seed, block index)``, and block results are reduced in block
order, so output is bitwise independent of the number of worker threads.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special, stats

from ._validation import check_mu, check_positive
from .core import CorrelationScale, Histogram, as_correlation
from .errors import ContractError, DegenerateDistributionError

THREADS_ENV = "OPTRACE_THREADS"


def default_threads():
    """Worker count from ``$OPTRACE_THREADS``, else the CPU count."""
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ContractError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        if n < 1:
            raise ContractError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def fresh_seed():
    """A random 63-bit seed, for runs that did not ask for one."""
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class WalkConfig:
    """Parameters of one simulated race.

    Give ``alpha_target`` to derive ``dt = 2 alpha / n_steps``; otherwise
    ``dt`` (default 1) fixes the maturity ``alpha = n_steps dt / 2``.
    ``s0`` is the common initial price of both walks; weights do not
    depend on it.
    """

    mu: float = 0.0
    chi: CorrelationScale = field(default_factory=CorrelationScale)
    n_steps: int = 256
    dt: Optional[float] = None
    alpha_target: Optional[float] = None
    n_paths: int = 1_000_000
    seed: Optional[int] = None
    n_bins: int = 200
    logit_range: float = 3.0
    logit_bins: int = 60
    n_batches: int = 10
    s0: float = 1.0

    def __post_init__(self):
        check_mu(self.mu)
        check_positive(self.s0, "s0")
        object.__setattr__(self, "chi", as_correlation(self.chi))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ContractError("n_steps must be a positive integer")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ContractError("n_paths must be a positive integer")
        if self.alpha_target is not None:
            a = check_positive(self.alpha_target, "alpha_target")
            if self.dt is not None and abs(self.dt * self.n_steps / 2 - a) > 1e-12 * a:
                raise ContractError("dt and alpha_target disagree")
            object.__setattr__(self, "dt", 2.0 * a / self.n_steps)
        elif self.dt is None:
            object.__setattr__(self, "dt", 1.0)
        check_positive(self.dt, "dt")
        if self.seed is None:
            object.__setattr__(self, "seed", fresh_seed())
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must fit in 64 bits")
        if self.n_batches < 1 or self.n_bins < 2 or self.logit_bins < 2:
            raise ContractError("n_batches, n_bins and logit_bins must be positive")

    @property
    def alpha(self):
        return 0.5 * self.n_steps * self.dt

    @property
    def sigma_step(self):
        """Standard deviation of one walk's increment."""
        return math.sqrt(self.chi.step_var * self.dt)

    @property
    def block_size(self):
        # fixed by the config alone, never by the worker count
        b = 1 << max(8, min(12, int(math.log2(max(1, (1 << 21) // self.n_steps)))))
        return b

    def with_alpha(self, alpha):
        return replace(self, alpha_target=alpha, dt=None)


def sample_increment_pair(rng, chi, dt, size=None):
    """One pair of coupled Brownian increments over a step ``dt``.

    Returns ``(dB1, dB2)`` with ``Var(dB1 - dB2) = g^2 dt`` and
    ``Var(dB1 + dB2) = 2 dt``.
    """
    chi = as_correlation(chi)
    u = rng.standard_normal(size) * math.sqrt(chi.u_var * dt)
    v = rng.standard_normal(size) * math.sqrt(chi.v_var * dt)
    return 0.5 * (v + u), 0.5 * (v - u)


def _block_rng(seed, block):
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def _walk_block(cfg, rng, m, n_steps):
    # (2, m, n_steps) log-prices after each step; x_0 = 0 is implicit
    chi = cfg.chi
    d1, d2 = sample_increment_pair(rng, chi, cfg.dt, size=(m, n_steps))
    drift = -0.5 * cfg.mu * chi.step_var * cfg.dt
    x = np.stack([d1, d2])
    x += drift
    np.cumsum(x, axis=2, out=x)
    if cfg.s0 != 1.0:
        x += math.log(cfg.s0)
    return x


def _log_tau(x, dt, steps, s0=1.0):
    """Log of the trapezoid time integral of exp(x) up to each step in ``steps``."""
    with np.errstate(over="ignore"):
        e = np.exp(x)
    c = np.cumsum(e, axis=2)
    idx = np.asarray(steps) - 1
    # 1/2 e^{x_0} + sum_{n=1}^{k-1} e^{x_n} + 1/2 e^{x_k}, with e^{x_0} = s0
    part = 0.5 * s0 + c[:, :, idx] - 0.5 * e[:, :, idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(part * dt)


@dataclass
class _BlockStats:
    counts: np.ndarray
    logit_counts: np.ndarray
    rejected: np.ndarray
    sum_w: np.ndarray
    sum_w2: np.ndarray
    moments: Optional[np.ndarray] = None


def _run_block(cfg, style, steps, block, m, orders):
    rng = _block_rng(cfg.seed, block)
    k_max = int(max(steps))
    x = _walk_block(cfg, rng, m, k_max)
    if style == "european":
        idx = np.asarray(steps) - 1
        y = x[0][:, idx] - x[1][:, idx]
        log_tau = None
    elif style == "asian":
        log_tau = _log_tau(x, cfg.dt, steps, cfg.s0)
        y = log_tau[0] - log_tau[1]
    else:
        raise ContractError(f"style must be 'european' or 'asian', got {style!r}")
    del x
    n_ck = len(steps)
    counts = np.zeros((n_ck, cfg.n_bins), np.int64)
    lcounts = np.zeros((n_ck, cfg.logit_bins), np.int64)
    rejected = np.zeros(n_ck, np.int64)
    sw = np.zeros(n_ck)
    sw2 = np.zeros(n_ck)
    mom = None
    if orders:
        mom = np.zeros((n_ck, len(orders), 2))
    for j in range(n_ck):
        yj = y[:, j]
        ok = np.isfinite(yj)
        if log_tau is not None:
            ok &= np.isfinite(log_tau[0][:, j]) & np.isfinite(log_tau[1][:, j])
        rejected[j] = m - int(ok.sum())
        yj = yj[ok]
        w = special.expit(yj)
        counts[j] = np.histogram(w, bins=cfg.n_bins, range=(0.0, 1.0))[0]
        lcounts[j] = np.histogram(np.abs(yj), bins=cfg.logit_bins,
                                  range=(0.0, cfg.logit_range))[0]
        sw[j] = w.sum()
        sw2[j] = (w * w).sum()
        if orders:
            lt = np.concatenate([log_tau[0][ok, j], log_tau[1][ok, j]])
            for i, n in enumerate(orders):
                v = np.exp(-n * lt)
                mom[j, i] = v.sum(), (v * v).sum()
    return _BlockStats(counts, lcounts, rejected, sw, sw2, mom)


def _blocks(cfg):
    b = cfg.block_size
    n_full, rest = divmod(cfg.n_paths, b)
    sizes = [b] * n_full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _simulate(cfg, style, steps, threads, orders=None):
    blocks = _blocks(cfg)
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ContractError("threads must be >= 1")

    def work(item):
        return _run_block(cfg, style, steps, item[0], item[1], orders)

    if threads == 1 or len(blocks) == 1:
        results = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    return blocks, results


def _batch_of(blocks, n_batches):
    # contiguous groups of blocks; used for batch-means error bars
    nb = len(blocks)
    return [min(i * n_batches // nb, n_batches - 1) for i in range(nb)]


def simulate_checkpoints(cfg, alphas=None, style="asian", threads=None):
    """Simulate once and histogram the weight at several maturities.

    All maturities share the same paths (common random numbers).  ``dt`` is
    taken from ``cfg``; each requested alpha is rounded to the nearest whole
    step, and the realized values are in each histogram's ``params``.
    Returns a list of :class:`~optrace.core.Histogram`.
    """
    if alphas is None:
        steps = [cfg.n_steps]
    else:
        steps = []
        for a in alphas:
            k = int(round(2.0 * check_positive(a, "alpha") / cfg.dt))
            if k < 1:
                raise ContractError(f"alpha={a} is shorter than one step of dt={cfg.dt}")
            steps.append(k)
    blocks, results = _simulate(cfg, style, steps, threads)
    batch = _batch_of(blocks, cfg.n_batches)
    edges = np.linspace(0.0, 1.0, cfg.n_bins + 1)
    ledges = np.linspace(0.0, cfg.logit_range, cfg.logit_bins + 1)
    out = []
    for j, k in enumerate(steps):
        counts = np.zeros(cfg.n_bins, np.int64)
        lb = np.zeros((cfg.n_batches, cfg.logit_bins), np.int64)
        nb = np.zeros(cfg.n_batches, np.int64)
        rej = 0
        sw = sw2 = 0.0
        for r, bi in zip(results, batch):
            counts += r.counts[j]
            lb[bi] += r.logit_counts[j]
            nb[bi] += int(r.counts[j].sum())
            rej += int(r.rejected[j])
            sw += r.sum_w[j]
            sw2 += r.sum_w2[j]
        n = int(counts.sum())
        params = {
            "style": style, "mu": cfg.mu, "chi": cfg.chi.chi, "alpha": 0.5 * k * cfg.dt,
            "n_steps": k, "dt": cfg.dt, "sum_w": sw, "sum_w2": sw2,
            "logit_batch_counts": lb, "batch_paths": nb,
        }
        out.append(Histogram(edges, counts, n, cfg.seed, rej, params, ledges, lb.sum(axis=0)))
    return out


def run_race(config, style="asian", threads=None):
    """Histogram of the weight at the configured maturity."""
    return simulate_checkpoints(config, None, style, threads)[0]


def sample_mean(hist):
    """Exact sample mean of the weight and its standard error."""
    n = hist.n_paths
    m = hist.params["sum_w"] / n
    var = hist.params["sum_w2"] / n - m * m
    return m, math.sqrt(max(var, 0.0) / n)


def fit_effective_maturity(hist, lo=0.05, hi=0.95):
    """Fit the logit-normal closed form to a weight histogram.

    Bins with centres in ``[lo, hi]`` enter a least-squares fit weighted by
    their inverse binomial variance.  Returns ``(alpha_tilde, residual)``
    where ``residual`` is the L2 misfit relative to the L2 norm of the data
    on those bins.
    """
    from .estimators import EffectiveMaturityFit

    if hist.n_paths < 10_000:
        raise ContractError("need at least 1e4 samples for an effective-maturity fit")
    if np.count_nonzero(hist.counts) <= 2:
        raise DegenerateDistributionError("histogram mass sits in two bins or fewer")
    c = hist.centers
    mask = (c >= lo) & (c <= hi) & (hist.counts > 0)
    p = hist.density()[mask]
    se = hist.density_stderr()[mask]
    est = EffectiveMaturityFit().fit(c[mask], p, sample_weight=1.0 / se**2)
    resid = float(np.linalg.norm(p - est.predict(c[mask])) / np.linalg.norm(p))
    return est.alpha_, resid


def sample_tau_moments(config, orders=(1, 2), threads=None):
    """Negative moments ``E(tau^-n)`` of the simulated time integral.

    ``tau`` is the trapezoid integral of ``exp(x)`` over ``[0, N dt]``; both
    walks contribute samples.  Standard errors come from batch means over
    ``config.n_batches`` contiguous groups of blocks.

    Returns ``{n: (estimate, stderr)}``; ``n = 0`` gives ``(1.0, 0.0)``.
    """
    orders = tuple(orders)
    pos = [n for n in orders if n != 0]
    res = {}
    if pos:
        blocks, results = _simulate(config, "asian", [config.n_steps], threads, orders=pos)
        batch = _batch_of(blocks, config.n_batches)
        nb = config.n_batches
        sums = np.zeros((nb, len(pos)))
        cnt = np.zeros(nb)
        for r, bi in zip(results, batch):
            sums[bi] += r.moments[0, :, 0]
            cnt[bi] += 2 * int(r.counts[0].sum())
        used = cnt > 0
        means = sums[used] / cnt[used][:, None]
        total = sums.sum(axis=0) / cnt.sum()
        k = int(used.sum())
        se = means.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.full(len(pos), np.nan)
        for i, n in enumerate(pos):
            res[n] = (float(total[i]), float(se[i]))
    for n in orders:
        if n == 0:
            res[0] = (1.0, 0.0)
    return {n: res[n] for n in orders}


def logit_curvature(edges, counts, degree=3):
    """Centre-curvature indicator from a histogram of ``|logit(w)|``.

    Fits ``log p(y) = c0 + c1 y^2 + ... + c_degree y^(2 degree)`` by weighted
    least squares (weights = counts, empty bins dropped) and returns
    ``(1 + 4 c1, stderr)``.  The weight density has positive curvature at
    w = 1/2 exactly when ``1 + 4 c1 > 0``.
    """
    edges = np.asarray(edges, float)
    counts = np.asarray(counts, float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    width = np.diff(edges)
    m = counts > 0
    if m.sum() < degree + 2:
        raise DegenerateDistributionError("too few occupied logit bins for the curvature fit")
    ly = np.log(counts[m] / width[m])
    A = np.stack([mid[m] ** (2 * k) for k in range(degree + 1)], axis=1)
    W = counts[m]
    cov = np.linalg.inv(A.T @ (A * W[:, None]))
    coef = cov @ (A.T @ (W * ly))
    return 1.0 + 4.0 * coef[1], 4.0 * math.sqrt(cov[1, 1])


def _pool_small(expected, observed, min_expected):
    # merge neighbouring bins left to right until each expected count is large enough
    e_out, o_out = [], []
    e_acc = o_acc = 0.0
    for e, o in zip(expected, observed):
        e_acc += e
        o_acc += o
        if e_acc >= min_expected:
            e_out.append(e_acc)
            o_out.append(o_acc)
            e_acc = o_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if e_out:
            e_out[-1] += e_acc
            o_out[-1] += o_acc
        else:
            e_out.append(e_acc)
            o_out.append(o_acc)
    return np.array(e_out), np.array(o_out)


def chi_square_gof(hist, cdf, min_expected=5.0):
    """Pearson goodness of fit of a weight histogram against a CDF on [0, 1].

    Expected counts are the CDF increments over the bin edges times the
    number of accepted paths; neighbouring bins are pooled until each holds
    at least ``min_expected``.  Returns ``(statistic, dof, p_value)``.
    """
    probs = np.diff(np.asarray(cdf(hist.bin_edges), dtype=float))
    if np.any(probs < -1e-15):
        raise ContractError("cdf must be non-decreasing")
    probs = np.clip(probs, 0.0, None)
    n = hist.n_paths
    exp_c = probs / probs.sum() * n
    e, o = _pool_small(exp_c, hist.counts.astype(float), min_expected)
    stat = float(np.sum((o - e) ** 2 / e))
    dof = len(e) - 1
    if dof < 1:
        raise DegenerateDistributionError("fewer than two bins after pooling")
    return stat, dof, float(stats.chi2.sf(stat, dof))
