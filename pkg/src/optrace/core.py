"""Shared parameter types and result containers.

Every container here is immutable after construction so it can be handed to
concurrent workers without copying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy import integrate

from ._validation import check_nonnegative, check_positive
from .errors import ContractError, DomainError

#: Encoded correlation scale for two independent noise sources.
INDEPENDENT = math.inf

DEFAULT_GRID_SIZE = 2001


@dataclass(frozen=True)
class ModelParams:
    """Black-Scholes parameters shared by both assets.

    ``mu = 1 - 2 omega / sigma**2`` is the dimensionless drift index.  The
    initial price ``s0`` is carried along for bookkeeping only: weight
    densities are scale free.
    """

    sigma: float
    mu: float
    omega: float
    s0: float = 1.0

    def __post_init__(self):
        check_positive(self.sigma, "sigma")
        check_positive(self.s0, "s0")
        implied = 1.0 - 2.0 * self.omega / self.sigma**2
        if not math.isclose(implied, self.mu, rel_tol=1e-12, abs_tol=1e-12):
            raise ContractError(
                f"inconsistent drift: mu={self.mu} but 1 - 2*omega/sigma^2 = {implied}"
            )


def make_params(sigma, *, mu=None, omega=None, s0=1.0) -> ModelParams:
    """Build :class:`ModelParams` from either the drift index or the drift rate.

    Exactly one of ``mu`` and ``omega`` must be given.

    >>> make_params(1.0, omega=0.5).mu
    0.0
    >>> make_params(1.0, mu=-1.7, s0=100).omega
    1.35
    """
    sigma = check_positive(sigma, "sigma")
    check_positive(s0, "s0")
    if (mu is None) == (omega is None):
        raise ContractError("give exactly one of mu and omega")
    if mu is None:
        omega = float(omega)
        mu = 1.0 - 2.0 * omega / sigma**2
    else:
        mu = float(mu)
        omega = 0.5 * sigma**2 * (1.0 - mu)
    if not (math.isfinite(mu) and math.isfinite(omega)):
        raise DomainError("mu and omega must be finite")
    return ModelParams(sigma=sigma, mu=mu, omega=omega, s0=float(s0))


@dataclass(frozen=True)
class EffectiveMaturity:
    """Dimensionless maturity ``alpha = sigma**2 T / 2``."""

    alpha: float
    T: Optional[float] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        check_nonnegative(self.alpha, "alpha")

    def to_time(self, sigma=None) -> float:
        sigma = self.sigma if sigma is None else sigma
        if sigma is None:
            raise ContractError("no volatility recorded; pass sigma")
        sigma = check_positive(sigma, "sigma")
        return 2.0 * self.alpha / sigma**2

    def __float__(self):
        return float(self.alpha)


def alpha_from_time(sigma, T) -> EffectiveMaturity:
    sigma = check_positive(sigma, "sigma")
    T = check_nonnegative(T, "T")
    return EffectiveMaturity(alpha=0.5 * sigma**2 * T, T=T, sigma=sigma)


@dataclass(frozen=True)
class CorrelationScale:
    """Spring-coupling scale between the two noise increments.

    ``chi = INDEPENDENT`` (``math.inf``) is the uncoupled limit and is handled
    exactly rather than as a large float.
    """

    chi: float = INDEPENDENT

    def __post_init__(self):
        chi = self.chi
        if isinstance(chi, bool) or not isinstance(chi, (int, float, np.floating)):
            raise DomainError(f"chi must be a real number, got {chi!r}")
        if math.isnan(chi) or chi <= 0:
            raise DomainError(f"chi must be in (0, inf], got {chi!r}")
        object.__setattr__(self, "chi", float(chi))

    @property
    def independent(self) -> bool:
        return math.isinf(self.chi)

    @property
    def inv_chi(self) -> float:
        return 0.0 if self.independent else 1.0 / self.chi

    @property
    def g_sq(self) -> float:
        """Variance of ``dB1 - dB2`` per unit time, ``2 chi^2 / (2 + chi^2)``."""
        if self.independent:
            return 2.0
        r = self.inv_chi
        return 2.0 / (1.0 + 2.0 * r * r)

    @property
    def step_var(self) -> float:
        """Marginal variance of each increment per unit time."""
        if self.independent:
            return 1.0
        r2 = self.inv_chi**2
        return (1.0 + r2) / (1.0 + 2.0 * r2)

    @property
    def u_var(self) -> float:
        return self.g_sq

    @property
    def v_var(self) -> float:
        return 2.0

    def critical_factor(self) -> float:
        """Ratio ``(2 + chi^2) / chi^2`` by which coupling stretches maturities."""
        return 2.0 / self.g_sq


def as_correlation(chi) -> CorrelationScale:
    if isinstance(chi, CorrelationScale):
        return chi
    if chi is None:
        return CorrelationScale()
    return CorrelationScale(chi)


def interior_grid(n=DEFAULT_GRID_SIZE) -> np.ndarray:
    """Uniform grid of ``n`` points strictly inside (0, 1), symmetric about 1/2."""
    if n < 3:
        raise ContractError("grid needs at least 3 points")
    i = np.arange(1, n + 1, dtype=float)
    grid = i / (n + 1)
    # force exact mirror symmetry: grid[k] + grid[n-1-k] == 1
    half = n // 2
    grid[n - half:] = 1.0 - grid[:half][::-1]
    if n % 2:
        grid[half] = 0.5
    return grid


@dataclass(frozen=True)
class DensityCurve:
    """A weight density tabulated on an open-interval grid.

    ``tail_mass`` is the probability outside ``[tail_cut, 1 - tail_cut]``
    (``tail_cut`` defaults to ``grid[0]``) when the producer knows it in
    closed form; otherwise the end segments are integrated by treating the
    density as constant there.  Producers set ``tail_cut`` inside the grid
    when the density is too steep near the ends for the grid to resolve.
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)
    tail_mass: Optional[float] = None
    stderr: Optional[np.ndarray] = None
    tail_cut: Optional[float] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ContractError("grid and values must be 1-D arrays of equal length")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ContractError("grid must be strictly increasing")
        if grid[0] <= 0.0 or grid[-1] >= 1.0:
            raise ContractError("grid must lie strictly inside (0, 1)")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ContractError("density values must be finite and >= 0")
        if self.kind not in ("analytic", "quadrature", "mc", "limiting"):
            raise ContractError(f"unknown curve kind {self.kind!r}")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            se = np.asarray(self.stderr, dtype=float)
            se.setflags(write=False)
            object.__setattr__(self, "stderr", se)

    @property
    def norm_estimate(self) -> float:
        g, v = self.grid, self.values
        if self.kind == "mc":
            # bin-centred histogram density: midpoint rule is exact
            widths = self.params.get("bin_width")
            if widths is not None:
                return float(np.sum(v) * widths)
        if self.tail_mass is not None:
            cut = g[0] if self.tail_cut is None else self.tail_cut
            m = (g >= cut - 1e-15) & (g <= 1.0 - cut + 1e-15)
            return float(integrate.simpson(v[m], x=g[m])) + float(self.tail_mass)
        inner = float(integrate.simpson(v, x=g))
        return inner + float(v[0] * g[0] + v[-1] * (1.0 - g[-1]))

    def symmetry_defect(self) -> float:
        """Largest ``|p(w) - p(1 - w)|`` over mirror-paired grid points."""
        if not np.allclose(self.grid + self.grid[::-1], 1.0, rtol=0, atol=1e-12):
            raise ContractError("grid is not mirror symmetric about 1/2")
        return float(np.max(np.abs(self.values - self.values[::-1])))

    def symmetrized(self) -> "DensityCurve":
        v = 0.5 * (self.values + self.values[::-1])
        se = None
        if self.stderr is not None:
            se = 0.5 * np.sqrt(self.stderr**2 + self.stderr[::-1] ** 2)
        return DensityCurve(self.grid, v, self.kind, dict(self.params), self.tail_mass, se,
                            self.tail_cut)

    def scaled(self, factor: float) -> "DensityCurve":
        se = None if self.stderr is None else self.stderr * factor
        return DensityCurve(self.grid, self.values * factor, self.kind,
                            dict(self.params), self.tail_mass, se, self.tail_cut)

    def __call__(self, w):
        return np.interp(w, self.grid, self.values)


@dataclass(frozen=True)
class Histogram:
    """Bin counts of simulated weights over [0, 1].

    The optional ``logit_edges``/``logit_counts`` pair histograms ``|ln(w/(1-w))|``
    and feeds the curvature estimator used for critical maturities.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    n_paths: int
    seed: Optional[int] = None
    rejected: int = 0
    params: dict = field(default_factory=dict)
    logit_edges: Optional[np.ndarray] = None
    logit_counts: Optional[np.ndarray] = None
    bandwidth: Optional[float] = None

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.shape != (edges.size - 1,):
            raise ContractError("need len(bin_edges) == len(counts) + 1")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ContractError("bin edges must increase from 0 to 1")
        if int(counts.sum()) != int(self.n_paths):
            raise ContractError(
                f"counts sum to {int(counts.sum())}, expected n_paths={self.n_paths}"
            )
        for arr in (edges, counts):
            arr.setflags(write=False)
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        if self.logit_counts is not None:
            lc = np.asarray(self.logit_counts, dtype=np.int64)
            le = np.asarray(self.logit_edges, dtype=float)
            lc.setflags(write=False)
            le.setflags(write=False)
            object.__setattr__(self, "logit_counts", lc)
            object.__setattr__(self, "logit_edges", le)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def density(self) -> np.ndarray:
        return self.counts / (self.n_paths * self.widths)

    def density_stderr(self) -> np.ndarray:
        """Binomial standard error of each bin's density estimate."""
        p = self.counts / self.n_paths
        return np.sqrt(p * (1 - p) / self.n_paths) / self.widths

    def mean(self) -> tuple[float, float]:
        """Bin-centre estimate of E[w] and its standard error."""
        c, p = self.centers, self.counts / self.n_paths
        m = float(np.sum(c * p))
        var = float(np.sum(c * c * p)) - m * m
        return m, math.sqrt(max(var, 0.0) / self.n_paths)

    def to_curve(self) -> DensityCurve:
        widths = self.widths
        uniform = np.allclose(widths, widths[0])
        params = dict(self.params)
        params.update(n_paths=self.n_paths, seed=self.seed)
        if uniform:
            params["bin_width"] = float(widths[0])
        return DensityCurve(self.centers, self.density(), "mc", params,
                            stderr=self.density_stderr())


@dataclass(frozen=True)
class ModalityReport:
    kind: str  # unimodal | uniform_plateau | bimodal_M | bimodal_U
    mode_locations: tuple
    center_curvature: float
    details: dict = field(default_factory=dict)

    KINDS = ("unimodal", "uniform_plateau", "bimodal_M", "bimodal_U")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ContractError(f"unknown modality class {self.kind!r}")

    @property
    def bimodal(self) -> bool:
        return self.kind.startswith("bimodal")


@dataclass(frozen=True)
class PhaseCell:
    """Outcome of one (mu, 1/chi) cell of the phase diagram.

    ``verdict`` is ``"transition"``, ``"no transition"`` or ``"inconclusive"``.
    ``trajectory`` lists ``(alpha, n_steps, criterion, class)`` per checkpoint.
    """

    mu: float
    inv_chi: float
    verdict: str
    alpha_c: Optional[float]
    n_c: Optional[int]
    final_class: str
    converged: bool
    trajectory: tuple = ()
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PhaseDiagram:
    mu_grid: tuple
    inv_chi_grid: tuple
    cells: dict  # (mu, inv_chi) -> PhaseCell
    meta: dict = field(default_factory=dict)

    def cell(self, mu, inv_chi) -> PhaseCell:
        return self.cells[(float(mu), float(inv_chi))]

    def row(self, mu) -> list:
        return [self.cell(mu, r) for r in self.inv_chi_grid]

    def boundary(self) -> dict[float, Optional[tuple]]:
        """Per 1/chi, the mu interval that separates transition from none.

        Returns ``{inv_chi: (mu_transition_max, mu_none_min)}`` or ``None`` when
        the column does not contain both verdicts.
        """
        out: dict[float, Any] = {}
        for r in self.inv_chi_grid:
            trans = [m for m in self.mu_grid if self.cell(m, r).verdict == "transition"]
            none = [m for m in self.mu_grid if self.cell(m, r).verdict == "no transition"]
            out[r] = (max(trans), min(none)) if trans and none else None
        return out
