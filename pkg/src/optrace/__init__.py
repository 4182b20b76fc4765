"""Weight densities of two identically distributed Black-Scholes options.

Exact, quadrature and Monte Carlo densities of the weight of one option in
a pair, European and Asian style, with and without coupled increments, and
the unimodal to bimodal transition of those densities.
"""

__version__ = "0.1.0"

from .errors import (ContractError, DegenerateDistributionError, DomainError, NumericalError,
                     OptraceError)
from .core import (CorrelationScale, DensityCurve, EffectiveMaturity, Histogram, ModalityReport,
                   ModelParams, PhaseCell, PhaseDiagram, alpha_from_time, as_correlation,
                   interior_grid, make_params)
from .analytic import (asian_mu0_weight_density, asian_weight_asymptotic,
                       correlated_european_weight_density, critical_maturity_european,
                       effective_alpha, european_weight_cdf, european_weight_density,
                       limiting_beta_density)
from .psi import (PsiEvaluation, TabulatedPsi, psi_approx_negative_mu, psi_discrete_branch,
                  psi_exact_negative_mu, psi_infinity, psi_large_tau_asymptotic,
                  psi_lognormal_tail, theta)
from .convolve import (WeightConvolver, asian_weight_density_negative_mu, beta_limit_from_psi,
                       weight_density_from_psi)
from .montecarlo import (WalkConfig, chi_square_gof, fit_effective_maturity, run_race,
                         sample_increment_pair, sample_tau_moments, simulate_checkpoints)
from .modality import (CriticalEstimate, center_curvature, chi_critical, classify,
                       critical_maturity, critical_maturity_mc, phase_diagram, run_cell)
from .estimators import EffectiveMaturityFit
