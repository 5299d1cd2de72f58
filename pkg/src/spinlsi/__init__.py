"""Susceptibility-driven log-Sobolev bounds for ferromagnetic Ising Glauber
dynamics: exact small-system computation, flow-based proof-object
verification, and Monte Carlo scaling studies."""

from .exact import (ExactEnsemble, SusceptibilityEvaluator, build_ensemble,
                    correlation_batch, expectation, magnetization,
                    susceptibility, susceptibility_rows, truncated_correlation,
                    two_point_matrix, two_point_spectral_radius)
from .flow import (BoundReport, CovarianceSchedule, NonConvergenceError,
                   criterion_bound, criterion_slack_batch, lsi_bound,
                   meanfield_chi, meanfield_corollary, potential_gradient,
                   potential_hessian, renormalized_potential,
                   verify_convolution, verify_criterion_matrix_inequality,
                   verify_decomposition, verify_entropy_decomposition)
from .glauber import (GeneratorMatrix, LsiEstimate, build_generator,
                      conditional_gap_min, dirichlet_form, entropy,
                      entropy_decay_trace, estimate_inverse_lsi, lsi_ratio,
                      spectral_gap)
from .inequalities import (TheoremCheck, ViolationReport, check_field_monotonicity,
                           check_fkg, check_pf_chain, check_theorem,
                           field_battery)
from .mcmc import (ChainConfig, HeatBathSampler, SusceptibilityEstimate,
                   estimate_susceptibility, heat_bath_sweep, scaling_study)
from .model import (CouplingMatrix, ModelSpec, NormalizationRecord,
                    build_coupling, load_model_spec, normalize_coupling,
                    save_model_spec, spectral_radius)

__version__ = "0.1.0"
