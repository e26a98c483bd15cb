"""Lyapunov exponents and intermittency diagnostics for the discrete
parabolic Anderson model with drift."""

from .annealed import (AnnealedCurve, FiniteMeasure, MarkovMeasure,
                       TransferOperator, continuity_at_zero,
                       entropy_chain_identity, intermittency_scan,
                       L_of_product, lambda_annealed,
                       lambda_annealed_maxdrift, lp_sup_tilted,
                       lp_sup_transfer, measure_from_model, product_rate,
                       relative_entropy)
from .errors import (BeyondCritical, ConfigError, DivergentFunctional,
                     DriftPamError, NumericalFailure)
from .hitting import (HittingProfile, free_hitting_weight,
                      free_hitting_weight_derivative, hitting_profile)
from .model import (BetaCritical, EnvironmentWindow, ModelParams,
                    PotentialModel, beta_cr, expectation, normalize,
                    sample_environment, shift_environment, site_uniforms)
from .quenched import (LFunctionEstimate, LyapunovResult, PhaseReport,
                       estimate_L, lambda_quenched,
                       lambda_quenched_variational, legendre_lambda_star,
                       optimal_speed)
from .simulate import (EndpointField, GibbsSpeed, McEstimate, SlopeEstimate,
                       SolutionField, annealed_moment, annealed_moments,
                       branching_expectation_check, endpoint_field,
                       feynman_kac_mc, gibbs_speed, quenched_slope,
                       solve_pde, time_reversal_check)

__version__ = "0.1.0"
