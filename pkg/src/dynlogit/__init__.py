"""Conditional maximum likelihood for fixed-effects dynamic panel logit models."""

from .errors import *  # noqa: F401,F403
from .index_sets import (
    ConditionalBlock,
    Group,
    GroupSystem,
    beta_only_systems,
    blocks_for_individual,
    build_beta_only_systems,
    build_group_system,
    cox_admissible_set,
    is_admissible,
    maximal_admissible_sets,
)
from .inference import (
    EstimateResult,
    MomentCheck,
    MomentSystem,
    arp_group_system,
    arp_score_system,
    beta_only_system,
    cox_system,
    fit_arp,
    fit_beta_only,
    fit_cox,
    fit_mnl,
    fit_pooled_logit,
    gmm_estimate,
    hessian_vcov,
    maximize,
    moment_diagnostics,
    sandwich_vcov,
)
from .likelihood_binary import (
    enumerate_lambda,
    loglik_arp,
    loglik_beta_only,
    loglik_cox,
    loglik_t3_closed_form,
)
from .likelihood_mnl import loglik_mnl, mnl_features, mnl_identified_dim, mnl_lambda
from .panel_data import (
    Diagnostic,
    MnlPanelDataset,
    MnlParameterVector,
    PanelDataset,
    ParameterVector,
    check,
    load_csv,
    validate,
    write_csv,
)
from .simulate import McConfig, McSummary, SimDesign, run_monte_carlo, simulate_panel

__version__ = "0.1.0"
