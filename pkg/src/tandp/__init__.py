"""Privacy accounting and constant-TAN planning for DP-SGD."""

from tandp.accountant import (DEFAULT_ORDERS, DomainError, PrivacyParams,
                              RdpAccount, epsilon_rdp, ratio_diagnostic,
                              rdp_of_step, validity_check)
from tandp.planner import (InfeasibleError, ReferenceConfig, ScaledConfig,
                           ScalingPlan, batch_scaled, data_scaled,
                           privacy_wall_sweep, step_scaled)
from tandp.tan import TanSummary, eps_tan, eta, gdp_mu, summarize, tcdp_omega

__version__ = "0.1.0"
