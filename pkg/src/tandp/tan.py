"""Closed-form Total Amount of Noise (TAN) quantities.

eta^2 = 1 / Sigma^2 = q^2 S / (2 sigma^2) is the per-sample signal-to-noise
ratio of a DP-SGD run.  When sigma is large enough the RDP budget depends on
(q, sigma, S) only through eta, which gives

    eps_tan(eta) = eta^2 + 2 eta sqrt(log(1/delta)).

eps_tan is an approximation meant for planning; the reported budget should
come from ``accountant.epsilon_rdp``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from tandp.accountant import DomainError, PrivacyParams


@dataclass(frozen=True)
class TanSummary:
    eta: float
    eta_step: float
    total_noise: float
    eps_tan: float
    gdp_mu: float
    gdp_mu_limit: float  # sqrt(2) * eta, the large-sigma value of gdp_mu
    tcdp_omega: float
    delta: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise DomainError("delta", f"must lie in (0, 1), got {delta}")


def eta_step(params: PrivacyParams) -> float:
    """Per-step ratio q / (sqrt(2) sigma)."""
    return params.q / (math.sqrt(2.0) * params.noise_multiplier)


def eta(params: PrivacyParams) -> float:
    """Individual signal-to-noise ratio sqrt(q^2 S / (2 sigma^2))."""
    return params.q * math.sqrt(params.steps / 2.0) / params.noise_multiplier


def eps_tan(eta: float, delta: float) -> float:
    """TAN approximation of the privacy budget (natural log)."""
    if not (math.isfinite(eta) and eta >= 0):
        raise DomainError("eta", f"must be >= 0, got {eta}")
    _check_delta(delta)
    return eta * eta + 2.0 * eta * math.sqrt(math.log(1.0 / delta))


def gdp_mu(params: PrivacyParams) -> float:
    """CLT Gaussian-DP parameter q sqrt(S (exp(1/sigma^2) - 1)).

    Tends to sqrt(2) * eta as sigma grows.
    """
    sigma = params.noise_multiplier
    return params.q * math.sqrt(params.steps * math.expm1(1.0 / (sigma * sigma)))


def tcdp_omega(eta: float, delta: float) -> float:
    """Smallest omega with log(1/delta) <= (omega - 1)^2 eta^2."""
    if not (math.isfinite(eta) and eta > 0):
        raise DomainError("eta", f"must be > 0, got {eta}")
    _check_delta(delta)
    return 1.0 + math.sqrt(math.log(1.0 / delta)) / eta


def summarize(params: PrivacyParams) -> TanSummary:
    e = eta(params)
    return TanSummary(
        eta=e,
        eta_step=eta_step(params),
        total_noise=1.0 / e,
        eps_tan=eps_tan(e, params.delta),
        gdp_mu=gdp_mu(params),
        gdp_mu_limit=math.sqrt(2.0) * e,
        tcdp_omega=tcdp_omega(e, params.delta),
        delta=params.delta,
    )
