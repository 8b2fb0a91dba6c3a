"""RDP analysis of the Poisson-subsampled Gaussian mechanism used by DP-SGD.

Public interface:
  rdp_of_step(q, sigma, alpha)      per-step RDP at one integer order.
  epsilon_rdp(params, orders)       composes S steps and converts to (eps, delta).
  ratio_diagnostic(q, sigma, alpha) RDP relative to its large-noise approximation.
  validity_check(q, sigma, alpha)   transition criterion for the approximation.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

# Largest exponent we accept before exp() is meaningless even in log-space.
_MAX_EXPONENT = 1e300
_Q_CLAMP_TOL = 1e-12

DEFAULT_ORDERS: tuple[int, ...] = tuple(range(2, 513)) + (768, 1024, 1536, 2048)


class DomainError(ValueError):
    """Raised when an input lies outside the domain of an accounting function.

    ``field`` names the offending parameter so callers can report it.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class PrivacyParams:
    """Accounting inputs of one DP-SGD run.

    Attributes:
      dataset_size: number of training samples N.
      batch_size: expected batch size B; the sampling rate is q = B / N.
      steps: number of noisy gradient steps S.
      noise_multiplier: sigma, noise std in units of the clipping norm.
      delta: target delta of the (eps, delta) guarantee.
    """

    dataset_size: int
    batch_size: int
    steps: int
    noise_multiplier: float
    delta: float

    def __post_init__(self):
        for name in ("dataset_size", "batch_size", "steps"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(name, f"must be an integer, got {value!r}")
            if value < 1:
                raise DomainError(name, f"must be >= 1, got {value}")
        if self.batch_size > self.dataset_size:
            raise DomainError(
                "batch_size",
                f"batch size {self.batch_size} exceeds dataset size {self.dataset_size}")
        if not (math.isfinite(self.noise_multiplier) and self.noise_multiplier > 0):
            raise DomainError("noise_multiplier",
                              f"must be > 0, got {self.noise_multiplier}")
        if not 0 < self.delta < 1:
            raise DomainError("delta", f"must lie in (0, 1), got {self.delta}")

    @property
    def sampling_rate(self) -> float:
        return _check_q(self.batch_size / self.dataset_size)

    q = sampling_rate

    def replace(self, **changes) -> "PrivacyParams":
        fields = dict(dataset_size=self.dataset_size, batch_size=self.batch_size,
                      steps=self.steps, noise_multiplier=self.noise_multiplier,
                      delta=self.delta)
        fields.update(changes)
        return PrivacyParams(**fields)


@dataclass(frozen=True)
class RdpAccount:
    """Composed RDP curve and the (eps, delta) guarantee it implies.

    ``per_order`` holds ``(alpha, S * g_alpha)`` pairs.  ``grid_truncated`` is
    set when the minimizing order is the largest order of the grid, i.e. the
    reported epsilon may be loose.
    """

    per_order: tuple[tuple[int, float], ...]
    epsilon: float
    best_order: int
    delta: float
    grid_truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "best_order": self.best_order,
            "delta": self.delta,
            "grid_truncated": self.grid_truncated,
        }


def _check_q(q: float) -> float:
    if not math.isfinite(q) or q < 0:
        raise DomainError("q", f"sampling rate must lie in [0, 1], got {q}")
    if q > 1:
        if q - 1 > _Q_CLAMP_TOL:
            raise DomainError("q", f"sampling rate must lie in [0, 1], got {q}")
        q = 1.0
    return q


def _check_sigma(sigma: float) -> None:
    if not (math.isfinite(sigma) and sigma > 0):
        raise DomainError("sigma", f"must be > 0, got {sigma}")


def _check_alpha(alpha) -> int:
    if isinstance(alpha, bool) or int(alpha) != alpha:
        raise DomainError("alpha", f"must be an integer order, got {alpha!r}")
    alpha = int(alpha)
    if alpha < 2:
        raise DomainError("alpha", f"must be >= 2, got {alpha}")
    return alpha


def check_orders(orders: Sequence[int]) -> tuple[int, ...]:
    """Validates an order grid: non-empty, integers >= 2, strictly increasing."""
    orders = tuple(_check_alpha(a) for a in orders)
    if not orders:
        raise DomainError("orders", "grid must be non-empty")
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise DomainError("orders", "grid must be strictly increasing")
    return orders


def _log_expm1(x: np.ndarray) -> np.ndarray:
    # log(exp(x) - 1) for x > 0 without overflow.
    big = x > 30.0
    out = np.empty_like(x)
    out[big] = x[big] + np.log1p(-np.exp(-x[big]))
    out[~big] = np.log(np.expm1(x[~big]))
    return out


def _logsumexp(x: np.ndarray) -> float:
    top = x.max()
    return float(top + np.log(np.exp(x - top).sum()))


def rdp_of_step(q: float, sigma: float, alpha: int) -> float:
    """Computes RDP of one step of the sampled Gaussian mechanism.

    Evaluates, for integer alpha,

      g = 1/(alpha-1) * log sum_k binom(alpha, k) (1-q)^(alpha-k) q^k
                                  exp(k(k-1) / (2 sigma^2))

    in log-space.  Because the binomial weights sum to one and the k = 0, 1
    terms carry exp(0) = 1, the sum is written as 1 + T with

      T = sum_{k>=2} binom(alpha, k) (1-q)^(alpha-k) q^k expm1(k(k-1)/(2 sigma^2)),

    whose terms are all positive.  log T is a plain log-sum-exp and the result
    is log1p(T) / (alpha - 1), which keeps full relative precision when g is
    tiny (small q, large sigma).

    Args:
      q: sampling rate in [0, 1].
      sigma: noise multiplier.
      alpha: integer Renyi order >= 2.

    Returns:
      A finite, non-negative float.

    Raises:
      DomainError: on out-of-range inputs, or when alpha(alpha-1)/(2 sigma^2)
        is beyond the representable exponent range.
    """
    q = _check_q(q)
    _check_sigma(sigma)
    alpha = _check_alpha(alpha)

    top_exponent = alpha * (alpha - 1) / (2.0 * sigma * sigma)
    if not math.isfinite(top_exponent) or top_exponent > _MAX_EXPONENT:
        raise DomainError(
            "sigma", f"alpha(alpha-1)/(2 sigma^2) = {top_exponent} overflows")

    if q == 0:
        return 0.0
    if q == 1:
        # Plain Gaussian mechanism.
        return alpha / (2.0 * sigma * sigma)

    k = np.arange(2, alpha + 1, dtype=np.float64)
    log_terms = (gammaln(alpha + 1) - gammaln(k + 1) - gammaln(alpha - k + 1)
                 + k * math.log(q) + (alpha - k) * math.log1p(-q)
                 + _log_expm1(k * (k - 1) / (2.0 * sigma * sigma)))
    log_t = _logsumexp(log_terms)
    return max(float(np.logaddexp(0.0, log_t)) / (alpha - 1), 0.0)


def compute_rdp(q: float, sigma: float, steps: int,
                orders: Sequence[int] = DEFAULT_ORDERS) -> np.ndarray:
    """Returns S * g_alpha for every order in ``orders``."""
    orders = check_orders(orders)
    return np.array([steps * rdp_of_step(q, sigma, a) for a in orders])


def epsilon_rdp(params: PrivacyParams,
                orders: Sequence[int] = DEFAULT_ORDERS) -> RdpAccount:
    """Converts the composed RDP of ``params.steps`` DP-SGD steps to (eps, delta).

    eps = min over orders of S * g_alpha + log(1/delta) / (alpha - 1).
    Ties go to the smallest order.
    """
    orders = check_orders(orders)
    rdp = compute_rdp(params.q, params.noise_multiplier, params.steps, orders)
    alphas = np.asarray(orders, dtype=np.float64)
    eps = rdp + math.log(1.0 / params.delta) / (alphas - 1)
    best = int(np.argmin(eps))
    return RdpAccount(
        per_order=tuple(zip(orders, (float(v) for v in rdp))),
        epsilon=float(eps[best]),
        best_order=orders[best],
        delta=params.delta,
        grid_truncated=best == len(orders) - 1,
    )


def ratio_diagnostic(q: float, sigma: float, alpha: int) -> float:
    """Ratio g_alpha / (alpha * eta_step^2) with eta_step = q / (sqrt(2) sigma).

    Close to 1 where the TAN approximation of the budget is accurate.
    """
    q = _check_q(q)
    if q == 0:
        raise DomainError("q", "ratio is undefined for q = 0")
    _check_sigma(sigma)
    alpha = _check_alpha(alpha)
    eta_step_sq = q * q / (2.0 * sigma * sigma)
    return rdp_of_step(q, sigma, alpha) / (alpha * eta_step_sq)


def validity_check(q: float, sigma: float, alpha: int) -> bool:
    """True when q * alpha * exp(alpha / (2 sigma^2)) < 1.

    Below this threshold the per-step RDP behaves like O(alpha q^2 / sigma^2).
    Evaluated in log-space so large orders do not overflow.
    """
    q = _check_q(q)
    _check_sigma(sigma)
    alpha = _check_alpha(alpha)
    if q == 0:
        return True
    return math.log(q) + math.log(alpha) + alpha / (2.0 * sigma * sigma) < 0.0
