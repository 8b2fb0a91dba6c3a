"""Constant-TAN training configurations.

Three ways of moving away from a reference run while keeping the budget
(approximately) fixed:

* batch-scaled: (B, sigma) -> (B', sigma B'/B) at fixed S.  eta_step is kept,
  so the training dynamics are comparable, and compute shrinks by B'/B.  The
  epsilon of such a configuration is not a privacy claim: it is a cheap
  simulation of the reference.
* step-scaled: (B, S) -> (B sqrt(S/S'), S') at fixed sigma, keeping eta.  The
  learning rate is scaled as 1/S.
* data-scaled: N -> beta N and delta -> delta / beta at fixed (B, sigma, S),
  keeping the global ratio N * eta.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from tandp import tan
from tandp.accountant import (DEFAULT_ORDERS, DomainError, PrivacyParams,
                              epsilon_rdp, validity_check)

BATCH_SCALED = "batch-scaled"
STEP_SCALED = "step-scaled"
DATA_SCALED = "data-scaled"

# Denominator used to turn a requested sampling rate into an integer (B, N).
SWEEP_DATASET_SIZE = 10**9


class InfeasibleError(DomainError):
    """The requested target cannot be realised (e.g. batch larger than N)."""


@dataclass(frozen=True)
class ReferenceConfig:
    privacy: PrivacyParams
    learning_rate: float

    def __post_init__(self):
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise DomainError("learning_rate",
                              f"must be > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class ScaledConfig:
    """One derived configuration.

    ``compute_factor`` is the number of per-sample gradients relative to the
    reference, B' S' / (B S), kept as an exact fraction.  ``exact_batch`` is the
    real-valued batch size before rounding (step-scaled only).
    """

    privacy: PrivacyParams
    learning_rate: float
    compute_factor: Fraction
    epsilon: float
    eps_tan: float
    kind: str
    eta: float
    eta_step: float
    global_snr: float
    best_order: int
    exact_batch: float | None = None
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        p = self.privacy
        return {
            "kind": self.kind,
            "N": p.dataset_size,
            "B": p.batch_size,
            "S": p.steps,
            "sigma": p.noise_multiplier,
            "delta": p.delta,
            "lr": self.learning_rate,
            "compute_factor": float(self.compute_factor),
            "eps_rdp": self.epsilon,
            "best_order": self.best_order,
            "eps_tan": self.eps_tan,
            "eta": self.eta,
            "eta_step": self.eta_step,
            "global_snr": self.global_snr,
            "exact_batch": self.exact_batch,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ScalingPlan:
    reference: ReferenceConfig
    configs: tuple[ScaledConfig, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        ref = _scaled(self.reference, self.reference.privacy,
                      self.reference.learning_rate, "reference")
        return {"reference": ref.to_dict(),
                "configs": [c.to_dict() for c in self.configs]}


def _scaled(ref: ReferenceConfig, privacy: PrivacyParams, lr: float, kind: str,
            exact_batch: float | None = None,
            notes: tuple[str, ...] = ()) -> ScaledConfig:
    account = epsilon_rdp(privacy)
    e = tan.eta(privacy)
    rp = ref.privacy
    factor = Fraction(privacy.batch_size * privacy.steps,
                      rp.batch_size * rp.steps)
    if account.grid_truncated:
        notes = notes + ("grid-truncated",)
    return ScaledConfig(
        privacy=privacy,
        learning_rate=lr,
        compute_factor=factor,
        epsilon=account.epsilon,
        eps_tan=tan.eps_tan(e, privacy.delta),
        kind=kind,
        eta=e,
        eta_step=tan.eta_step(privacy),
        global_snr=privacy.dataset_size * e,
        best_order=account.best_order,
        exact_batch=exact_batch,
        notes=notes,
    )


def batch_scaled(ref: ReferenceConfig, target_batch: int) -> ScaledConfig:
    """Simulates ``ref`` at batch ``target_batch`` with sigma scaled alike."""
    p = ref.privacy
    if not 1 <= target_batch <= p.dataset_size:
        raise InfeasibleError(
            "target_batch",
            f"must lie in [1, {p.dataset_size}], got {target_batch}")
    sigma = p.noise_multiplier * (target_batch / p.batch_size)
    privacy = p.replace(batch_size=int(target_batch), noise_multiplier=sigma)
    notes = () if target_batch == p.batch_size else ("simulation-only",)
    return _scaled(ref, privacy, ref.learning_rate, BATCH_SCALED, notes=notes)


def step_scaled(ref: ReferenceConfig, target_steps: int) -> ScaledConfig:
    """Trades steps against batch size at fixed sigma and fixed eta.

    B' = B sqrt(S / S') rounded to the nearest integer, lr' = lr S / S'.
    """
    p = ref.privacy
    if target_steps < 1:
        raise DomainError("target_steps", f"must be >= 1, got {target_steps}")
    exact = p.batch_size * math.sqrt(p.steps / target_steps)
    batch = math.floor(exact + 0.5)
    if batch < 1 or batch > p.dataset_size:
        raise InfeasibleError(
            "target_steps",
            f"implies batch size {exact:.2f} outside [1, {p.dataset_size}]")
    privacy = p.replace(batch_size=batch, steps=int(target_steps))
    lr = ref.learning_rate * (p.steps / target_steps)
    return _scaled(ref, privacy, lr, STEP_SCALED, exact_batch=exact)


def _round_half_down(x: float) -> int:
    return math.ceil(x - 0.5)


def data_scaled(ref: ReferenceConfig, beta: float) -> ScaledConfig:
    """Changes the dataset size by ``beta`` at fixed (B, sigma, S).

    N' = beta N (ties rounded down) and delta' = delta N / N', which is
    delta / beta whenever beta N is an integer.
    """
    if not (math.isfinite(beta) and beta > 0):
        raise DomainError("beta", f"must be > 0, got {beta}")
    p = ref.privacy
    size = _round_half_down(beta * p.dataset_size)
    if size < p.batch_size:
        raise InfeasibleError(
            "beta", f"dataset size {size} is smaller than batch {p.batch_size}")
    delta = p.delta * p.dataset_size / size
    if not delta < 1:
        raise InfeasibleError("beta", f"scaled delta {delta} is not < 1")
    privacy = p.replace(dataset_size=size, delta=delta)
    return _scaled(ref, privacy, ref.learning_rate, DATA_SCALED)


def plan(ref: ReferenceConfig, *, batches: Sequence[int] = (),
         steps: Sequence[int] = (), betas: Sequence[float] = ()) -> ScalingPlan:
    """Builds a ScalingPlan from exactly one family of targets."""
    families = [(batches, batch_scaled), (steps, step_scaled),
                (betas, data_scaled)]
    given = [(targets, fn) for targets, fn in families if len(targets)]
    if len(given) != 1:
        raise DomainError(
            "targets", "exactly one of batches, steps, betas must be given")
    targets, fn = given[0]
    return ScalingPlan(ref, tuple(fn(ref, t) for t in targets))


@dataclass(frozen=True)
class SweepRow:
    steps: int
    sigma: float
    q: float
    eps_rdp: float
    eps_tan: float
    best_order: int
    valid: bool


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    skipped: tuple[float, ...]  # sigmas whose implied q exceeds 1


def _sweep_row(eta: float, delta: float, steps: int, sigma: float,
               eps_tan_value: float, orders) -> SweepRow | None:
    q = eta * math.sqrt(2.0) * sigma / math.sqrt(steps)
    if q > 1:
        return None
    batch = max(1, round(q * SWEEP_DATASET_SIZE))
    privacy = PrivacyParams(SWEEP_DATASET_SIZE, batch, steps, sigma, delta)
    account = epsilon_rdp(privacy, orders)
    q = privacy.q
    return SweepRow(steps, sigma, q, account.epsilon, eps_tan_value,
                    account.best_order,
                    validity_check(q, sigma, account.best_order))


def privacy_wall_sweep(eta: float, delta: float, steps: int,
                       sigma_grid: Sequence[float], *,
                       orders: Sequence[int] = DEFAULT_ORDERS,
                       workers: int | None = None) -> SweepResult:
    """Evaluates eps_rdp along sigma at fixed (eta, S).

    For each sigma the sampling rate is q = eta sqrt(2) sigma / sqrt(S),
    realised as B / 10^9.  Points with q > 1 are skipped and listed in
    ``skipped``.  The eps_tan column is computed once from ``eta`` and is
    therefore identical on every row.

    Raises:
      InfeasibleError: if every grid point is skipped.
    """
    sigmas = [float(s) for s in sigma_grid]
    if any(s <= 0 for s in sigmas) or any(b <= a for a, b in zip(sigmas, sigmas[1:])):
        raise DomainError("sigma_grid", "must be increasing and positive")
    if steps < 1:
        raise DomainError("steps", f"must be >= 1, got {steps}")
    eps_tan_value = tan.eps_tan(eta, delta)

    def row(sigma):
        return _sweep_row(eta, delta, steps, sigma, eps_tan_value, orders)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(row, sigmas))
    else:
        results = [row(s) for s in sigmas]

    rows = tuple(r for r in results if r is not None)
    skipped = tuple(s for s, r in zip(sigmas, results) if r is None)
    if not rows:
        raise InfeasibleError("sigma_grid", "empty sweep: q > 1 at every sigma")
    return SweepResult(rows, skipped)


def sigma_grid(low: float, high: float, num: int) -> np.ndarray:
    """Evenly spaced grid rounded to 12 significant digits (stable CSV keys)."""
    return np.array([float(f"{s:.12g}") for s in np.linspace(low, high, num)])
