"""Toy DP-SGD on synthetic logistic regression.

The update at each step is

    theta <- theta - lr * ( (1/B) sum_{i in batch} clip_C(mean_j grad_ij)
                            + N(0, (C sigma / B)^2 I) )

with the batch drawn by Poisson sampling at rate q = B / N and ``j`` running
over K augmented copies of each sample (Augmentation Multiplicity).  The
denominator is the nominal B, not the realised batch cardinality.

Randomness comes from a counter-based Philox generator.  Data generation,
batch sampling, augmentation and noise each use their own sub-stream, so two
runs with the same seed share the exact same standard-normal noise sequence
even if they sample different batches.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from tandp.accountant import DomainError, PrivacyParams

DATA_STREAM, SAMPLING_STREAM, AUGMENT_STREAM, NOISE_STREAM = range(4)
HISTOGRAM_BINS = 50
CLUSTER_MEAN_NORM = 3.0
MIN_NOISE_COORDINATES = 1000


def make_rng(seed: int, stream: int) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SimConfig:
    dimension: int
    num_samples: int
    privacy: PrivacyParams
    clip_norm: float = 1.0
    learning_rate: float = 1.0
    augmult_order: int = 1
    augmentation_noise_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("dimension", f"must be >= 1, got {self.dimension}")
        if self.num_samples < 2:
            raise DomainError("num_samples", f"must be >= 2, got {self.num_samples}")
        if self.privacy.dataset_size != self.num_samples:
            raise DomainError("num_samples", "must equal privacy.dataset_size")
        if not self.clip_norm > 0:
            raise DomainError("clip_norm", f"must be > 0, got {self.clip_norm}")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate", f"must be > 0, got {self.learning_rate}")
        if self.augmult_order < 1:
            raise DomainError("augmult_order", f"must be >= 1, got {self.augmult_order}")
        if not self.augmentation_noise_scale >= 0:
            raise DomainError("augmentation_noise_scale", "must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed", "must be a 64-bit unsigned integer")
        if self.privacy.steps * self.dimension < MIN_NOISE_COORDINATES:
            raise DomainError(
                "steps", f"steps * dimension must be >= {MIN_NOISE_COORDINATES} "
                "so that noise statistics are meaningful")


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def rows(self):
        for left, right, count in zip(self.edges[:-1], self.edges[1:], self.counts):
            yield float(left), float(right), int(count)


@dataclass
class SimReport:
    loss_trajectory: list[tuple[int, float]]
    grad_norm_histograms: dict[int, Histogram]
    noise_stats: dict[str, float]
    final_params: np.ndarray
    final_accuracy: float
    # Raw per-sample norms at checkpoints and the (S, d) injected noise;
    # kept in memory only, not serialized.
    grad_norms: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    noise: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "loss_trajectory": [[s, l] for s, l in self.loss_trajectory],
            "grad_norm_histograms": {
                str(step): {"edges": h.edges.tolist(), "counts": h.counts.tolist()}
                for step, h in self.grad_norm_histograms.items()
            },
            "noise_stats": dict(self.noise_stats),
            "final_params": self.final_params.tolist(),
            "final_accuracy": self.final_accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write(self, out_dir) -> list[Path]:
        """Writes report.json and one histogram CSV per checkpoint."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = [out_dir / "report.json"]
        paths[0].write_text(self.to_json() + "\n")
        for step, hist in self.grad_norm_histograms.items():
            path = out_dir / f"hist_step_{step}.csv"
            with path.open("w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["bin_left", "bin_right", "count"])
                for left, right, count in hist.rows():
                    writer.writerow([f"{left:.12g}", f"{right:.12g}", count])
            paths.append(path)
        return paths


def clip(g: np.ndarray, C: float) -> np.ndarray:
    """Scales ``g`` by min(1, C / ||g||)."""
    g = np.asarray(g, dtype=np.float64)
    norm = np.linalg.norm(g)
    if norm <= C:
        return g.copy()
    return g * (C / norm)


def _clip_rows(grads: np.ndarray, C: float) -> np.ndarray:
    norms = np.linalg.norm(grads, axis=-1, keepdims=True)
    scale = np.minimum(1.0, C / np.where(norms > 0, norms, 1.0))
    return grads * scale


def noisy_gradient(per_sample_grads, C: float, sigma: float, B: int,
                   rng: np.random.Generator) -> np.ndarray:
    """(1/B) sum_i clip_C(g_i) + N(0, (C sigma / B)^2) per coordinate.

    ``per_sample_grads`` is an (m, d) array; m may be 0.
    """
    grads = np.asarray(per_sample_grads, dtype=np.float64)
    if grads.ndim != 2 or grads.shape[1] == 0:
        raise DomainError("per_sample_grads", "expected an (m, d) array with d >= 1")
    if not sigma > 0:
        raise DomainError("sigma", f"must be > 0, got {sigma}")
    return _clip_rows(grads, C).sum(axis=0) / B + _noise(rng, grads.shape[1], C, sigma, B)


def _noise(rng, dimension, C, sigma, B):
    return rng.standard_normal(dimension) * (C * sigma / B)


def augmult_gradient(per_aug_grads, C: float) -> np.ndarray:
    """Averages each sample's K augmentation gradients, then clips.

    Args:
      per_aug_grads: (m, K, d) array, or a sequence of m sequences of K
        vectors of equal dimension.
      C: clipping norm.

    Returns:
      (m, d) array of clipped per-sample gradients.
    """
    try:
        grads = np.asarray(per_aug_grads, dtype=np.float64)
    except ValueError as err:
        raise DomainError("per_aug_grads", f"ragged input: {err}") from None
    if grads.ndim != 3 or grads.shape[1] < 1:
        raise DomainError("per_aug_grads", "expected shape (samples, K, dimension)")
    return _clip_rows(grads.mean(axis=1), C)


def poisson_sample(n: int, q: float, rng: np.random.Generator) -> np.ndarray:
    """Indices in range(n), each kept independently with probability q."""
    if not 0 <= q <= 1:
        raise DomainError("q", f"must lie in [0, 1], got {q}")
    return np.flatnonzero(rng.random(n) < q)


def make_dataset(dimension: int, num_samples: int, seed: int):
    """Two unit-covariance Gaussian clusters at +/- mu with balanced labels."""
    rng = make_rng(seed, DATA_STREAM)
    mu = np.full(dimension, CLUSTER_MEAN_NORM / math.sqrt(dimension))
    labels = np.arange(num_samples) % 2
    signs = 2.0 * labels - 1.0
    features = signs[:, None] * mu + rng.standard_normal((num_samples, dimension))
    return features, labels


def logistic_loss(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample log(1 + exp(-s theta.x)) with s = 2y - 1."""
    margins = (2.0 * y - 1.0) * (x @ theta)
    return np.logaddexp(0.0, -margins)


def logistic_grad(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample gradients of ``logistic_loss`` w.r.t. theta; shape of ``x``."""
    s = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    margins = s * (x @ theta)
    return (-s * expit(-margins))[..., None] * x


def checkpoints(steps: int) -> tuple[int, ...]:
    return tuple(sorted({1, max(1, steps // 2), steps}))


def _histogram(norms: np.ndarray, C: float) -> Histogram:
    edges = np.linspace(0.0, 2.0 * C, HISTOGRAM_BINS + 1)
    # Norms beyond 2C land in the last bin so counts cover every sample.
    counts, _ = np.histogram(np.minimum(norms, 2.0 * C), bins=edges)
    return Histogram(edges, counts)


def train(cfg: SimConfig) -> SimReport:
    p = cfg.privacy
    C, K = cfg.clip_norm, cfg.augmult_order
    x, y = make_dataset(cfg.dimension, cfg.num_samples, cfg.seed)
    sampling_rng = make_rng(cfg.seed, SAMPLING_STREAM)
    augment_rng = make_rng(cfg.seed, AUGMENT_STREAM)
    noise_rng = make_rng(cfg.seed, NOISE_STREAM)

    theta = np.zeros(cfg.dimension)
    marks = set(checkpoints(p.steps))
    losses = [(0, float(logistic_loss(theta, x, y).mean()))]
    histograms, norms_at = {}, {}
    noise = np.empty((p.steps, cfg.dimension))

    for step in range(1, p.steps + 1):
        idx = poisson_sample(cfg.num_samples, p.q, sampling_rng)
        xb = np.repeat(x[idx][:, None, :], K, axis=1)
        if cfg.augmentation_noise_scale > 0:
            xb = xb + cfg.augmentation_noise_scale * augment_rng.standard_normal(xb.shape)
        grads = logistic_grad(theta, xb, y[idx][:, None])
        averaged = grads.mean(axis=1)
        if step in marks:
            norms = np.linalg.norm(averaged, axis=1)
            norms_at[step] = norms
            histograms[step] = _histogram(norms, C)

        noise[step - 1] = _noise(noise_rng, cfg.dimension, C,
                                 p.noise_multiplier, p.batch_size)
        update = _clip_rows(averaged, C).sum(axis=0) / p.batch_size + noise[step - 1]
        theta = theta - cfg.learning_rate * update
        losses.append((step, float(logistic_loss(theta, x, y).mean())))

    stats = {
        "mean": float(noise.mean()),
        "std": float(noise.std()),
        "expected_std": C * p.noise_multiplier / p.batch_size,
        "count": int(noise.size),
    }
    accuracy = float(np.mean((x @ theta > 0) == (y == 1)))
    return SimReport(losses, histograms, stats, theta, accuracy, norms_at, noise)
