"""On-the-fly target generation for distillation.

Per input and per epoch, a small number m of teacher prediction samples is
drawn.  When the teacher carries an aleatoric head, each of the m samples is
expanded with k Gaussian noise draws

    y_hat = mu_t + sigma_tilde * eps,    eps ~ N(0, I),

where sigma_tilde^2 is the per-input empirical mean of the teacher's
predicted noise variances exp(s_t).  Averaging over samples before injecting
noise stabilizes training compared to using each noisy exp(s_t) directly;
all m*k targets for one input share a single sigma_tilde vector.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .rng import RngState
from .teacher import TeacherModel, mc_predict

# Test hook: when not None, every noise draw eps is replaced by this constant.
_FORCED_EPSILON: float | None = None


@dataclass
class SamplerConfig:
    m: int = 5               # teacher prediction samples per input per epoch
    k: int = 10              # noise draws per prediction sample
    use_sigma_tilde: bool = True
    t_sigma: int = 50        # samples used to estimate sigma_tilde

    def __post_init__(self):
        if self.m < 1:
            raise ContractError("m must be >= 1")
        if self.k < 1:
            raise ContractError("k must be >= 1")
        if self.t_sigma < 1:
            raise ContractError("t_sigma must be >= 1")


@dataclass
class SampleBatch:
    """Distillation targets for one batch of inputs.

    targets is (m*k, n, output_dim) when noise injection is active, else
    (m, n, output_dim).  mu is the underlying (m, n, output_dim) prediction
    samples; sigma_tilde the shared (n, output_dim) noise variance, or None
    without an aleatoric head."""

    targets: np.ndarray
    mu: np.ndarray
    sigma_tilde: np.ndarray | None = None


def _effective_counts(teacher: TeacherModel, cfg: SamplerConfig) -> tuple[int, int]:
    """Ensembles have a fixed set of deterministic members, so both the target
    count and the sigma estimate are capped at the ensemble size."""
    if teacher.is_ensemble:
        size = teacher.config.ensemble_size
        return min(cfg.m, size), min(cfg.t_sigma, size)
    return cfg.m, cfg.t_sigma


def estimate_sigma_tilde(teacher: TeacherModel, x: np.ndarray, t_sigma: int,
                         rng: RngState | None = None) -> np.ndarray:
    """Per-dimension mean of exp(s_t) over t_sigma teacher samples."""
    if not teacher.config.aleatoric_head:
        raise ContractError("sigma_tilde needs a teacher with an aleatoric head")
    if teacher.is_ensemble:
        t_sigma = min(t_sigma, teacher.config.ensemble_size)
    samples = mc_predict(teacher, x, t=t_sigma, rng=rng)
    return np.exp(samples.logvar).mean(axis=0)


def _noise(shape, rng: RngState) -> np.ndarray:
    if _FORCED_EPSILON is not None:
        return np.full(shape, float(_FORCED_EPSILON))
    return rng.normal(shape)


def draw_targets(teacher: TeacherModel, x: np.ndarray, cfg: SamplerConfig,
                 rng: RngState) -> SampleBatch:
    """Draw distillation targets for inputs x (n, d)."""
    m, t_sigma = _effective_counts(teacher, cfg)
    head = teacher.config.aleatoric_head

    if not head:
        samples = mc_predict(teacher, x, t=m, rng=rng)
        return SampleBatch(targets=samples.mu, mu=samples.mu)

    # one sampling pass serves both the m targets and the sigma estimate
    samples = mc_predict(teacher, x, t=max(m, t_sigma), rng=rng)
    mu = samples.mu[:m]
    if cfg.use_sigma_tilde:
        var = np.exp(samples.logvar[:t_sigma]).mean(axis=0)  # (n, d)
        std = np.sqrt(var)[None, None]                       # shared_scale
        sigma_tilde = var
    else:
        var = np.exp(samples.logvar[:m])                     # (m, n, d)
        std = np.sqrt(var)[:, None]
        sigma_tilde = None

    eps = _noise((m, cfg.k) + mu.shape[1:], rng)             # (m, k, n, d)
    targets = mu[:, None] + std * eps
    targets = targets.reshape((m * cfg.k,) + mu.shape[1:])
    return SampleBatch(targets=targets, mu=mu, sigma_tilde=sigma_tilde)


def save_sample_batch_csv(batch: SampleBatch, path: str) -> None:
    """Dump targets for offline inspection: one row per (input, sample)."""
    n_samples, n_inputs, dim = batch.targets.shape
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["input", "sample"] + [f"target{d}" for d in range(dim)])
        for i in range(n_inputs):
            for t in range(n_samples):
                row = [i, t] + [repr(float(v)) for v in batch.targets[t, i]]
                writer.writerow(row)
