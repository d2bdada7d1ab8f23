"""The deterministic distribution-parameterizing student.

The student mirrors the teacher architecture minus dropout and always emits
[mu, s] per output dimension (s = log variance).  In `full_distribution`
mode it is fit by maximum likelihood against sampled teacher predictions:
Laplace NLL for regression, diagonal-Gaussian NLL on logits for
classification, in both cases combined with a ground-truth term

    L_total = L_distill + lam * L_ground_truth,

where the ground-truth loss is the one the teacher was trained with (L1 for
regression, cross-entropy for classification).  In `mean_only_dd` mode the
distillation term is replaced by a fit to the teacher's mean prediction
alone; the s head receives no gradient and uncertainty queries are refused.

Regression convention: the reported total predictive variance is exp(s), so
the fitted Laplace scale is b = exp(s/2)/sqrt(2).  A single forward pass
yields both the mean and the uncertainty; classification uncertainty draws S
logit samples z = mu + exp(s/2)*eps and summarizes their softmaxes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint
from .datasets import (
    AugmentationSpec,
    ClassificationDataset,
    RegressionDataset,
    augment,
    feature_scale,
)
from .errors import ContractError, TrainingDivergedError
from .losses import (
    laplace_nll,
    logit_gaussian_nll,
    mae_loss,
    mse_loss,
    soft_cross_entropy,
    softmax_cross_entropy,
)
from .metrics import bald
from .nn import MlpModel, build_mlp, copy_compatible_parameters
from .optim import SgdOptimizer
from .rng import RngState
from .sampler import SamplerConfig, draw_targets
from .teacher import TeacherModel

FULL = "full_distribution"
MEAN_ONLY = "mean_only_dd"


@dataclass
class StudentConfig:
    task: str = "regression"
    lam: float = 1.0                  # weight of the ground-truth term
    init_from_teacher: bool = True
    mode: str = FULL                  # full_distribution | mean_only_dd
    augmentation: AugmentationSpec = field(default_factory=AugmentationSpec)
    lr: float | None = None           # default: 0.5 * teacher lr
    steps: int | None = None          # default: 0.75 * teacher steps
    batch_size: int = 64
    momentum: float = 0.9
    weight_decay: float = 5e-4
    logit_samples: int = 50           # S for classification uncertainty

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ContractError(f"unknown task {self.task!r}")
        if self.mode not in (FULL, MEAN_ONLY):
            raise ContractError(f"unknown student mode {self.mode!r}")
        if self.lam < 0:
            raise ContractError("lam must be >= 0")


@dataclass
class DistParams:
    """Student output: mean and log-variance per output dimension.

    For classification both live in logit space.  logvar is None for a
    mean-only student, which cannot answer uncertainty queries."""

    mu: np.ndarray
    logvar: np.ndarray | None

    def predictive_variance(self) -> np.ndarray:
        if self.logvar is None:
            raise ContractError("mean-only student has no variance estimate")
        return np.exp(self.logvar)


@dataclass
class StudentModel:
    net: MlpModel
    config: StudentConfig
    output_dim: int

    @property
    def is_mean_only(self) -> bool:
        return self.config.mode == MEAN_ONLY


def total_loss(distill_term, mu, y_true, task: str, lam: float):
    """Distillation term plus lam-weighted ground-truth term (L1 for
    regression, cross-entropy for classification)."""
    if lam == 0.0:
        return distill_term
    if task == "regression":
        y = np.asarray(y_true, dtype=np.float64).reshape(mu.shape)
        gt = mae_loss(mu, y)
    else:
        gt = softmax_cross_entropy(mu, y_true)
    return distill_term + gt * lam


def _resolve_training(cfg: StudentConfig, teacher: TeacherModel) -> tuple[float, int]:
    lr = cfg.lr if cfg.lr is not None else 0.5 * teacher.config.lr
    steps = cfg.steps if cfg.steps is not None else int(0.75 * teacher.config.steps)
    return lr, steps


def train_student(teacher: TeacherModel, data, cfg: StudentConfig,
                  sampler_cfg: SamplerConfig, rng: RngState,
                  loss_sink: list | None = None) -> StudentModel:
    if isinstance(data, RegressionDataset):
        features, targets_true = data.features, data.y
    elif isinstance(data, ClassificationDataset):
        features, targets_true = data.features, data.labels
    else:
        raise ContractError(f"unsupported dataset type {type(data).__name__}")
    if cfg.task != teacher.config.task:
        raise ContractError("student task must match teacher task")

    tcfg = teacher.config
    d = tcfg.output_dim
    init_rng = rng.stream("student-init")
    data_rng = rng.stream("student-data")
    sampler_rng = rng.stream("sampler")
    aug_rng = rng.stream("augment")

    net = build_mlp(tcfg.input_dim, tcfg.hidden, 2 * d, init_rng,
                    zero_init_head=True)
    if cfg.init_from_teacher:
        copy_compatible_parameters(teacher.members[0], net)

    lr, steps = _resolve_training(cfg, teacher)
    opt = SgdOptimizer(net, lr, steps, momentum=cfg.momentum,
                       weight_decay=cfg.weight_decay)
    scale = feature_scale(features)
    n = features.shape[0]

    net.train()
    for step in range(steps):
        idx = data_rng.integers(0, n, size=min(cfg.batch_size, n))
        x_batch = augment(features[idx], cfg.augmentation, aug_rng, scale)
        batch = draw_targets(teacher, x_batch, sampler_cfg, sampler_rng)

        out = net.forward(x_batch)
        mu, logvar = out[:, :d], out[:, d:]
        if cfg.mode == FULL:
            if cfg.task == "regression":
                distill = laplace_nll(mu, logvar, batch.targets)
            else:
                distill = logit_gaussian_nll(mu, logvar, batch.targets)
        else:
            if cfg.task == "regression":
                distill = mse_loss(mu, batch.mu.mean(axis=0))
            else:
                mean_probs = _softmax(batch.mu).mean(axis=0)
                distill = soft_cross_entropy(mu, mean_probs)

        loss = total_loss(distill, mu, targets_true[idx], cfg.task, cfg.lam)
        if not np.isfinite(loss.data):
            raise TrainingDivergedError(step)
        if loss_sink is not None:
            loss_sink.append(float(loss.data))
        net.zero_grad()
        loss.backward()
        opt.step()
    net.eval()
    return StudentModel(net=net, config=cfg, output_dim=d)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def student_predict(student: StudentModel, x: np.ndarray) -> DistParams:
    """One deterministic forward pass; consumes no randomness."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = student.net.eval().forward_np(x)
    d = student.output_dim
    if student.is_mean_only:
        return DistParams(mu=out[:, :d], logvar=None)
    return DistParams(mu=out[:, :d], logvar=out[:, d:])


def student_classification_uncertainty(params: DistParams, s: int,
                                       rng: RngState) -> tuple[np.ndarray, np.ndarray]:
    """Draw s logit vectors z = mu + exp(s/2)*eps, softmax each, and return
    (mean probabilities (n, k), per-input mutual-information estimate (n,))."""
    if s < 2:
        raise ContractError("need at least 2 logit samples")
    if params.logvar is None:
        raise ContractError("mean-only student has no logit distribution")
    std = np.exp(0.5 * params.logvar)
    eps = rng.normal((s,) + params.mu.shape)
    probs = _softmax(params.mu[None] + std[None] * eps)  # (s, n, k)
    return probs.mean(axis=0), bald(probs)


# -- persistence -----------------------------------------------------------------

def save_student(student: StudentModel, path: str, seed: int | None = None) -> None:
    extra = {
        "role": "student",
        "task": student.config.task,
        "mode": student.config.mode,
        "output_dim": student.output_dim,
        "lam": repr(student.config.lam),
        "logit_samples": student.config.logit_samples,
    }
    checkpoint.save_model(student.net, path, seed=seed, extra=extra)


def load_student(path: str) -> StudentModel:
    net, extra = checkpoint.load_model(path)
    if extra.get("role") != "student":
        raise ContractError(f"{path} is not a student checkpoint")
    cfg = StudentConfig(
        task=extra["task"],
        mode=extra["mode"],
        lam=float(extra["lam"]),
        logit_samples=int(extra["logit_samples"]),
    )
    return StudentModel(net=net, config=cfg, output_dim=int(extra["output_dim"]))
