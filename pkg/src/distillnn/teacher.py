"""Bayesian teachers: MC-dropout networks and deep ensembles.

Both teachers expose the same predictive-sampling surface: `mc_predict`
returns a set of prediction samples, stochastic forward passes for
MC dropout and one deterministic pass per member for ensembles.  With the
aleatoric head enabled the final layer emits [mu, s] per output dimension,
where s is the log observation-noise variance.

Training losses:
  regression, no head      mean absolute error
  regression, head         heteroscedastic Laplace NLL
  classification, no head  softmax cross-entropy
  classification, head     cross-entropy averaged over noisy-logit draws
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import checkpoint
from .datasets import ClassificationDataset, RegressionDataset
from .errors import ContractError, TrainingDivergedError
from .losses import laplace_nll, mae_loss, mc_logit_cross_entropy, softmax_cross_entropy
from .nn import MlpModel, build_mlp
from .optim import SgdOptimizer
from .rng import RngState
from .tensor import Tensor

LOGIT_NOISE_DRAWS = 10  # draws for the noisy-logit classification loss


@dataclass
class TeacherConfig:
    kind: str = "mc_dropout"        # mc_dropout | ensemble
    task: str = "regression"        # regression | classification
    input_dim: int = 1
    output_dim: int = 1             # class count for classification
    hidden: tuple = (64, 64)
    dropout_rate: float = 0.2
    ensemble_size: int = 5
    aleatoric_head: bool = False
    t_eval: int = 50
    lr: float = 0.02
    steps: int = 6000
    batch_size: int = 64
    momentum: float = 0.9
    weight_decay: float = 5e-4

    def __post_init__(self):
        if self.kind not in ("mc_dropout", "ensemble"):
            raise ContractError(f"unknown teacher kind {self.kind!r}")
        if self.task not in ("regression", "classification"):
            raise ContractError(f"unknown task {self.task!r}")
        if self.kind == "mc_dropout" and not 0.0 < self.dropout_rate < 1.0:
            raise ContractError("mc_dropout needs dropout_rate in (0, 1)")
        if self.kind == "ensemble" and self.ensemble_size < 2:
            raise ContractError("ensembles need at least 2 members")
        if self.t_eval < 2:
            raise ContractError("t_eval must be >= 2")

    @property
    def head_width(self) -> int:
        return 2 * self.output_dim if self.aleatoric_head else self.output_dim


@dataclass
class PredictiveSampleSet:
    """Stacked prediction samples: mu is (T, n, output_dim); logvar matches
    when the aleatoric head is present, else None.  Classification mu rows
    are logits."""

    mu: np.ndarray
    logvar: np.ndarray | None = None

    @property
    def t(self) -> int:
        return self.mu.shape[0]

    @property
    def has_head(self) -> bool:
        return self.logvar is not None


@dataclass
class TeacherModel:
    members: list          # one MlpModel for mc_dropout, ensemble_size for ensemble
    config: TeacherConfig

    @property
    def is_ensemble(self) -> bool:
        return self.config.kind == "ensemble"

    def deterministic_forward(self, x: np.ndarray) -> np.ndarray:
        """Dropout-off forward of the first member."""
        model = self.members[0]
        was_active = model.dropout_active_in_eval
        model.dropout_active_in_eval = False
        try:
            return model.eval().forward_np(np.asarray(x, dtype=np.float64))
        finally:
            model.dropout_active_in_eval = was_active


def _teacher_loss(config: TeacherConfig, out: Tensor, y_batch,
                  rng: RngState) -> Tensor:
    d = config.output_dim
    if config.task == "regression":
        y = np.asarray(y_batch, dtype=np.float64).reshape(-1, d)
        if config.aleatoric_head:
            return laplace_nll(out[:, :d], out[:, d:], y)
        return mae_loss(out, y)
    if config.aleatoric_head:
        return mc_logit_cross_entropy(out[:, :d], out[:, d:], y_batch, rng,
                                      n_draws=LOGIT_NOISE_DRAWS)
    return softmax_cross_entropy(out, y_batch)


def _train_one(config: TeacherConfig, features: np.ndarray, targets: np.ndarray,
               rng: RngState, loss_sink: list | None = None) -> MlpModel:
    init_rng = rng.stream("init")
    data_rng = rng.stream("data")
    dropout_rng = rng.stream("dropout")
    noise_rng = rng.stream("logit-noise")

    rate = config.dropout_rate if config.kind == "mc_dropout" else None
    model = build_mlp(config.input_dim, config.hidden, config.head_width,
                      init_rng, dropout_rate=rate, zero_init_head=True)
    opt = SgdOptimizer(model, config.lr, config.steps,
                       momentum=config.momentum, weight_decay=config.weight_decay)
    n = features.shape[0]
    model.train()
    for step in range(config.steps):
        idx = data_rng.integers(0, n, size=min(config.batch_size, n))
        out = model.forward(features[idx], dropout_rng)
        loss = _teacher_loss(config, out, targets[idx], noise_rng)
        if not np.isfinite(loss.data):
            raise TrainingDivergedError(step)
        if loss_sink is not None:
            loss_sink.append(float(loss.data))
        model.zero_grad()
        loss.backward()
        opt.step()
    model.eval()
    return model


def train_teacher(config: TeacherConfig, data, rng: RngState,
                  loss_sinks: list | None = None) -> TeacherModel:
    """Train the teacher; `loss_sinks`, when given, receives one per-member
    list of per-step loss values."""
    if isinstance(data, RegressionDataset):
        features, targets = data.features, data.y
    elif isinstance(data, ClassificationDataset):
        features, targets = data.features, data.labels
    else:
        raise ContractError(f"unsupported dataset type {type(data).__name__}")
    if len(data) == 0:
        raise ContractError("empty training data")

    n_members = 1 if config.kind == "mc_dropout" else config.ensemble_size
    members = []
    for i in range(n_members):
        sink: list | None = None
        if loss_sinks is not None:
            sink = []
            loss_sinks.append(sink)
        members.append(_train_one(config, features, targets,
                                  rng.stream(f"member{i}"), sink))
    return TeacherModel(members=members, config=config)


def mc_predict(teacher: TeacherModel, x: np.ndarray, t: int | None = None,
               rng: RngState | None = None) -> PredictiveSampleSet:
    """Sample the teacher's predictive distribution at inputs x (n, d)."""
    config = teacher.config
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if teacher.is_ensemble:
        if t is None:
            t = config.ensemble_size
        if t > config.ensemble_size:
            raise ContractError(
                f"t={t} exceeds ensemble size {config.ensemble_size}")
        outs = [m.eval().forward_np(x) for m in teacher.members[:t]]
    else:
        if t is None:
            t = config.t_eval
        if t < 1:
            raise ContractError("t must be >= 1")
        if rng is None:
            raise ContractError("mc_dropout prediction needs an rng")
        model = teacher.members[0]
        model.eval()
        model.dropout_active_in_eval = True
        try:
            outs = [model.forward_np(x, rng) for _ in range(t)]
        finally:
            model.dropout_active_in_eval = False

    stacked = np.stack(outs, axis=0)  # (t, n, head_width)
    d = config.output_dim
    if config.aleatoric_head:
        return PredictiveSampleSet(mu=stacked[:, :, :d], logvar=stacked[:, :, d:])
    return PredictiveSampleSet(mu=stacked)


def classification_mean(samples: PredictiveSampleSet) -> np.ndarray:
    """Mean of per-sample softmax distributions: (n, k) probabilities."""
    if samples.mu.size == 0:
        raise ContractError("empty sample set")
    z = samples.mu - samples.mu.max(axis=-1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=-1, keepdims=True)
    return probs.mean(axis=0)


# -- persistence -----------------------------------------------------------------

def _config_extra(config: TeacherConfig) -> dict:
    return {
        "role": "teacher",
        "teacher_kind": config.kind,
        "task": config.task,
        "input_dim": config.input_dim,
        "output_dim": config.output_dim,
        "hidden": ",".join(str(h) for h in config.hidden),
        "dropout_rate": repr(config.dropout_rate),
        "ensemble_size": config.ensemble_size,
        "aleatoric_head": config.aleatoric_head,
        "t_eval": config.t_eval,
    }


def save_teacher(teacher: TeacherModel, path: str, seed: int | None = None) -> None:
    """MC dropout: one checkpoint.  Ensembles: one checkpoint per member plus
    an ensemble manifest at `path`."""
    extra = _config_extra(teacher.config)
    if not teacher.is_ensemble:
        checkpoint.save_model(teacher.members[0], path, seed=seed, extra=extra)
        return
    member_files = []
    for i, member in enumerate(teacher.members):
        member_path = f"{path}.member{i}"
        checkpoint.save_model(member, member_path, seed=seed, extra=extra)
        member_files.append(os.path.basename(member_path))
    manifest = {"format": "distillnn-ensemble-v1",
                "members": ";".join(member_files), "seed": seed}
    manifest.update({f"extra.{k}": v for k, v in extra.items()})
    with open(path, "w") as f:
        for key, value in manifest.items():
            f.write(f"{key} = {value}\n")


def _config_from_extra(extra: dict) -> TeacherConfig:
    return TeacherConfig(
        kind=extra["teacher_kind"],
        task=extra["task"],
        input_dim=int(extra["input_dim"]),
        output_dim=int(extra["output_dim"]),
        hidden=tuple(int(h) for h in extra["hidden"].split(",")),
        dropout_rate=float(extra["dropout_rate"]),
        ensemble_size=int(extra["ensemble_size"]),
        aleatoric_head=extra["aleatoric_head"] == "True",
        t_eval=int(extra["t_eval"]),
    )


def load_teacher(path: str) -> TeacherModel:
    entries = checkpoint.read_manifest(path)
    if entries.get("format") == "distillnn-ensemble-v1":
        extra = {k[len("extra."):]: v for k, v in entries.items()
                 if k.startswith("extra.")}
        config = _config_from_extra(extra)
        base = os.path.dirname(path)
        members = []
        for name in entries["members"].split(";"):
            model, _ = checkpoint.load_model(os.path.join(base, name))
            members.append(model)
        return TeacherModel(members=members, config=config)
    model, extra = checkpoint.load_model(path)
    if extra.get("role") != "teacher":
        raise ContractError(f"{path} is not a teacher checkpoint")
    return TeacherModel(members=[model], config=_config_from_extra(extra))
