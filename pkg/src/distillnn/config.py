"""Run configuration: flat INI files with sections for every pipeline stage.

Every knob has a spelled-out default (see `default_config_text` /
`print-defaults`).  Seeds are mandatory and never come from the clock: all
randomness in a run flows from one root seed, split into named streams so an
ablation changes exactly one stream.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .datasets import AugmentationSpec, SplitSpec
from .errors import ContractError
from .sampler import SamplerConfig
from .student import StudentConfig
from .teacher import TeacherConfig

DEFAULTS: dict[str, dict[str, str]] = {
    "run": {
        "name": "experiment",
        "seed": "42",
        "out": "runs/experiment",
    },
    "dataset": {
        "task": "regression",
        "n_train": "2000",
        "n_eval": "500",
        "k": "4",
        "held_out": "",
        "data_seed": "0",
        "eval_seed": "1000",
        "eval_split": "test",
    },
    "teacher": {
        "kind": "mc_dropout",
        "hidden": "64,64",
        "dropout_rate": "0.2",
        "ensemble_size": "5",
        "aleatoric_head": "false",
        "t_eval": "50",
        "lr": "0.02",
        "steps": "6000",
        "batch_size": "64",
        "momentum": "0.9",
        "weight_decay": "5e-4",
    },
    "sampler": {
        "m": "5",
        "k": "10",
        "use_sigma_tilde": "true",
        "t_sigma": "50",
    },
    "student": {
        "mode": "full",
        "lambda": "1.0",
        "init_from_teacher": "true",
        "augment": "true",
        "jitter_range": "0.2",
        "lr": "",
        "steps": "",
        "batch_size": "64",
        "momentum": "0.9",
        "weight_decay": "5e-4",
        "logit_samples": "50",
    },
    "metrics": {
        "js_bins": "50",
        "timing": "true",
    },
}


def default_config_text() -> str:
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _bool(raw: str) -> bool:
    raw = raw.strip().lower()
    if raw in ("true", "yes", "1", "on"):
        return True
    if raw in ("false", "no", "0", "off"):
        return False
    raise ContractError(f"not a boolean: {raw!r}")


@dataclass
class RunConfig:
    name: str
    seed: int
    out: str
    task: str
    n_train: int
    n_eval: int
    k: int
    held_out: tuple
    data_seed: int
    eval_seed: int
    eval_split: str
    teacher: TeacherConfig
    sampler: SamplerConfig
    student: StudentConfig
    student_mode_raw: str
    js_bins: int
    timing: bool
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def input_dim(self) -> int:
        return 1 if self.task == "regression" else 2

    @property
    def output_dim(self) -> int:
        return 1 if self.task == "regression" else self.k

    def train_split(self) -> SplitSpec:
        return SplitSpec("train", held_out_classes=self.held_out,
                         seed=self.data_seed)

    def eval_split_spec(self) -> SplitSpec:
        return SplitSpec(self.eval_split, held_out_classes=self.held_out,
                         seed=self.eval_seed)


def load_config(path: str | None, seed_override: int | None = None,
                mode_override: str | None = None) -> RunConfig:
    """Parse an INI config (defaults fill every omitted key); `path=None`
    uses pure defaults.  CLI overrides take precedence."""
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ContractError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ContractError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in DEFAULTS[section]:
                raise ContractError(f"unknown config key {section}.{key}")

    get = parser.get
    task = get("dataset", "task")
    if task not in ("regression", "classification"):
        raise ContractError(f"unknown task {task!r}")
    k = parser.getint("dataset", "k")
    held_raw = get("dataset", "held_out").strip()
    held_out = tuple(int(v) for v in held_raw.split(",") if v.strip() != "")

    input_dim = 1 if task == "regression" else 2
    output_dim = 1 if task == "regression" else k
    teacher = TeacherConfig(
        kind=get("teacher", "kind"),
        task=task,
        input_dim=input_dim,
        output_dim=output_dim,
        hidden=tuple(int(h) for h in get("teacher", "hidden").split(",")),
        dropout_rate=parser.getfloat("teacher", "dropout_rate"),
        ensemble_size=parser.getint("teacher", "ensemble_size"),
        aleatoric_head=_bool(get("teacher", "aleatoric_head")),
        t_eval=parser.getint("teacher", "t_eval"),
        lr=parser.getfloat("teacher", "lr"),
        steps=parser.getint("teacher", "steps"),
        batch_size=parser.getint("teacher", "batch_size"),
        momentum=parser.getfloat("teacher", "momentum"),
        weight_decay=parser.getfloat("teacher", "weight_decay"),
    )
    sampler = SamplerConfig(
        m=parser.getint("sampler", "m"),
        k=parser.getint("sampler", "k"),
        use_sigma_tilde=_bool(get("sampler", "use_sigma_tilde")),
        t_sigma=parser.getint("sampler", "t_sigma"),
    )
    mode_raw = mode_override or get("student", "mode")
    if mode_raw not in ("full", "dd"):
        raise ContractError(f"student mode must be full or dd, got {mode_raw!r}")
    student = StudentConfig(
        task=task,
        lam=parser.getfloat("student", "lambda"),
        init_from_teacher=_bool(get("student", "init_from_teacher")),
        mode="full_distribution" if mode_raw == "full" else "mean_only_dd",
        augmentation=AugmentationSpec(
            enabled=_bool(get("student", "augment")),
            jitter_range=parser.getfloat("student", "jitter_range"),
        ),
        lr=parser.getfloat("student", "lr") if get("student", "lr").strip() else None,
        steps=parser.getint("student", "steps") if get("student", "steps").strip() else None,
        batch_size=parser.getint("student", "batch_size"),
        momentum=parser.getfloat("student", "momentum"),
        weight_decay=parser.getfloat("student", "weight_decay"),
        logit_samples=parser.getint("student", "logit_samples"),
    )

    seed = seed_override if seed_override is not None else parser.getint("run", "seed")
    raw = {f"{section}.{key}": parser.get(section, key)
           for section in parser.sections() for key in parser[section]}
    raw["run.seed"] = str(seed)
    raw["student.mode"] = mode_raw
    return RunConfig(
        name=get("run", "name"),
        seed=seed,
        out=get("run", "out"),
        task=task,
        n_train=parser.getint("dataset", "n_train"),
        n_eval=parser.getint("dataset", "n_eval"),
        k=k,
        held_out=held_out,
        data_seed=parser.getint("dataset", "data_seed"),
        eval_seed=parser.getint("dataset", "eval_seed"),
        eval_split=get("dataset", "eval_split"),
        teacher=teacher,
        sampler=sampler,
        student=student,
        student_mode_raw=mode_raw,
        js_bins=parser.getint("metrics", "js_bins"),
        timing=_bool(get("metrics", "timing")),
        raw=raw,
    )
