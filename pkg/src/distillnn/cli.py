"""Command-line pipeline driver.

Subcommands: train-teacher, distill, evaluate, ablate, outlier-eval,
print-defaults.  Exit codes: 0 success, 2 invalid config or contract
violation, 3 numeric failure during training, 4 sweep completed with failed
points.  DISTILLNN_THREADS caps ablation fan-out.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .checkpoint import write_kv_text
from .config import RunConfig, default_config_text, load_config
from .datasets import gen_classification, gen_regression
from .errors import ContractError, NumericError
from .evaluation import evaluate_student, evaluate_teacher
from .metrics import bald, coverage_curve, js_distance, save_curve_csv, sparsification_curves
from .rng import RngState
from .sampler import SamplerConfig
from .student import load_student, save_student, train_student
from .teacher import TeacherModel, load_teacher, mc_predict, save_teacher, train_teacher

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4

M_GRID = (1, 2, 5, 10, 20)
LAMBDA_GRID = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)


def _dataset(cfg: RunConfig, split_spec, n: int):
    if cfg.task == "regression":
        return gen_regression(n, split_spec)
    return gen_classification(n, cfg.k, split_spec)


def _write_loss_csv(path: str, sinks: list[list[float]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "member", "loss"])
        for member, sink in enumerate(sinks):
            for step, loss in enumerate(sink):
                writer.writerow([step, member, repr(loss)])


def _manifest(cfg: RunConfig, phase_times: dict, paths: dict) -> dict:
    entries = {"library_version": __version__, "root_seed": cfg.seed}
    entries.update({f"config.{k}": v for k, v in sorted(cfg.raw.items())})
    entries.update({f"seconds.{k}": f"{v:.3f}" for k, v in phase_times.items()})
    entries.update({f"path.{k}": v for k, v in paths.items()})
    return entries


def cmd_print_defaults(_args) -> int:
    sys.stdout.write(default_config_text())
    return EXIT_OK


def cmd_train_teacher(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    data = _dataset(cfg, cfg.train_split(), cfg.n_train)
    sinks: list[list[float]] = []
    start = time.perf_counter()
    teacher = train_teacher(cfg.teacher, data, RngState(cfg.seed).stream("teacher"),
                            loss_sinks=sinks)
    train_seconds = time.perf_counter() - start
    ckpt = os.path.join(out, "teacher.ckpt")
    save_teacher(teacher, ckpt, seed=cfg.seed)
    _write_loss_csv(os.path.join(out, "teacher_loss.csv"), sinks)
    write_kv_text(os.path.join(out, "teacher_manifest.txt"),
                  _manifest(cfg, {"train": train_seconds}, {"checkpoint": ckpt}))
    print(f"teacher checkpoint: {ckpt}")
    return EXIT_OK


def cmd_distill(args) -> int:
    cfg = load_config(args.config, args.seed, mode_override=args.mode)
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    teacher = load_teacher(args.teacher)
    if teacher.config.task != cfg.task:
        raise ContractError(
            f"teacher task {teacher.config.task!r} does not match config task "
            f"{cfg.task!r}")
    data = _dataset(cfg, cfg.train_split(), cfg.n_train)
    sink: list[float] = []
    start = time.perf_counter()
    student = train_student(teacher, data, cfg.student, cfg.sampler,
                            RngState(cfg.seed).stream("student"), loss_sink=sink)
    train_seconds = time.perf_counter() - start
    ckpt = os.path.join(out, "student.ckpt")
    save_student(student, ckpt, seed=cfg.seed)
    _write_loss_csv(os.path.join(out, "student_loss.csv"), [sink])
    manifest = _manifest(cfg, {"train": train_seconds},
                         {"checkpoint": ckpt, "teacher": args.teacher})
    manifest["student_mode"] = student.config.mode
    manifest["augmentation"] = cfg.student.augmentation.enabled
    manifest["sampler_m"] = cfg.sampler.m
    manifest["sampler_k"] = cfg.sampler.k
    write_kv_text(os.path.join(out, "student_manifest.txt"), manifest)
    print(f"student checkpoint: {ckpt}")
    return EXIT_OK


def _write_eval_outputs(out: str, result: dict, cfg: RunConfig) -> None:
    report = result["report"]
    write_kv_text(os.path.join(out, "report.txt"),
                  {k: v for k, v in report.to_kv().items()})
    if result.get("uncertainty") is not None:
        curves = sparsification_curves(result["errors"], result["uncertainty"])
        save_curve_csv(os.path.join(out, "sparsification.csv"),
                       ["fraction", "model_curve", "oracle_curve"],
                       [curves.fractions, curves.model_curve, curves.oracle_curve])
    if result.get("cdf") is not None:
        levels, freq = coverage_curve(result["cdf"])
        save_curve_csv(os.path.join(out, "coverage.csv"),
                       ["expected", "observed"], [levels, freq])
    if result.get("probs") is not None:
        probs = result["probs"]
        save_curve_csv(os.path.join(out, "confidence_histogram.csv"),
                       ["confidence"], [np.sort(probs.max(axis=1))])


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    data = _dataset(cfg, cfg.eval_split_spec(), cfg.n_eval)
    rng = RngState(cfg.seed).stream("evaluate")
    start = time.perf_counter()
    if args.role == "teacher":
        model = load_teacher(args.checkpoint)
        result = evaluate_teacher(model, data, rng, t=cfg.teacher.t_eval,
                                  timing=cfg.timing)
    else:
        model = load_student(args.checkpoint)
        if model.config.task != cfg.task:
            raise ContractError("student checkpoint task does not match config")
        result = evaluate_student(model, data, rng,
                                  logit_samples=cfg.student.logit_samples,
                                  timing=cfg.timing)
        if model.is_mean_only and cfg.task == "regression":
            print("warning: mean-only student has no distribution output; "
                  "uncertainty metrics unavailable", file=sys.stderr)
    _write_eval_outputs(out, result, cfg)
    write_kv_text(os.path.join(out, "eval_manifest.txt"),
                  _manifest(cfg, {"evaluate": time.perf_counter() - start},
                            {"checkpoint": args.checkpoint}))
    print(f"report: {os.path.join(out, 'report.txt')}")
    return EXIT_OK


def _ablate_points(kind: str) -> list[tuple[str, object]]:
    if kind == "samples_m":
        return [("m", m) for m in M_GRID]
    if kind == "lambda":
        return [("lambda", lam) for lam in LAMBDA_GRID]
    if kind == "augmentation":
        return [("augmentation", flag) for flag in ("on", "off")]
    raise ContractError(f"unknown ablation kind {kind!r}")


def _run_ablate_point(cfg: RunConfig, teacher: TeacherModel, train_data,
                      eval_data, key: str, value) -> dict:
    from dataclasses import replace

    student_cfg, sampler_cfg = cfg.student, cfg.sampler
    if key == "m":
        sampler_cfg = replace(sampler_cfg, m=int(value))
    elif key == "lambda":
        student_cfg = replace(student_cfg, lam=float(value))
    else:
        aug = replace(student_cfg.augmentation, enabled=value == "on")
        student_cfg = replace(student_cfg, augmentation=aug)

    rng = RngState(cfg.seed).stream(f"ablate-{key}-{value}")
    sink: list[float] = []
    student = train_student(teacher, train_data, student_cfg, sampler_cfg,
                            rng.stream("train"), loss_sink=sink)
    result = evaluate_student(student, eval_data, rng.stream("eval"),
                              timing=cfg.timing)
    row = {"point": value, "status": "ok",
           "final_loss": repr(sink[-1]) if sink else ""}
    row.update({k: v for k, v in result["report"].to_kv().items()
                if not k.startswith("units.")})
    return row


def cmd_ablate(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    teacher = load_teacher(args.teacher)
    train_data = _dataset(cfg, cfg.train_split(), cfg.n_train)
    eval_data = _dataset(cfg, cfg.eval_split_spec(), cfg.n_eval)
    points = _ablate_points(args.kind)

    def run(point):
        key, value = point
        try:
            return _run_ablate_point(cfg, teacher, train_data, eval_data,
                                     key, value)
        except Exception as exc:  # recorded per point; sweep continues
            return {"point": value, "status": f"failed: {exc}"}

    workers = int(os.environ.get("DISTILLNN_THREADS", "1"))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(p) for p in points]

    header: list[str] = ["point", "status", "final_loss"]
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    sweep_path = os.path.join(out, f"ablate_{args.kind}.csv")
    with open(sweep_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=header)
        writer.writeheader()
        writer.writerows(rows)
    print(f"sweep: {sweep_path}")
    if any(row["status"] != "ok" for row in rows):
        return EXIT_PARTIAL
    return EXIT_OK


def _bald_by_group(probs_samples: np.ndarray, inlier_mask: np.ndarray):
    values = bald(probs_samples)
    return values[inlier_mask], values[~inlier_mask]


def cmd_outlier_eval(args) -> int:
    cfg = load_config(args.config, args.seed)
    if cfg.task != "classification":
        raise ContractError("outlier evaluation requires a classification task")
    if not cfg.held_out:
        raise ContractError("outlier evaluation requires held_out classes")
    out = args.out or cfg.out
    os.makedirs(out, exist_ok=True)
    data = _dataset(cfg, cfg.eval_split_spec(), cfg.n_eval)
    inlier = ~np.isin(data.labels, cfg.held_out)
    if inlier.all() or not inlier.any():
        raise ContractError("evaluation split must contain both inlier and "
                            "held-out points")
    rng = RngState(cfg.seed).stream("outlier")

    entries: dict = {"units.bald": "nats", "units.js": "base2",
                     "held_out": ",".join(str(c) for c in cfg.held_out)}

    def add_model(tag: str, mutual_info: np.ndarray):
        inl, outl = mutual_info[inlier], mutual_info[~inlier]
        entries[f"js_{tag}"] = js_distance(inl, outl, bins=cfg.js_bins)
        entries[f"mean_bald_inlier_{tag}"] = float(inl.mean())
        entries[f"mean_bald_outlier_{tag}"] = float(outl.mean())
        entries[f"relative_mean_{tag}"] = (
            float(outl.mean() / inl.mean()) if inl.mean() > 0 else float("inf"))

    teacher = load_teacher(args.teacher)
    t_result = evaluate_teacher(teacher, data, rng.stream("teacher"),
                                t=cfg.teacher.t_eval, timing=False)
    add_model("teacher", t_result["bald"])

    student = load_student(args.student)
    s_result = evaluate_student(student, data, rng.stream("student"),
                                timing=False)
    if s_result["bald"] is None:
        raise ContractError("mean-only student has no mutual-information "
                            "estimate for outlier evaluation")
    add_model("student", s_result["bald"])

    if args.reference:
        ref = load_teacher(args.reference)
        r_result = evaluate_teacher(ref, data, rng.stream("reference"),
                                    t=cfg.teacher.t_eval, timing=False)
        add_model("reference", r_result["bald"])

    path = os.path.join(out, "outlier_report.txt")
    write_kv_text(path, entries)
    print(f"outlier report: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distillnn",
        description="Train sampling-based uncertainty teachers and distill "
                    "them into single-pass students.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="INI config path")
        p.add_argument("--seed", type=int, default=None,
                       help="root seed override")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("print-defaults", help="print the default config")
    p.set_defaults(func=cmd_print_defaults)

    p = sub.add_parser("train-teacher", help="train a teacher model")
    common(p)
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("distill", help="distill a teacher into a student")
    common(p)
    p.add_argument("--teacher", required=True, help="teacher checkpoint")
    p.add_argument("--mode", choices=("full", "dd"), default=None,
                   help="override student mode")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--role", choices=("teacher", "student"), required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run a sweep over one knob")
    common(p)
    p.add_argument("--teacher", required=True, help="teacher checkpoint")
    p.add_argument("--kind", choices=("samples_m", "lambda", "augmentation"),
                   required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("outlier-eval", help="inlier/outlier uncertainty "
                                            "separation")
    common(p)
    p.add_argument("--teacher", required=True)
    p.add_argument("--student", required=True)
    p.add_argument("--reference", default=None,
                   help="optional reference teacher trained on all classes")
    p.set_defaults(func=cmd_outlier_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
