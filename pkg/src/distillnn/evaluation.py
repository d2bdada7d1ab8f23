"""Model evaluation: predictive metrics, uncertainty metrics, and timing.

Teacher evaluation runs T-sample MC inference (50 by default); student
evaluation is one forward pass, plus logit-space sampling for classification
uncertainty.  Mean-only (dd) students have no distribution output, so their
regression uncertainty metrics are marked unavailable and their
classification uncertainty falls back to the predictive entropy of the
softmax output, which is the only uncertainty a mean-distilled model has.
"""

from __future__ import annotations

import time

import numpy as np

from .datasets import ClassificationDataset, RegressionDataset
from .errors import ContractError
from .metrics import (
    EvalReport,
    aleatoric_variance,
    ause,
    bald,
    classification_metrics,
    ece_classification,
    ece_regression,
    empirical_cdf_at,
    epistemic_variance,
    laplace_cdf,
    regression_metrics,
    total_variance,
)
from .rng import RngState
from .student import StudentModel, student_classification_uncertainty, student_predict
from .teacher import TeacherModel, classification_mean, mc_predict

TIMING_WARMUPS = 3
TIMING_REPEATS = 20


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def median_inference_seconds(fn, warmups: int = TIMING_WARMUPS,
                             repeats: int = TIMING_REPEATS) -> float:
    """Median wall-clock of `fn()` over `repeats` calls after `warmups`."""
    for _ in range(warmups):
        fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def evaluate_teacher(teacher: TeacherModel, data, rng: RngState,
                     t: int | None = None, timing: bool = True) -> dict:
    """Run MC evaluation; returns {"report": EvalReport, "curves": {...},
    plus raw uncertainty arrays for downstream analysis}."""
    if teacher.config.task == "regression":
        if not isinstance(data, RegressionDataset):
            raise ContractError("teacher task is regression; dataset is not")
        return _evaluate_teacher_regression(teacher, data, rng, t, timing)
    if not isinstance(data, ClassificationDataset):
        raise ContractError("teacher task is classification; dataset is not")
    return _evaluate_teacher_classification(teacher, data, rng, t, timing)


def _evaluate_teacher_regression(teacher, data, rng, t, timing):
    x = data.features
    samples = mc_predict(teacher, x, t=t, rng=rng.stream("mc"))
    pred = samples.mu.mean(axis=0)[:, 0]
    report = EvalReport(task="regression", **regression_metrics(pred, data.y))

    epi = epistemic_variance(samples)[:, 0]
    if samples.has_head:
        ale = aleatoric_variance(samples)[:, 0]
        tot = total_variance(samples)[:, 0]
        noisy = samples.mu + np.sqrt(np.exp(samples.logvar)) * rng.stream(
            "cdf-noise").normal(samples.mu.shape)
        cdf = empirical_cdf_at(noisy[:, :, 0], data.y)
        uncertainty = tot
    else:
        ale = None
        tot = epi
        cdf = empirical_cdf_at(samples.mu[:, :, 0], data.y)
        uncertainty = epi

    errors = np.abs(pred - data.y)
    report.ause = ause(errors, uncertainty)
    report.ece = ece_regression(cdf)
    report.mean_epistemic = float(epi.mean())
    report.mean_aleatoric = float(ale.mean()) if ale is not None else None
    report.mean_total = float(tot.mean())
    if timing:
        probe = x[:1]
        mc_rng = rng.stream("timing")
        report.runtime_seconds = median_inference_seconds(
            lambda: mc_predict(teacher, probe, t=t, rng=mc_rng))
    return {"report": report, "uncertainty": uncertainty, "errors": errors,
            "epistemic": epi, "cdf": cdf}


def _evaluate_teacher_classification(teacher, data, rng, t, timing):
    x = data.features
    samples = mc_predict(teacher, x, t=t, rng=rng.stream("mc"))
    prob_samples = _softmax(samples.mu)
    probs = prob_samples.mean(axis=0)
    report = EvalReport(task="classification",
                        **classification_metrics(probs, data.labels))

    mutual_info = bald(prob_samples)
    correct = probs.argmax(axis=1) == data.labels
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(data)), data.labels] = 1.0
    brier_per_point = np.mean((probs - onehot) ** 2, axis=1)

    report.ece = ece_classification(probs.max(axis=1), correct)
    report.ause = ause(brier_per_point, mutual_info)
    report.mean_epistemic = float(mutual_info.mean())
    if timing:
        probe = x[:1]
        mc_rng = rng.stream("timing")
        report.runtime_seconds = median_inference_seconds(
            lambda: mc_predict(teacher, probe, t=t, rng=mc_rng))
    return {"report": report, "uncertainty": mutual_info,
            "errors": brier_per_point, "probs": probs, "bald": mutual_info}


def evaluate_student(student: StudentModel, data, rng: RngState,
                     logit_samples: int | None = None, timing: bool = True) -> dict:
    if student.config.task == "regression":
        if not isinstance(data, RegressionDataset):
            raise ContractError("student task is regression; dataset is not")
        return _evaluate_student_regression(student, data, timing)
    if not isinstance(data, ClassificationDataset):
        raise ContractError("student task is classification; dataset is not")
    return _evaluate_student_classification(student, data, rng, logit_samples,
                                            timing)


def _evaluate_student_regression(student, data, timing):
    x = data.features
    params = student_predict(student, x)
    pred = params.mu[:, 0]
    report = EvalReport(task="regression", **regression_metrics(pred, data.y))
    errors = np.abs(pred - data.y)

    if student.is_mean_only:
        report.uncertainty_available = False
        uncertainty = None
        cdf = None
    else:
        variance = params.predictive_variance()[:, 0]
        uncertainty = variance
        # reported variance exp(s) implies Laplace scale b = exp(s/2)/sqrt(2)
        b = np.exp(0.5 * params.logvar[:, 0]) / np.sqrt(2.0)
        cdf = laplace_cdf(data.y, params.mu[:, 0], b)
        report.ause = ause(errors, uncertainty)
        report.ece = ece_regression(cdf)
        report.mean_total = float(variance.mean())
    if timing:
        probe = x[:1]
        report.runtime_seconds = median_inference_seconds(
            lambda: student_predict(student, probe))
    return {"report": report, "uncertainty": uncertainty, "errors": errors,
            "cdf": cdf}


def _evaluate_student_classification(student, data, rng, logit_samples, timing):
    x = data.features
    params = student_predict(student, x)
    s = logit_samples or student.config.logit_samples
    if student.is_mean_only:
        probs = _softmax(params.mu)
        # a mean-only student discarded the teacher's spread: its
        # mutual-information uncertainty is identically zero, so the
        # sparsification order degenerates to stable index order
        uncertainty = np.zeros(len(data))
        mutual_info = None
    else:
        probs, mutual_info = student_classification_uncertainty(
            params, s, rng.stream("logit-mc"))
        uncertainty = mutual_info

    report = EvalReport(task="classification",
                        **classification_metrics(probs, data.labels))
    correct = probs.argmax(axis=1) == data.labels
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(data)), data.labels] = 1.0
    brier_per_point = np.mean((probs - onehot) ** 2, axis=1)
    report.ece = ece_classification(probs.max(axis=1), correct)
    report.ause = ause(brier_per_point, uncertainty)
    if mutual_info is not None:
        report.mean_epistemic = float(mutual_info.mean())
    if timing:
        probe = x[:1]
        report.runtime_seconds = median_inference_seconds(
            lambda: student_predict(student, probe))
    return {"report": report, "uncertainty": uncertainty,
            "errors": brier_per_point, "probs": probs, "bald": mutual_info}


def speedup_ratio(teacher: TeacherModel, student: StudentModel,
                  x: np.ndarray, rng: RngState, t: int = 50) -> float:
    """Median teacher T-sample inference time over median student single-pass
    time, both measured on the same inputs."""
    mc_rng = rng.stream("speedup")
    teacher_time = median_inference_seconds(
        lambda: mc_predict(teacher, x, t=t if not teacher.is_ensemble else None,
                           rng=mc_rng))
    student_time = median_inference_seconds(lambda: student_predict(student, x))
    return teacher_time / student_time
