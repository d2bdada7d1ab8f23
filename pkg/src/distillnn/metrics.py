"""Uncertainty and calibration measures plus the standard predictive metrics.

Unit conventions, also stamped into report headers: the mutual-information
estimate (bald) is in nats; the Jensen-Shannon distance uses base-2 logs so
it lives in [0, 1].
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import ContractError
from .teacher import PredictiveSampleSet

AUSE_FRACTIONS = np.arange(101) / 100.0
REGRESSION_ECE_LEVELS = 30
CLASSIFICATION_ECE_BINS = 10
JS_DEFAULT_BINS = 50


# -- variance decomposition ------------------------------------------------------

def epistemic_variance(samples: PredictiveSampleSet) -> np.ndarray:
    """Biased (divide-by-T) variance of the prediction samples per output
    dimension: mean of squares minus square of mean, clamped at 0."""
    if samples.mu.size == 0:
        raise ContractError("empty sample set")
    mu = samples.mu
    var = (mu * mu).mean(axis=0) - mu.mean(axis=0) ** 2
    return np.maximum(var, 0.0)


def aleatoric_variance(samples: PredictiveSampleSet) -> np.ndarray:
    """Mean predicted observation-noise variance exp(s_t) per dimension."""
    if not samples.has_head:
        raise ContractError("sample set has no aleatoric head outputs")
    return np.exp(samples.logvar).mean(axis=0)


def total_variance(samples: PredictiveSampleSet) -> np.ndarray:
    """Epistemic spread of the means plus mean predicted noise variance."""
    return epistemic_variance(samples) + aleatoric_variance(samples)


# -- mutual information (bald) ---------------------------------------------------

def _entropy(p: np.ndarray) -> np.ndarray:
    """Shannon entropy in nats over the last axis, with 0*log(0) := 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def bald(prob_samples: np.ndarray) -> np.ndarray:
    """Entropy of the mean distribution minus mean per-sample entropy (nats).

    prob_samples is (T, ..., K); each row must sum to 1 within 1e-9.  Returns
    a scalar for (T, K) input, an array otherwise.  Clamped at 0."""
    p = np.asarray(prob_samples, dtype=np.float64)
    if p.ndim < 2 or p.shape[0] < 1:
        raise ContractError("need a (T, ..., K) stack of distributions")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(p < 0):
        raise ContractError("rows must be probability distributions")
    mutual_info = _entropy(p.mean(axis=0)) - _entropy(p).mean(axis=0)
    return np.maximum(mutual_info, 0.0)


# -- sparsification --------------------------------------------------------------

@dataclass
class SparsificationCurve:
    fractions: np.ndarray     # 101 points, 0.00 .. 1.00
    model_curve: np.ndarray   # normalized mean error, removing by uncertainty
    oracle_curve: np.ndarray  # normalized mean error, removing by true error
    degenerate: bool = False


def sparsification_curves(errors: np.ndarray, uncertainties: np.ndarray
                          ) -> SparsificationCurve:
    errors = np.asarray(errors, dtype=np.float64)
    uncertainties = np.asarray(uncertainties, dtype=np.float64)
    if errors.shape != uncertainties.shape or errors.ndim != 1:
        raise ContractError("errors and uncertainties must be matching vectors")
    n = errors.size
    if n < 2:
        raise ContractError("need at least 2 points")
    if np.any(errors < 0):
        raise ContractError("errors must be nonnegative")

    base = errors.mean()
    if base == 0.0:
        warnings.warn("all errors are zero; sparsification is degenerate",
                      RuntimeWarning)
        flat = np.zeros_like(AUSE_FRACTIONS)
        return SparsificationCurve(AUSE_FRACTIONS.copy(), flat.copy(), flat,
                                   degenerate=True)

    # descending order; stable so ties keep their original index order
    by_unc = np.argsort(-uncertainties, kind="stable")
    by_err = np.argsort(-errors, kind="stable")

    def curve(order):
        values = np.empty(AUSE_FRACTIONS.size)
        sorted_errors = errors[order]
        for j, frac in enumerate(AUSE_FRACTIONS):
            removed = int(np.ceil(frac * n))
            remaining = sorted_errors[removed:]
            values[j] = remaining.mean() / base if remaining.size else 0.0
        return values

    return SparsificationCurve(AUSE_FRACTIONS.copy(), curve(by_unc), curve(by_err))


def ause(errors: np.ndarray, uncertainties: np.ndarray) -> float:
    """Area between the model and oracle sparsification curves (trapezoid
    rule over 1% steps).  0 means uncertainty ranks errors perfectly."""
    curves = sparsification_curves(errors, uncertainties)
    if curves.degenerate:
        return 0.0
    return float(np.trapezoid(curves.model_curve - curves.oracle_curve,
                              curves.fractions))


# -- calibration -----------------------------------------------------------------

def ece_classification(confidences: np.ndarray, correct: np.ndarray) -> float:
    """Expected calibration error over 10 equal-width confidence bins on
    (0, 1]: sum_b (n_b / N) * |accuracy_b - confidence_b|."""
    confidences = np.asarray(confidences, dtype=np.float64)
    correct = np.asarray(correct, dtype=np.float64)
    if np.any(confidences < 0) or np.any(confidences > 1):
        raise ContractError("confidences must lie in [0, 1]")
    n = confidences.size
    if n == 0:
        return 0.0
    bins = np.clip(np.ceil(confidences * CLASSIFICATION_ECE_BINS).astype(int) - 1,
                   0, CLASSIFICATION_ECE_BINS - 1)
    total = 0.0
    for b in range(CLASSIFICATION_ECE_BINS):
        mask = bins == b
        if not mask.any():
            continue
        gap = abs(correct[mask].mean() - confidences[mask].mean())
        total += mask.sum() / n * gap
    return float(total)


def coverage_curve(cdf_values: np.ndarray,
                   levels: int = REGRESSION_ECE_LEVELS) -> tuple[np.ndarray, np.ndarray]:
    """Expected coverage levels p_j = j/levels and empirical frequencies
    q_j = (1/N) * #{F_i(y_i) <= p_j}."""
    cdf_values = np.asarray(cdf_values, dtype=np.float64)
    if np.any(cdf_values < 0) or np.any(cdf_values > 1):
        raise ContractError("CDF values must lie in [0, 1]")
    p = np.arange(1, levels + 1) / levels
    q = (cdf_values[None, :] <= p[:, None]).mean(axis=1)
    return p, q


def ece_regression(cdf_values: np.ndarray,
                   levels: int = REGRESSION_ECE_LEVELS) -> float:
    """Calibration error of predicted CDFs at the true targets:
    sqrt(mean_j (p_j - q_j)^2) over expected-coverage levels j/levels."""
    p, q = coverage_curve(cdf_values, levels)
    return float(np.sqrt(np.mean((p - q) ** 2)))


def laplace_cdf(y: np.ndarray, mu: np.ndarray, b: np.ndarray) -> np.ndarray:
    """CDF of Laplace(mu, b) evaluated at y."""
    z = (np.asarray(y, dtype=np.float64) - mu) / b
    return np.where(z < 0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))


def empirical_cdf_at(samples: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Fraction of samples (axis 0) at or below y, per remaining index."""
    return (samples <= y[None]).mean(axis=0)


# -- distribution separation -----------------------------------------------------

def js_distance(u_inlier: np.ndarray, u_outlier: np.ndarray,
                bins: int = JS_DEFAULT_BINS) -> float:
    """Jensen-Shannon distance (base-2 logs, in [0, 1]) between histograms of
    two uncertainty samples over their joint range."""
    a = np.asarray(u_inlier, dtype=np.float64)
    b = np.asarray(u_outlier, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ContractError("both samples must be nonempty")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        return 0.0
    p, _ = np.histogram(a, bins=bins, range=(lo, hi))
    q, _ = np.histogram(b, bins=bins, range=(lo, hi))
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(r, s):
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(r > 0, r * np.log2(r / s), 0.0)
        return terms.sum()

    divergence = 0.5 * kl(p, m) + 0.5 * kl(q, m)
    return float(np.sqrt(min(max(divergence, 0.0), 1.0)))


# -- predictive metrics ----------------------------------------------------------

def regression_metrics(predictions: np.ndarray, targets: np.ndarray) -> dict:
    pred = np.asarray(predictions, dtype=np.float64).ravel()
    y = np.asarray(targets, dtype=np.float64).ravel()
    if pred.shape != y.shape:
        raise ContractError("predictions and targets must have matching length")
    out = {"rmse": float(np.sqrt(np.mean((pred - y) ** 2)))}

    pos = y > 0
    out["rel_excluded"] = int((~pos).sum())
    out["rel"] = float(np.mean(np.abs(pred[pos] - y[pos]) / y[pos])) if pos.any() else float("nan")

    pos_pair = pos & (pred > 0)
    out["log10_excluded"] = int((~pos_pair).sum())
    out["log10"] = (
        float(np.mean(np.abs(np.log10(pred[pos_pair]) - np.log10(y[pos_pair]))))
        if pos_pair.any() else float("nan")
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(pred / y, y / pred)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    for k in (1, 2, 3):
        out[f"delta{k}"] = float(np.mean(ratio < 1.25 ** k))
    return out


def classification_metrics(probs: np.ndarray, labels: np.ndarray) -> dict:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or probs.shape[0] != labels.size:
        raise ContractError("probs must be (n, k) matching labels")
    n, k = probs.shape
    pred = probs.argmax(axis=1)

    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)

    accuracy = float(np.trace(confusion) / n)
    recalls = []
    for c in range(k):
        support = confusion[c].sum()
        if support:
            recalls.append(confusion[c, c] / support)
    classwise = float(np.mean(recalls)) if recalls else float("nan")

    ious = []
    for c in range(k):
        tp = confusion[c, c]
        denom = confusion[c].sum() + confusion[:, c].sum() - tp
        if denom:
            ious.append(tp / denom)
    mean_iou = float(np.mean(ious)) if ious else float("nan")

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), labels] = 1.0
    brier = float(np.mean(np.mean((probs - onehot) ** 2, axis=1)))
    return {"accuracy": accuracy, "classwise_accuracy": classwise,
            "mean_iou": mean_iou, "brier": brier}


def predictive_metrics(predictions, targets, task: str) -> dict:
    if task == "regression":
        return regression_metrics(predictions, targets)
    if task == "classification":
        return classification_metrics(predictions, targets)
    raise ContractError(f"unknown task {task!r}")


# -- report ----------------------------------------------------------------------

@dataclass
class EvalReport:
    """Metrics for one model/dataset pair; only task-appropriate fields are
    populated.  bald values are nats, js distances base-2."""

    task: str = ""
    rmse: float | None = None
    rel: float | None = None
    rel_excluded: int | None = None
    log10: float | None = None
    log10_excluded: int | None = None
    delta1: float | None = None
    delta2: float | None = None
    delta3: float | None = None
    accuracy: float | None = None
    classwise_accuracy: float | None = None
    mean_iou: float | None = None
    brier: float | None = None
    ece: float | None = None
    ause: float | None = None
    mean_epistemic: float | None = None
    mean_aleatoric: float | None = None
    mean_total: float | None = None
    uncertainty_available: bool = True
    runtime_seconds: float | None = None

    def to_kv(self) -> dict:
        out = {"units.bald": "nats", "units.js": "base2"}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                out[f.name] = value
        return out

    @classmethod
    def from_kv(cls, entries: dict) -> "EvalReport":
        report = cls()
        for f in fields(cls):
            if f.name not in entries:
                continue
            raw = entries[f.name]
            if f.name == "task":
                report.task = raw
            elif f.name == "uncertainty_available":
                report.uncertainty_available = raw == "True"
            elif f.name.endswith("_excluded"):
                setattr(report, f.name, int(raw))
            else:
                setattr(report, f.name, float(raw))
        return report


def save_curve_csv(path: str, header: list[str], columns: list[np.ndarray]) -> None:
    """Write aligned curve columns (fractions/levels first) as CSV."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])
