"""Synthetic data: heteroscedastic 1-D regression and 2-D Gaussian-blob
classification, with splits designed to probe uncertainty.

Regression draws x uniformly on [-3, 3] minus the interval (-0.5, 0.5) for
train/test; the excluded interval is its own "gap" split (epistemic probe)
and [3, 5] is the "shift" split (extrapolation probe).  Targets follow
y = x*sin(x) + sigma(x)*eps with sigma(x) = 0.1 + 0.2*|x|, and the
generator-known sigma is recorded so noise-recovery tests have an exact
reference.

Classification places K isotropic blobs (std 0.35) on the unit circle.
Held-out classes are dropped from training but kept in the test split; the
"gap" split contains only held-out classes and "shift" translates every
center by (1.5, 1.5).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .rng import RngState

GAP_LO, GAP_HI = -0.5, 0.5
TRAIN_LO, TRAIN_HI = -3.0, 3.0
SHIFT_LO, SHIFT_HI = 3.0, 5.0
BLOB_STD = 0.35
SHIFT_OFFSET = np.array([1.5, 1.5])


@dataclass
class SplitSpec:
    kind: str = "train"  # train | test | shift | gap
    held_out_classes: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("train", "test", "shift", "gap"):
            raise ContractError(f"unknown split kind {self.kind!r}")
        self.held_out_classes = tuple(sorted(set(self.held_out_classes)))


@dataclass
class AugmentationSpec:
    enabled: bool = True
    jitter_range: float = 0.2

    def __post_init__(self):
        if self.jitter_range < 0:
            raise ContractError("jitter_range must be >= 0")


@dataclass
class RegressionDataset:
    x: np.ndarray          # (n,)
    y: np.ndarray          # (n,)
    true_sigma: np.ndarray  # (n,), generator-known noise std

    @property
    def features(self) -> np.ndarray:
        return self.x[:, None]

    def __len__(self) -> int:
        return self.x.size


@dataclass
class ClassificationDataset:
    x: np.ndarray       # (n, 2)
    labels: np.ndarray  # (n,) ints in [0, k)
    k: int

    @property
    def features(self) -> np.ndarray:
        return self.x

    def __len__(self) -> int:
        return self.labels.size


def true_regression_mean(x: np.ndarray) -> np.ndarray:
    return x * np.sin(x)


def true_regression_sigma(x: np.ndarray) -> np.ndarray:
    return 0.1 + 0.2 * np.abs(x)


def _regression_x(n: int, split: SplitSpec, rng: RngState) -> np.ndarray:
    if split.kind in ("train", "test"):
        # uniform over [-3, -0.5] u [0.5, 3]: map a single uniform draw
        left = GAP_LO - TRAIN_LO
        total = left + (TRAIN_HI - GAP_HI)
        u = rng.uniform(0.0, total, n)
        return np.where(u < left, TRAIN_LO + u, GAP_HI + (u - left))
    if split.kind == "gap":
        return rng.uniform(GAP_LO, GAP_HI, n)
    return rng.uniform(SHIFT_LO, SHIFT_HI, n)  # shift


def gen_regression(n: int, split: SplitSpec, noise_scale: float = 1.0
                   ) -> RegressionDataset:
    """Draw a regression split; `noise_scale=0` gives the noise-free variant."""
    if n < 1:
        raise ContractError("n must be >= 1")
    rng = RngState(split.seed).stream(f"regression-{split.kind}")
    x = _regression_x(n, split, rng)
    sigma = noise_scale * true_regression_sigma(x)
    y = true_regression_mean(x) + sigma * rng.normal(n)
    return RegressionDataset(x=x, y=y, true_sigma=sigma)


def blob_centers(k: int, shifted: bool = False) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(k) / k
    centers = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return centers + SHIFT_OFFSET if shifted else centers


def gen_classification(n: int, k: int, split: SplitSpec) -> ClassificationDataset:
    if k < 2 or n < k:
        raise ContractError("need n >= k >= 2")
    held = set(split.held_out_classes)
    if not all(0 <= c < k for c in held):
        raise ContractError("held_out_classes outside label range")
    if split.kind == "train":
        allowed = [c for c in range(k) if c not in held]
    elif split.kind == "gap":
        allowed = sorted(held)
    else:  # test, shift: all classes retained
        allowed = list(range(k))
    if not allowed:
        raise ContractError(f"no classes left for split {split.kind!r}")

    rng = RngState(split.seed).stream(f"classification-{split.kind}")
    labels = np.array(allowed)[np.arange(n) % len(allowed)]
    labels = labels[rng.permutation(n)]
    centers = blob_centers(k, shifted=split.kind == "shift")
    x = centers[labels] + BLOB_STD * rng.normal((n, 2))
    return ClassificationDataset(x=x, labels=labels, k=k)


def feature_scale(x: np.ndarray) -> np.ndarray:
    """Per-feature std of a training matrix, used to scale jitter."""
    return np.asarray(x, dtype=np.float64).std(axis=0)


def augment(x: np.ndarray, spec: AugmentationSpec, rng: RngState,
            scale=1.0) -> np.ndarray:
    """Bounded additive jitter: uniform noise in +-jitter_range*scale per
    feature.  Identity when disabled or when the range is zero."""
    if not spec.enabled or spec.jitter_range == 0.0:
        return x
    r = spec.jitter_range
    noise = rng.uniform(-r, r, np.shape(x)) * np.asarray(scale)
    return x + noise


# -- CSV import/export ---------------------------------------------------------

def save_regression_csv(ds: RegressionDataset, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x", "y", "true_sigma"])
        for row in zip(ds.x, ds.y, ds.true_sigma):
            writer.writerow([repr(float(v)) for v in row])


def load_regression_csv(path: str) -> RegressionDataset:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    return RegressionDataset(x=data[:, 0], y=data[:, 1], true_sigma=data[:, 2])


def save_classification_csv(ds: ClassificationDataset, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["x0", "x1", "label"])
        for point, label in zip(ds.x, ds.labels):
            writer.writerow([repr(float(point[0])), repr(float(point[1])), int(label)])


def load_classification_csv(path: str, k: int | None = None) -> ClassificationDataset:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    data = np.atleast_2d(data)
    labels = data[:, 2].astype(np.int64)
    return ClassificationDataset(
        x=data[:, :2], labels=labels, k=k if k is not None else int(labels.max()) + 1
    )
