"""Training objectives.

All functions accept Tensors or plain arrays (auto-lifted) and return a
scalar Tensor so they can sit on the tape during training or be evaluated
numerically in tests via `.item()`.

The two distillation objectives are the numerically stable log-variance
forms: Laplace for regression targets,

    mean_i,t [ sqrt(2) * exp(-s_i/2) * |y_ti - mu_i| + s_i/2 ],

and diagonal Gaussian on logits for classification targets,

    mean_i,t [ 0.5 * exp(-s_i) * (y_ti - mu_i)^2 + 0.5 * s_i ].

Targets may carry a leading sample axis; broadcasting against (batch, dim)
parameters handles the per-sample sum and the double mean at once.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .rng import RngState
from .tensor import Tensor

SQRT2 = float(np.sqrt(2.0))


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def mae_loss(pred, target) -> Tensor:
    return (_lift(pred) - np.asarray(target, dtype=np.float64)).abs().mean()


def mse_loss(pred, target) -> Tensor:
    diff = _lift(pred) - np.asarray(target, dtype=np.float64)
    return (diff * diff).mean()


def _one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean cross-entropy against integer labels."""
    logits = _lift(logits)
    n, k = logits.shape
    onehot = _one_hot(labels, k)
    return -(logits.log_softmax() * onehot).sum() * (1.0 / n)


def soft_cross_entropy(logits, target_probs) -> Tensor:
    """Mean cross-entropy against a soft target distribution."""
    logits = _lift(logits)
    n = logits.shape[0]
    probs = np.asarray(target_probs, dtype=np.float64)
    return -(logits.log_softmax() * probs).sum() * (1.0 / n)


def laplace_nll(mu, logvar, targets) -> Tensor:
    """Heteroscedastic Laplace negative log likelihood (stable form).

    Used both as the aleatoric teacher loss (targets = ground truth) and as
    the regression distillation loss (targets = sampled predictions with a
    leading sample axis)."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise ContractError("empty target set")
    mu, logvar = _lift(mu), _lift(logvar)
    resid = (targets - mu).abs()
    return (resid * (logvar * -0.5).exp() * SQRT2 + logvar * 0.5).mean()


def logit_gaussian_nll(mu, logvar, targets) -> Tensor:
    """Diagonal Gaussian negative log likelihood on logits (stable form)."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.size == 0:
        raise ContractError("empty target set")
    mu, logvar = _lift(mu), _lift(logvar)
    resid = targets - mu
    inv_var = (logvar * -1.0).exp()
    return (resid * resid * inv_var * 0.5 + logvar * 0.5).mean()


def mc_logit_cross_entropy(mu, logvar, labels, rng: RngState,
                           n_draws: int = 10) -> Tensor:
    """Aleatoric classification loss: average cross-entropy over noisy logits
    z = mu + exp(s/2) * eps, eps ~ N(0, I)."""
    mu, logvar = _lift(mu), _lift(logvar)
    std = (logvar * 0.5).exp()
    total = None
    for _ in range(n_draws):
        eps = rng.normal(mu.shape)
        term = softmax_cross_entropy(mu + std * eps, labels)
        total = term if total is None else total + term
    return total * (1.0 / n_draws)
