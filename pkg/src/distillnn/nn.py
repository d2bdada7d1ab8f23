"""Layers and the MLP container used for both teacher and student networks.

Layer kinds: dense, relu, dropout, softmax.  Dropout is inverted (kept units
scaled by 1/(1-p) at mask time) so a plain eval forward needs no weight
rescaling; masks are drawn fresh on every forward call, which is what makes
MC-dropout inference work by simply leaving dropout active in eval mode.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, NumericError
from .rng import RngState
from .tensor import Tensor


class Dense:
    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng: RngState | None = None):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        if rng is None:
            w = np.zeros((in_dim, out_dim))
        else:
            # He-style fan-in scaling, fine for relu stacks at this scale
            w = rng.normal((in_dim, out_dim)) * np.sqrt(2.0 / in_dim)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def parameters(self):
        return [self.weight, self.bias]

    def apply(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise DimensionError(
                f"dense expects {self.in_dim} input features, got {x.shape[-1]}"
            )
        return x @ self.weight + self.bias

    def apply_np(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.in_dim:
            raise DimensionError(
                f"dense expects {self.in_dim} input features, got {x.shape[-1]}"
            )
        return x @ self.weight.data + self.bias.data


class Relu:
    kind = "relu"

    def parameters(self):
        return []

    def apply(self, x: Tensor) -> Tensor:
        return x.relu()

    def apply_np(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0.0)


class Dropout:
    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)

    def parameters(self):
        return []

    def mask(self, shape, rng: RngState) -> np.ndarray:
        keep = rng.uniform(size=shape) >= self.rate
        return keep / (1.0 - self.rate)

    def apply(self, x: Tensor, rng: RngState) -> Tensor:
        return x * self.mask(x.shape, rng)

    def apply_np(self, x: np.ndarray, rng: RngState) -> np.ndarray:
        return x * self.mask(x.shape, rng)


class Softmax:
    kind = "softmax"

    def parameters(self):
        return []

    def apply(self, x: Tensor) -> Tensor:
        return x.softmax()

    def apply_np(self, x: np.ndarray) -> np.ndarray:
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)


class MlpModel:
    """An ordered layer stack with train/eval modes.

    `dropout_active_in_eval=True` keeps dropout sampling during eval-mode
    forwards, which is the MC-dropout inference switch.  Toggling modes never
    touches parameters.
    """

    def __init__(self, layers: list, dropout_active_in_eval: bool = False):
        self.layers = list(layers)
        self.mode = "train"
        self.dropout_active_in_eval = dropout_active_in_eval

    def train(self) -> "MlpModel":
        self.mode = "train"
        return self

    def eval(self) -> "MlpModel":
        self.mode = "eval"
        return self

    @property
    def dropout_active(self) -> bool:
        return self.mode == "train" or self.dropout_active_in_eval

    def parameters(self) -> list[Tensor]:
        params = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def _check_input(self, x: np.ndarray, rng):
        if not np.isfinite(x).all():
            raise NumericError("non-finite values in forward input")
        if rng is None and self.dropout_active and any(
            isinstance(l, Dropout) for l in self.layers
        ):
            raise ContractError("rng is required while dropout layers are active")

    def forward(self, x, rng: RngState | None = None) -> Tensor:
        """Taped forward pass; use for training."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        self._check_input(x.data, rng)
        out = x
        for layer in self.layers:
            if isinstance(layer, Dropout):
                out = layer.apply(out, rng) if self.dropout_active else out
            else:
                out = layer.apply(out)
        return out

    def forward_np(self, x: np.ndarray, rng: RngState | None = None) -> np.ndarray:
        """Tape-free forward pass; use for inference and sampling."""
        x = np.asarray(x, dtype=np.float64)
        self._check_input(x, rng)
        out = x
        for layer in self.layers:
            if isinstance(layer, Dropout):
                out = layer.apply_np(out, rng) if self.dropout_active else out
            else:
                out = layer.apply_np(out)
        return out


def build_mlp(
    input_dim: int,
    hidden: tuple,
    output_dim: int,
    rng: RngState,
    dropout_rate: float | None = None,
    zero_init_head: bool = False,
) -> MlpModel:
    """Stack dense/relu(/dropout) blocks ending in a linear head.

    `zero_init_head` starts the final layer at zero so early outputs (means
    and log variances alike) sit at 0; this keeps the heteroscedastic losses
    well-behaved during the first optimizer steps."""
    layers: list = []
    prev = input_dim
    for width in hidden:
        layers.append(Dense(prev, width, rng))
        layers.append(Relu())
        if dropout_rate is not None:
            layers.append(Dropout(dropout_rate))
        prev = width
    head = Dense(prev, output_dim, rng)
    if zero_init_head:
        head.weight.data[:] = 0.0
    layers.append(head)
    return MlpModel(layers)


def copy_compatible_parameters(src: MlpModel, dst: MlpModel) -> int:
    """Copy dense parameters from `src` into `dst`, pairing dense layers in
    order and ignoring dropout.  When the final widths differ (a mean-only
    source feeding a [mu, logvar] head), the overlapping leading columns are
    copied and the rest keeps its initialization.  Returns the number of
    dense layers (fully or partially) copied."""
    src_dense = [l for l in src.layers if isinstance(l, Dense)]
    dst_dense = [l for l in dst.layers if isinstance(l, Dense)]
    copied = 0
    for s, d in zip(src_dense, dst_dense):
        if s.in_dim != d.in_dim:
            raise ContractError(
                f"incompatible dense layers: {s.in_dim}->{s.out_dim} vs "
                f"{d.in_dim}->{d.out_dim}"
            )
        cols = min(s.out_dim, d.out_dim)
        d.weight.data[:, :cols] = s.weight.data[:, :cols]
        d.bias.data[:cols] = s.bias.data[:cols]
        copied += 1
    return copied
