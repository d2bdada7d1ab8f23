"""Dense f64 tensors with reverse-mode gradients.

Small tape-based engine in the micrograd style, but over numpy arrays so
batched math runs at numpy speed.  The op set is exactly what the layers and
losses in this package need: elementwise arithmetic with broadcasting,
matmul, exp/log/abs/relu, full reductions, stable (log-)softmax, and basic
slicing.  Everything is float64.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` over the axes numpy broadcast to reach `grad.shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A numpy array plus an optional gradient buffer and a backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    # make `ndarray <op> Tensor` defer to the reflected methods below
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents = ()

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _lift(value) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    def _make(self, data, parents, backward) -> "Tensor":
        out = Tensor(data)
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = Tensor._lift(other)
        data = self.data + other.data

        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))

        return self._make(data, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = Tensor._lift(other)
        data = self.data - other.data

        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape))

        return self._make(data, (self, other), backward)

    def __rsub__(self, other):
        return Tensor._lift(other) - self

    def __neg__(self):
        return self._make(-self.data, (self,), lambda g: (-g,))

    def __mul__(self, other):
        other = Tensor._lift(other)
        data = self.data * other.data
        a, b = self.data, other.data

        def backward(g):
            return (_unbroadcast(g * b, self.shape), _unbroadcast(g * a, other.shape))

        return self._make(data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._lift(other)
        data = self.data / other.data
        a, b = self.data, other.data

        def backward(g):
            return (
                _unbroadcast(g / b, self.shape),
                _unbroadcast(-g * a / (b * b), other.shape),
            )

        return self._make(data, (self, other), backward)

    def __matmul__(self, other):
        other = Tensor._lift(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ContractError("matmul expects 2-D operands")
        data = self.data @ other.data
        a, b = self.data, other.data

        def backward(g):
            return (g @ b.T, a.T @ g)

        return self._make(data, (self, other), backward)

    # -- elementwise functions ------------------------------------------------

    def exp(self):
        data = np.exp(self.data)
        return self._make(data, (self,), lambda g: (g * data,))

    def log(self):
        a = self.data
        return self._make(np.log(a), (self,), lambda g: (g / a,))

    def abs(self):
        sign = np.sign(self.data)
        return self._make(np.abs(self.data), (self,), lambda g: (g * sign,))

    def relu(self):
        mask = self.data > 0
        return self._make(np.where(mask, self.data, 0.0), (self,), lambda g: (g * mask,))

    # -- reductions -----------------------------------------------------------

    def sum(self):
        data = self.data.sum()
        shape = self.shape

        def backward(g):
            return (np.broadcast_to(g, shape).astype(np.float64),)

        return self._make(np.asarray(data), (self,), backward)

    def mean(self):
        n = self.data.size
        data = self.data.mean()
        shape = self.shape

        def backward(g):
            return (np.broadcast_to(g / n, shape).astype(np.float64),)

        return self._make(np.asarray(data), (self,), backward)

    # -- softmax family (last axis, numerically stable) ------------------------

    def log_softmax(self):
        z = self.data - self.data.max(axis=-1, keepdims=True)
        logsumexp = np.log(np.exp(z).sum(axis=-1, keepdims=True))
        data = z - logsumexp
        softmax = np.exp(data)

        def backward(g):
            return (g - softmax * g.sum(axis=-1, keepdims=True),)

        return self._make(data, (self,), backward)

    def softmax(self):
        z = self.data - self.data.max(axis=-1, keepdims=True)
        e = np.exp(z)
        data = e / e.sum(axis=-1, keepdims=True)

        def backward(g):
            inner = (g * data).sum(axis=-1, keepdims=True)
            return (data * (g - inner),)

        return self._make(data, (self,), backward)

    # -- slicing ---------------------------------------------------------------

    def __getitem__(self, key):
        data = self.data[key]
        shape = self.shape

        def backward(g):
            full = np.zeros(shape, dtype=np.float64)
            full[key] = g
            return (full,)

        return self._make(data, (self,), backward)

    # -- autodiff ---------------------------------------------------------------

    def backward(self):
        """Accumulate d(self)/d(leaf) into `.grad` of every requires-grad leaf.

        `self` must be scalar (a taped loss)."""
        if self.data.size != 1:
            raise ContractError("backward() requires a scalar loss")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg

    def zero_grad(self):
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"
