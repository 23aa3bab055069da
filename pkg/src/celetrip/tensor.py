"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records its parents and a backward closure; calling
:meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order and accumulates exact gradients into ``.grad``.
Broadcasting follows numpy rules and gradients are summed back to the
operand shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class TensorError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "op", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.array(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"
        self.name = name

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self) -> None:
        self.grad = None

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(astensor(other)))

    def __rsub__(self, other):
        return add(astensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TensorError("division by a tensor is not supported")
        return mul(self, 1.0 / float(other))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if grad is None:
            if self.value.size != 1:
                raise TensorError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.value)
        order = _topological(self)
        for node in order:
            if node._parents:
                node.grad = None
        _accumulate(self, np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if g.shape != t.value.shape:
        raise TensorError(f"gradient shape {g.shape} does not match value shape {t.value.shape}")
    t.grad = g.copy() if t.grad is None else t.grad + g


def astensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(value: np.ndarray, parents: Sequence[Tensor], backward, op: str) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite output from {op}")
    out = Tensor.__new__(Tensor)
    out.value = value
    out.grad = None
    out.name = None
    out.op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise TensorError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))
    return _result(a.value + b.value, (a, b), backward, "add")


def neg(a) -> Tensor:
    a = astensor(a)
    return _result(-a.value, (a,), lambda g: _accumulate(a, -g), "neg")


def mul(a, b) -> Tensor:
    """Elementwise (Hadamard) product with broadcasting."""
    a, b = astensor(a), astensor(b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.value, a.shape))
        _accumulate(b, _unbroadcast(g * a.value, b.shape))
    return _result(a.value * b.value, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    a, b = astensor(a), astensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise TensorError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.value.T)
        if b.requires_grad:
            _accumulate(b, a.value.T @ g)
    return _result(a.value @ b.value, (a, b), backward, "matmul")


def transpose(a) -> Tensor:
    a = astensor(a)
    if a.ndim != 2:
        raise TensorError(f"transpose needs a matrix, got shape {a.shape}")
    return _result(a.value.T.copy(), (a,), lambda g: _accumulate(a, g.T), "transpose")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [astensor(t) for t in tensors]
    if not ts:
        raise TensorError("concat of nothing")
    try:
        value = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError:
        raise TensorError(f"concat: incompatible shapes {[t.shape for t in ts]} along axis {axis}") from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def backward(g):
        for t, lo, hi in zip(ts, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                _accumulate(t, np.take(g, np.arange(lo, hi), axis=axis))
    return _result(value, ts, backward, "concat")


def gather_rows(a, idx) -> Tensor:
    a = astensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.ndim != 2:
        raise TensorError(f"gather_rows needs a matrix, got shape {a.shape}")
    if idx.size and (idx.min() < -a.shape[0] or idx.max() >= a.shape[0]):
        raise TensorError(f"gather_rows: index out of range for {a.shape[0]} rows")

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        _accumulate(a, full)
    return _result(a.value[idx], (a,), backward, "gather_rows")


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = astensor(a)
    value = np.asarray(a.value.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.shape).copy())
    return _result(value, (a,), backward, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = astensor(a)
    n = a.value.size if axis is None else a.shape[axis]
    if n == 0:
        raise TensorError("mean over an empty axis")
    return mul(tsum(a, axis, keepdims), 1.0 / n)


# ---------------------------------------------------------------- activations

def sigmoid(a) -> Tensor:
    a = astensor(a)
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return _result(s, (a,), lambda g: _accumulate(a, g * s * (1.0 - s)), "sigmoid")


def tanh(a) -> Tensor:
    a = astensor(a)
    t = np.tanh(a.value)
    return _result(t, (a,), lambda g: _accumulate(a, g * (1.0 - t * t)), "tanh")


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = astensor(a)
    d = np.where(a.value > 0, 1.0, slope)
    return _result(a.value * d, (a,), lambda g: _accumulate(a, g * d), "leaky_relu")


def elu(a, alpha: float = 1.0) -> Tensor:
    a = astensor(a)
    neg_part = alpha * np.expm1(np.minimum(a.value, 0.0))
    value = np.where(a.value > 0, a.value, neg_part)
    d = np.where(a.value > 0, 1.0, neg_part + alpha)
    return _result(value, (a,), lambda g: _accumulate(a, g * d), "elu")


def softmax(a, axis: int = -1) -> Tensor:
    a = astensor(a)
    z = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(a, s * (g - (g * s).sum(axis=axis, keepdims=True)))
    return _result(s, (a,), backward, "softmax")


def masked_softmax(a, mask, axis: int = -1) -> Tensor:
    """Softmax over the entries where ``mask`` is true; masked entries get 0."""
    a = astensor(a)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise TensorError(f"masked_softmax: mask shape {mask.shape} != {a.shape}")
    if not np.all(mask.any(axis=axis)):
        raise TensorError("masked_softmax: a row has no unmasked entry")
    big = np.where(mask, a.value, -np.inf)
    z = np.where(mask, a.value - big.max(axis=axis, keepdims=True), 0.0)
    e = np.where(mask, np.exp(z), 0.0)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        _accumulate(a, s * (g - (g * s).sum(axis=axis, keepdims=True)))
    return _result(s, (a,), backward, "masked_softmax")


def max_rows(a) -> Tensor:
    """Elementwise maximum over the rows of a matrix, returned as a 1 x D row."""
    a = astensor(a)
    if a.ndim != 2 or a.shape[0] == 0:
        raise TensorError(f"max_rows needs a non-empty matrix, got shape {a.shape}")
    arg = a.value.argmax(axis=0)
    cols = np.arange(a.shape[1])

    def backward(g):
        full = np.zeros_like(a.value)
        full[arg, cols] = g[0]
        _accumulate(a, full)
    return _result(a.value[arg, cols][None, :], (a,), backward, "max_rows")


_COS_DELTA = 1e-12


def cosine_similarity(m, v) -> Tensor:
    """Cosine of every row of ``m`` (N x D) with the row vector ``v`` (1 x D), as N x 1.

    Norms are smoothed as sqrt(|x|^2 + 1e-12) so zero rows give 0, not NaN.
    """
    m, v = astensor(m), astensor(v)
    if m.ndim != 2 or v.shape != (1, m.shape[1]):
        raise TensorError(f"cosine_similarity: incompatible shapes {m.shape} and {v.shape}")
    dots = m.value @ v.value[0]
    p = np.sqrt((m.value ** 2).sum(axis=1) + _COS_DELTA)
    q = float(np.sqrt((v.value ** 2).sum() + _COS_DELTA))
    value = (dots / (p * q))[:, None]

    def backward(g):
        g = g[:, 0]
        if m.requires_grad:
            gm = (g / (p * q))[:, None] * v.value - (g * dots / (p ** 3 * q))[:, None] * m.value
            _accumulate(m, gm)
        if v.requires_grad:
            gv = ((g / (p * q)) @ m.value) - (g * dots / (p * q ** 3)).sum() * v.value[0]
            _accumulate(v, gv[None, :])
    return _result(value, (m, v), backward, "cosine_similarity")


# ---------------------------------------------------------------- loss

BCE_CLIP = 1e-7


def bce_loss(probs, labels, pos_weight: float = 1.0) -> Tensor:
    """Mean binary cross-entropy; probabilities are clipped to [1e-7, 1 - 1e-7].

    ``pos_weight`` scales the terms of positive labels (1.0 = unweighted).
    """
    p = astensor(probs)
    y = np.asarray(labels, dtype=np.float64).reshape(p.shape)
    k = p.value.size
    if k == 0:
        raise TensorError("bce_loss over zero predictions")
    pc = np.clip(p.value, BCE_CLIP, 1.0 - BCE_CLIP)
    w = np.where(y > 0, pos_weight, 1.0)
    value = np.asarray(-(w * (y * np.log(pc) + (1 - y) * np.log(1 - pc))).sum() / k)
    inside = (p.value >= BCE_CLIP) & (p.value <= 1.0 - BCE_CLIP)

    def backward(g):
        _accumulate(p, g * inside * (-(w * (y / pc - (1 - y) / (1 - pc))) / k))
    return _result(value, (p,), backward, "bce_loss")


# ---------------------------------------------------------------- optimiser

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray | None],
              state: AdamState) -> Mapping[str, np.ndarray]:
    """One bias-corrected Adam update, applied in place to the arrays in ``params``.

    Parameters whose gradient is ``None`` are left untouched.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, value in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


class Adam:
    """Adam over a name -> Tensor mapping, reading each tensor's ``.grad``."""

    def __init__(self, params: Mapping[str, Tensor], lr: float = 1e-3, state: AdamState | None = None):
        self.params = dict(params)
        self.state = state if state is not None else AdamState(lr=lr)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        adam_step({k: p.value for k, p in self.params.items()},
                  {k: p.grad for k, p in self.params.items()}, self.state)


def parameters(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if t.requires_grad]
