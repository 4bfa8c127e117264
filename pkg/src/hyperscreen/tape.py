"""Reverse-mode differentiation over numpy arrays.

A ``Node`` wraps an array value and remembers how it was computed. Calling
``backward()`` on a scalar node walks the recorded graph in reverse topological
order and accumulates ``grad`` on every node that requires it. The op set is the
closed set the hyperbolic objective needs: arithmetic, matmul, reductions,
exp/log/sqrt, hyperbolic and inverse trigonometric functions, hinges, clamps,
log-softmax, suffix log-sum-exp and the exponential map at the origin.
"""

from collections.abc import Callable, Sequence
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

Array = NDArray[np.float64]
BackwardFn = Callable[[Array], Sequence[Array | None]]

TAYLOR_CUTOFF = 1e-8
SERIES_CUTOFF = 1e-3


class Node:
    """A value in the computation graph."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        value: ArrayLike,
        parents: tuple["Node", ...] = (),
        backward: BackwardFn | None = None,
        requires_grad: bool = False,
    ) -> None:
        self.value: Array = np.asarray(value, dtype=np.float64)
        self.grad: Array | None = None
        self._parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    def __repr__(self) -> str:
        return f"Node(shape={self.value.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into ``grad`` of every upstream node."""
        if self.value.size != 1:
            raise ValueError("backward() needs a scalar output")
        order: list[Node] = []
        visited: set[int] = set()
        stack: list[tuple[Node, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, g in zip(node._parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                g = _unbroadcast(np.asarray(g, dtype=np.float64), parent.value.shape)
                parent.grad = g if parent.grad is None else parent.grad + g

    # arithmetic

    def __add__(self, other: "Node | ArrayLike") -> "Node":
        o = as_node(other)
        return Node(self.value + o.value, (self, o), lambda g: (g, g))

    __radd__ = __add__

    def __sub__(self, other: "Node | ArrayLike") -> "Node":
        o = as_node(other)
        return Node(self.value - o.value, (self, o), lambda g: (g, -g))

    def __rsub__(self, other: "Node | ArrayLike") -> "Node":
        return as_node(other) - self

    def __mul__(self, other: "Node | ArrayLike") -> "Node":
        o = as_node(other)
        a, b = self.value, o.value
        return Node(a * b, (self, o), lambda g: (g * b, g * a))

    __rmul__ = __mul__

    def __truediv__(self, other: "Node | ArrayLike") -> "Node":
        o = as_node(other)
        a, b = self.value, o.value
        return Node(a / b, (self, o), lambda g: (g / b, -g * a / (b * b)))

    def __rtruediv__(self, other: "Node | ArrayLike") -> "Node":
        return as_node(other) / self

    def __neg__(self) -> "Node":
        return Node(-self.value, (self,), lambda g: (-g,))

    def __matmul__(self, other: "Node | ArrayLike") -> "Node":
        o = as_node(other)
        a, b = self.value, o.value
        if a.ndim != 2 or b.ndim not in (1, 2):
            raise ValueError("matmul supports (m, k) @ (k,) and (m, k) @ (k, n)")

        def backward(g: Array) -> tuple[Array, Array]:
            if b.ndim == 1:
                return np.outer(g, b), a.T @ g
            return g @ b.T, a.T @ g

        return Node(a @ b, (self, o), backward)

    def __getitem__(self, index: Any) -> "Node":
        shape = self.value.shape

        items = index if isinstance(index, tuple) else (index,)
        fancy = any(isinstance(i, (list, np.ndarray)) for i in items)

        def backward(g: Array) -> tuple[Array]:
            out = np.zeros(shape, dtype=np.float64)
            if fancy:
                np.add.at(out, index, g)
            else:
                out[index] += g
            return (out,)

        return Node(self.value[index], (self,), backward)

    @property
    def T(self) -> "Node":  # noqa: N802
        return Node(self.value.T, (self,), lambda g: (g.T,))


def as_node(x: "Node | ArrayLike") -> Node:
    return x if isinstance(x, Node) else Node(x)


def constant(x: ArrayLike) -> Node:
    """A leaf that never receives a gradient."""
    return Node(x)


def variable(x: ArrayLike) -> Node:
    """A leaf whose gradient is collected by ``backward``."""
    return Node(np.array(x, dtype=np.float64), requires_grad=True)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# reductions


def sum_(x: Node, axis: int | None = None) -> Node:
    shape = x.value.shape

    def backward(g: Array) -> tuple[Array]:
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Node(x.value.sum(axis=axis), (x,), backward)


# elementwise


def exp(x: Node) -> Node:
    out = np.exp(x.value)
    return Node(out, (x,), lambda g: (g * out,))


def log(x: Node) -> Node:
    a = x.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a)
    return Node(out, (x,), lambda g: (g / a,))


def sqrt(x: Node) -> Node:
    """Square root; the derivative at 0 is taken as 0."""
    out = np.sqrt(np.maximum(x.value, 0.0))

    def backward(g: Array) -> tuple[Array]:
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return Node(out, (x,), backward)


def sinh(x: Node) -> Node:
    a = x.value
    return Node(np.sinh(a), (x,), lambda g: (g * np.cosh(a),))


def cosh(x: Node) -> Node:
    a = x.value
    return Node(np.cosh(a), (x,), lambda g: (g * np.sinh(a),))


def asinh(x: Node) -> Node:
    a = x.value
    return Node(np.arcsinh(a), (x,), lambda g: (g / np.sqrt(1.0 + a * a),))


def tanh(x: Node) -> Node:
    out = np.tanh(x.value)
    return Node(out, (x,), lambda g: (g * (1.0 - out * out),))


def _inverse_trig_slope(a: Array) -> Array:
    inside = np.abs(a) < 1.0
    safe = np.where(inside, 1.0 - a * a, 1.0)
    return np.where(inside, 1.0 / np.sqrt(safe), 0.0)


def arcsin(x: Node) -> Node:
    """arcsin of an already clamped argument; zero slope at |x| = 1."""
    a = x.value
    return Node(np.arcsin(a), (x,), lambda g: (g * _inverse_trig_slope(a),))


def arccos(x: Node) -> Node:
    """arccos of an already clamped argument; zero slope at |x| = 1."""
    a = x.value
    return Node(np.arccos(a), (x,), lambda g: (-g * _inverse_trig_slope(a),))


def relu(x: Node) -> Node:
    """max(x, 0) with subgradient 0 at the kink."""
    a = x.value
    return Node(np.maximum(a, 0.0), (x,), lambda g: (g * (a > 0),))


def clamp(x: Node, lo: float | None = None, hi: float | None = None) -> Node:
    """Clip to [lo, hi]; no gradient flows through clipped entries."""
    a = x.value
    lo_v = -np.inf if lo is None else lo
    hi_v = np.inf if hi is None else hi
    passing = (a >= lo_v) & (a <= hi_v)
    return Node(np.clip(a, lo_v, hi_v), (x,), lambda g: (g * passing,))


# softmax family


def log_softmax(x: Node, axis: int = -1) -> Node:
    a = x.value
    out = a - logsumexp(a, axis=axis, keepdims=True)
    probs = np.exp(out)
    return Node(out, (x,), lambda g: (g - probs * g.sum(axis=axis, keepdims=True),))


def suffix_logsumexp(x: Node) -> Node:
    """Entry k is log(sum_{j >= k} exp(x_j)) of a 1-D node."""
    a = x.value
    if a.ndim != 1:
        raise ValueError("suffix_logsumexp expects a vector")
    n = a.shape[0]
    mask = np.triu(np.ones((n, n), dtype=bool))
    masked = np.where(mask, a[None, :], -np.inf)
    out = logsumexp(masked, axis=1)
    probs = np.where(mask, np.exp(masked - out[:, None]), 0.0)
    return Node(out, (x,), lambda g: (probs.T @ g,))


# manifold


def exp_map_origin(v: Node, kappa: float) -> Node:
    """Exponential map at the hyperboloid origin, returning (time, spatial...) rows.

    Output has one more trailing entry than ``v``: index 0 is the time coordinate.
    """
    a = v.value
    sqrt_k = float(np.sqrt(kappa))
    x = sqrt_k * np.linalg.norm(a, axis=-1)
    small = x < TAYLOR_CUTOFF
    safe_x = np.where(small, 1.0, x)
    f = np.where(small, 1.0 + x * x / 6.0, np.sinh(safe_x) / safe_x)
    time = np.cosh(x) / sqrt_k
    out = np.concatenate([time[..., None], f[..., None] * a], axis=-1)

    series = x < SERIES_CUTOFF
    safe_s = np.where(series, 1.0, x)
    # f'(x) / x, with its Taylor series near zero
    slope = np.where(
        series,
        1.0 / 3.0 + x**2 / 30.0 + x**4 / 840.0,
        (safe_s * np.cosh(safe_s) - np.sinh(safe_s)) / safe_s**3,
    )

    def backward(g: Array) -> tuple[Array]:
        gt = g[..., 0]
        gs = g[..., 1:]
        radial = kappa * slope * np.sum(gs * a, axis=-1) + gt * sqrt_k * f
        return (f[..., None] * gs + radial[..., None] * a,)

    return Node(out, (v,), backward)
