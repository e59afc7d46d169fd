"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tape` owns an append-only list of op records. Every :class:`Tensor` is a
handle to one record; arithmetic between tensors (and between a tensor and a
constant ``numpy`` array or Python scalar) records a new node whose adjoint rule is
stored as a closure. :meth:`Tape.backward` walks the records once, in reverse id
order, and returns a :class:`GradientMap` for the leaves.

Shape rule: operands must have identical shapes, or one of them must be a scalar
(shape ``()``). Anything else is a :class:`AutodiffError`; use
:func:`helmholtz.autodiff.broadcast_to` to expand explicitly.
"""

from collections.abc import Callable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from helmholtz.utils.logging import get_logger

logger = get_logger(__name__)

# Denominators with magnitude at or below this are rejected by checked division.
DIV_EPS = 1e-12

Backward = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class AutodiffError(ValueError):
    """Invalid use of the tape: shape mismatch, unsafe division, non-finite values."""


@dataclass(frozen=True)
class _Node:
    op: str
    parents: tuple[int, ...]
    backward: Backward | None


class Tape:
    """Append-only record of differentiable operations.

    A tape supports exactly one backward pass; build a fresh tape per evaluation.
    """

    def __init__(self) -> None:
        self._nodes: list[_Node] = []
        self._consumed = False

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, value: Any, name: str = "") -> "Tensor":
        """Register an independent variable."""
        data = np.array(value, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise AutodiffError(f"leaf '{name}' contains non-finite values")
        return self._append(f"leaf:{name}" if name else "leaf", data, (), None)

    def record(
        self,
        op: str,
        value: np.ndarray,
        parents: Sequence["Tensor"],
        backward: Backward,
    ) -> "Tensor":
        """Append an op node; ``backward`` maps the output adjoint to one adjoint per parent."""
        for parent in parents:
            if parent.tape is not self:
                raise AutodiffError(f"{op}: operands live on different tapes")
        data = np.asarray(value, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise AutodiffError(f"{op} produced non-finite values")
        return self._append(op, data, tuple(p.node_id for p in parents), backward)

    def _append(
        self, op: str, value: np.ndarray, parents: tuple[int, ...], backward: Backward | None
    ) -> "Tensor":
        if self._consumed:
            raise AutodiffError("tape already used for a backward pass")
        node_id = len(self._nodes)
        self._nodes.append(_Node(op=op, parents=parents, backward=backward))
        return Tensor(self, node_id, value)

    def backward(self, loss: "Tensor") -> "GradientMap":
        """Propagate d(loss)/d(node) from ``loss`` back to every leaf."""
        if loss.tape is not self:
            raise AutodiffError("loss was not recorded on this tape")
        if loss.shape != ():
            raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
        if self._consumed:
            raise AutodiffError("tape already used for a backward pass")

        grads: list[np.ndarray | None] = [None] * len(self._nodes)
        grads[loss.node_id] = np.ones((), dtype=np.float64)

        for node_id in range(loss.node_id, -1, -1):
            grad = grads[node_id]
            node = self._nodes[node_id]
            if grad is None or node.backward is None:
                continue
            parent_grads = node.backward(grad)
            for parent_id, parent_grad in zip(node.parents, parent_grads):
                if parent_grad is None:
                    continue
                current = grads[parent_id]
                grads[parent_id] = parent_grad if current is None else current + parent_grad

        self._consumed = True
        leaves = {
            i: grads[i]
            for i, node in enumerate(self._nodes)
            if node.backward is None and grads[i] is not None
        }
        logger.debug(f"backward over {loss.node_id + 1} nodes, {len(leaves)} leaves reached")
        return GradientMap(leaves)


class GradientMap(Mapping):
    """Leaf gradients keyed by :class:`Tensor`; unreached leaves read as zeros."""

    def __init__(self, grads: dict[int, np.ndarray]) -> None:
        self._grads = grads

    def __getitem__(self, tensor: "Tensor") -> np.ndarray:
        grad = self._grads.get(tensor.node_id)
        if grad is None:
            return np.zeros(tensor.shape, dtype=np.float64)
        return np.broadcast_to(grad, tensor.shape).copy()

    def __iter__(self) -> Iterator[int]:
        return iter(self._grads)

    def __len__(self) -> int:
        return len(self._grads)


Operand = "Tensor | np.ndarray | float"


class Tensor:
    """Handle to a value recorded on a :class:`Tape`."""

    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, tape: Tape, node_id: int, value: np.ndarray) -> None:
        self.tape = tape
        self.node_id = node_id
        self._value = value

    @property
    def value(self) -> np.ndarray:
        return self._value

    @property
    def shape(self) -> tuple[int, ...]:
        return self._value.shape

    @property
    def ndim(self) -> int:
        return self._value.ndim

    @property
    def size(self) -> int:
        return self._value.size

    def item(self) -> float:
        return float(self._value)

    def __repr__(self) -> str:
        return f"Tensor(id={self.node_id}, shape={self.shape})"

    def __add__(self, other: Any) -> "Tensor":
        return binary("add", self, other)

    def __radd__(self, other: Any) -> "Tensor":
        return binary("add", other, self)

    def __sub__(self, other: Any) -> "Tensor":
        return binary("sub", self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        return binary("sub", other, self)

    def __mul__(self, other: Any) -> "Tensor":
        return binary("mul", self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        return binary("mul", other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        return binary("div", self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        return binary("div", other, self)

    def __neg__(self) -> "Tensor":
        return unary("neg", self)

    def __abs__(self) -> "Tensor":
        return unary("abs", self)

    def __getitem__(self, index: Any) -> "Tensor":
        from helmholtz.autodiff.functional import getitem

        return getitem(self, index)

    def sum(self) -> "Tensor":
        from helmholtz.autodiff.functional import sum_

        return sum_(self)

    def mean(self, mask: np.ndarray | None = None) -> "Tensor":
        from helmholtz.autodiff.functional import mean

        return mean(self, mask)


def as_operand(x: Any) -> "Tensor | np.ndarray":
    if isinstance(x, Tensor):
        return x
    return np.asarray(x, dtype=np.float64)


def value_of(x: Any) -> np.ndarray:
    """The numeric value of a tensor or constant."""
    if isinstance(x, Tensor):
        return x.value
    return np.asarray(x, dtype=np.float64)


def is_tensor(x: Any) -> bool:
    return isinstance(x, Tensor)


def tape_of(*operands: Any) -> Tape | None:
    for x in operands:
        if isinstance(x, Tensor):
            return x.tape
    return None


def check_shapes(op: str, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    if a == b or b == ():
        return a
    if a == ():
        return b
    raise AutodiffError(f"{op}: shape mismatch {a} vs {b}")


def sum_to_shape(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast adjoint back to an operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _binary_forward(op: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if np.any(np.abs(b) <= DIV_EPS):
            raise AutodiffError(f"div: denominator magnitude <= {DIV_EPS}")
        return a / b
    if op == "min":
        return np.where(a <= b, a, b)
    if op == "max":
        return np.where(a >= b, a, b)
    raise AutodiffError(f"unknown binary op '{op}'")


def _binary_partials(
    op: str, a: np.ndarray, b: np.ndarray, out: np.ndarray, g: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    if op == "add":
        return g, g
    if op == "sub":
        return g, -g
    if op == "mul":
        return g * b, g * a
    if op == "div":
        return g / b, -g * out / b
    if op == "min":
        first = a <= b
        return g * first, g * ~first
    if op == "max":
        first = a >= b
        return g * first, g * ~first
    raise AutodiffError(f"unknown binary op '{op}'")


def binary(op: str, a: Any, b: Any) -> Any:
    """Elementwise binary op; returns a plain array when neither operand is a tensor.

    ``min``/``max`` route the adjoint to the first operand on exact ties.
    """
    a = as_operand(a)
    b = as_operand(b)
    av, bv = value_of(a), value_of(b)
    shape = check_shapes(op, av.shape, bv.shape)
    out = _binary_forward(op, av, bv)
    tape = tape_of(a, b)
    if tape is None:
        return out

    parents = [x for x in (a, b) if isinstance(x, Tensor)]
    a_is_t, b_is_t = isinstance(a, Tensor), isinstance(b, Tensor)

    def backward(g: np.ndarray) -> list[np.ndarray]:
        g = np.broadcast_to(g, shape)
        ga, gb = _binary_partials(op, av, bv, out, g)
        grads = []
        if a_is_t:
            grads.append(sum_to_shape(np.broadcast_to(ga, shape), av.shape))
        if b_is_t:
            grads.append(sum_to_shape(np.broadcast_to(gb, shape), bv.shape))
        return grads

    return tape.record(op, out, parents, backward)


def unary(op: str, x: Any) -> Any:
    """Elementwise ``neg``, ``abs`` (sign adjoint, 0 at 0) or ``exp``."""
    x = as_operand(x)
    xv = value_of(x)
    if op == "neg":
        out = -xv
    elif op == "abs":
        out = np.abs(xv)
    elif op == "exp":
        with np.errstate(over="ignore"):
            out = np.exp(xv)
    else:
        raise AutodiffError(f"unknown unary op '{op}'")
    if not isinstance(x, Tensor):
        return out

    def backward(g: np.ndarray) -> list[np.ndarray]:
        if op == "neg":
            return [-g]
        if op == "abs":
            return [g * np.sign(xv)]
        return [g * out]

    return x.tape.record(op, out, [x], backward)
