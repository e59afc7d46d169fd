"""Differentiable functions over tensors and constants.

Every function accepts :class:`Tensor` operands or plain arrays. When no operand is a
tensor the function is evaluated directly in ``numpy`` and a plain array is returned,
so the same loss and geometry code serves both the taped and the value-only path.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np

from helmholtz.autodiff.tape import (
    DIV_EPS,
    AutodiffError,
    Tensor,
    as_operand,
    binary,
    check_shapes,
    sum_to_shape,
    tape_of,
    unary,
    value_of,
)


def add(a: Any, b: Any) -> Any:
    return binary("add", a, b)


def sub(a: Any, b: Any) -> Any:
    return binary("sub", a, b)


def mul(a: Any, b: Any) -> Any:
    return binary("mul", a, b)


def div(a: Any, b: Any) -> Any:
    """Checked division: any denominator with ``|b| <= 1e-12`` raises."""
    return binary("div", a, b)


def minimum(a: Any, b: Any) -> Any:
    return binary("min", a, b)


def maximum(a: Any, b: Any) -> Any:
    return binary("max", a, b)


def absolute(x: Any) -> Any:
    return unary("abs", x)


def exp(x: Any) -> Any:
    return unary("exp", x)


def neg(x: Any) -> Any:
    return unary("neg", x)


def clamp(x: Any, lo: float, hi: float) -> Any:
    """Clip to ``[lo, hi]``; the adjoint passes where ``lo <= x <= hi``."""
    if lo > hi:
        raise AutodiffError(f"clamp: lo={lo} > hi={hi}")
    x = as_operand(x)
    xv = value_of(x)
    out = np.clip(xv, lo, hi)
    if not isinstance(x, Tensor):
        return out
    inside = (xv >= lo) & (xv <= hi)
    return x.tape.record("clamp", out, [x], lambda g: [g * inside])


def safe_div(a: Any, b: Any) -> Any:
    """Division that yields 0 (with zero adjoint) where ``|b| <= 1e-12``."""
    a = as_operand(a)
    b = as_operand(b)
    av, bv = value_of(a), value_of(b)
    shape = check_shapes("safe_div", av.shape, bv.shape)
    ok = np.broadcast_to(np.abs(bv) > DIV_EPS, shape)
    den = np.where(ok, bv, 1.0)
    out = np.where(ok, av / den, 0.0)
    tape = tape_of(a, b)
    if tape is None:
        return out
    parents = [x for x in (a, b) if isinstance(x, Tensor)]
    a_is_t, b_is_t = isinstance(a, Tensor), isinstance(b, Tensor)

    def backward(g: np.ndarray) -> list[np.ndarray]:
        g = np.broadcast_to(g, shape) * ok
        grads = []
        if a_is_t:
            grads.append(sum_to_shape(g / den, av.shape))
        if b_is_t:
            grads.append(sum_to_shape(-g * out / den, bv.shape))
        return grads

    return tape.record("safe_div", out, parents, backward)


def where(cond: np.ndarray, a: Any, b: Any) -> Any:
    """Select ``a`` where ``cond`` else ``b``; ``cond`` is a constant boolean array."""
    cond = np.asarray(cond, dtype=bool)
    a = as_operand(a)
    b = as_operand(b)
    av, bv = value_of(a), value_of(b)
    shape = check_shapes("where", av.shape, bv.shape)
    if cond.shape != shape and cond.shape != ():
        raise AutodiffError(f"where: condition shape {cond.shape} vs operands {shape}")
    out = np.where(cond, av, bv)
    tape = tape_of(a, b)
    if tape is None:
        return out
    parents = [x for x in (a, b) if isinstance(x, Tensor)]
    a_is_t, b_is_t = isinstance(a, Tensor), isinstance(b, Tensor)

    def backward(g: np.ndarray) -> list[np.ndarray]:
        g = np.broadcast_to(g, out.shape)
        grads = []
        if a_is_t:
            grads.append(sum_to_shape(np.where(cond, g, 0.0), av.shape))
        if b_is_t:
            grads.append(sum_to_shape(np.where(cond, 0.0, g), bv.shape))
        return grads

    return tape.record("where", out, parents, backward)


def minimum_n(operands: Sequence[Any]) -> Any:
    """Left-to-right elementwise minimum; ties keep the earliest operand."""
    if not operands:
        raise AutodiffError("minimum_n of an empty sequence")
    result = operands[0]
    for operand in operands[1:]:
        result = minimum(result, operand)
    return result


def maximum_n(operands: Sequence[Any]) -> Any:
    if not operands:
        raise AutodiffError("maximum_n of an empty sequence")
    result = operands[0]
    for operand in operands[1:]:
        result = maximum(result, operand)
    return result


def sum_(x: Any) -> Any:
    x = as_operand(x)
    xv = value_of(x)
    out = np.asarray(xv.sum())
    if not isinstance(x, Tensor):
        return out
    return x.tape.record("sum", out, [x], lambda g: [np.broadcast_to(g, xv.shape).copy()])


def _check_mask(mask: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != shape:
        raise AutodiffError(f"mean: mask shape {mask.shape} vs operand {shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise AutodiffError("mean: mask values must be 0 or 1")
    return mask


def mean(x: Any, mask: np.ndarray | None = None) -> Any:
    """Mean, optionally over ``mask == 1`` only.

    An all-zero mask yields 0 with a zero adjoint, which keeps losses defined on
    degenerate frames.
    """
    x = as_operand(x)
    xv = value_of(x)
    if mask is None:
        weights = np.full(xv.shape, 1.0 / max(xv.size, 1))
    else:
        m = _check_mask(mask, xv.shape)
        count = m.sum()
        weights = m / count if count > 0 else np.zeros(xv.shape)
    out = np.asarray((xv * weights).sum())
    if not isinstance(x, Tensor):
        return out
    return x.tape.record("mean", out, [x], lambda g: [g * weights])


def getitem(x: Any, index: Any) -> Any:
    x = as_operand(x)
    xv = value_of(x)
    out = np.array(xv[index], dtype=np.float64)
    if not isinstance(x, Tensor):
        return out

    def backward(g: np.ndarray) -> list[np.ndarray]:
        grad = np.zeros(xv.shape)
        np.add.at(grad, index, g)
        return [grad]

    return x.tape.record("getitem", out, [x], backward)


def stack(operands: Sequence[Any], axis: int = 0) -> Any:
    operands = [as_operand(x) for x in operands]
    if not operands:
        raise AutodiffError("stack of an empty sequence")
    values = [value_of(x) for x in operands]
    shapes = {v.shape for v in values}
    if len(shapes) != 1:
        raise AutodiffError(f"stack: mismatched shapes {sorted(shapes)}")
    out = np.stack(values, axis=axis)
    tape = tape_of(*operands)
    if tape is None:
        return out
    positions = [i for i, x in enumerate(operands) if isinstance(x, Tensor)]
    parents = [operands[i] for i in positions]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return [np.take(g, i, axis=axis) for i in positions]

    return tape.record("stack", out, parents, backward)


def broadcast_to(x: Any, shape: tuple[int, ...]) -> Any:
    """Explicit numpy-style broadcast; the adjoint sums over expanded axes."""
    x = as_operand(x)
    xv = value_of(x)
    out = np.broadcast_to(xv, shape).astype(np.float64, copy=True)
    if not isinstance(x, Tensor):
        return out
    return x.tape.record("broadcast", out, [x], lambda g: [sum_to_shape(g, xv.shape)])


def reshape(x: Any, shape: tuple[int, ...]) -> Any:
    x = as_operand(x)
    xv = value_of(x)
    out = xv.reshape(shape).copy()
    if not isinstance(x, Tensor):
        return out
    return x.tape.record("reshape", out, [x], lambda g: [g.reshape(xv.shape)])


def pad_reflect(x: Any, width: int) -> Any:
    """Mirror-pad a 2-D image by ``width`` pixels (edge pixel not repeated)."""
    x = as_operand(x)
    xv = value_of(x)
    if xv.ndim != 2:
        raise AutodiffError(f"pad_reflect expects a 2-D image, got shape {xv.shape}")
    out = np.pad(xv, width, mode="reflect")
    if not isinstance(x, Tensor):
        return out
    rows = np.pad(np.arange(xv.shape[0]), width, mode="reflect")
    cols = np.pad(np.arange(xv.shape[1]), width, mode="reflect")

    def backward(g: np.ndarray) -> list[np.ndarray]:
        grad = np.zeros(xv.shape)
        np.add.at(grad, (rows[:, None], cols[None, :]), g)
        return [grad]

    return x.tape.record("pad_reflect", out, [x], backward)


def box_mean3(x: Any) -> Any:
    """3×3 box average over fully-contained windows; output shrinks by 2 per axis."""
    x = as_operand(x)
    xv = value_of(x)
    h, w = xv.shape[0] - 2, xv.shape[1] - 2
    if h < 1 or w < 1:
        raise AutodiffError(f"box_mean3 needs at least 3×3 input, got {xv.shape}")
    out = np.zeros((h, w))
    for di in range(3):
        for dj in range(3):
            out += xv[di : di + h, dj : dj + w]
    out /= 9.0
    if not isinstance(x, Tensor):
        return out

    def backward(g: np.ndarray) -> list[np.ndarray]:
        grad = np.zeros(xv.shape)
        share = g / 9.0
        for di in range(3):
            for dj in range(3):
                grad[di : di + h, dj : dj + w] += share
        return [grad]

    return x.tape.record("box_mean3", out, [x], backward)


def box_filter3(x: Any) -> Any:
    """Same-size 3×3 box average with mirror-padded borders."""
    return box_mean3(pad_reflect(x, 1))


def avg_pool2(x: Any) -> Any:
    """2×2 average pooling of a 2-D image; a trailing odd row/column is dropped."""
    x = as_operand(x)
    xv = value_of(x)
    h, w = xv.shape[0] // 2, xv.shape[1] // 2
    if h < 1 or w < 1:
        raise AutodiffError(f"avg_pool2 needs at least 2×2 input, got {xv.shape}")
    out = xv[: 2 * h, : 2 * w].reshape(h, 2, w, 2).mean(axis=(1, 3))
    if not isinstance(x, Tensor):
        return out

    def backward(g: np.ndarray) -> list[np.ndarray]:
        grad = np.zeros(xv.shape)
        grad[: 2 * h, : 2 * w] = np.repeat(np.repeat(g / 4.0, 2, axis=0), 2, axis=1)
        return [grad]

    return x.tape.record("avg_pool2", out, [x], backward)


def bilinear_sample(
    image: Any,
    u: Any,
    v: Any,
    visible: np.ndarray | None = None,
) -> tuple[Any, np.ndarray]:
    """Sample ``image`` at continuous pixel coordinates ``(u, v)``.

    Pixel centres sit at integer coordinates. A sample is valid when it lies in
    ``[0, W-1] × [0, H-1]`` (so all four neighbours exist) and ``visible`` holds;
    invalid samples read 0 and pass no adjoint. Differentiable w.r.t. the image
    and both coordinate fields.
    """
    image, u, v = as_operand(image), as_operand(u), as_operand(v)
    img, uv, vv = value_of(image), value_of(u), value_of(v)
    if img.ndim != 2 or img.shape[0] < 2 or img.shape[1] < 2:
        raise AutodiffError(f"bilinear_sample needs a 2-D image of at least 2×2, got {img.shape}")
    if uv.shape != vv.shape:
        raise AutodiffError(f"coordinate fields differ in shape: {uv.shape} vs {vv.shape}")
    height, width = img.shape

    valid = (uv >= 0.0) & (uv <= width - 1) & (vv >= 0.0) & (vv <= height - 1)
    if visible is not None:
        valid &= np.asarray(visible, dtype=bool)
    us = np.where(valid, uv, 0.0)
    vs = np.where(valid, vv, 0.0)
    x0 = np.clip(np.floor(us).astype(np.int64), 0, width - 2)
    y0 = np.clip(np.floor(vs).astype(np.int64), 0, height - 2)
    fx = us - x0
    fy = vs - y0
    i00 = img[y0, x0]
    i01 = img[y0, x0 + 1]
    i10 = img[y0 + 1, x0]
    i11 = img[y0 + 1, x0 + 1]
    top = (1.0 - fx) * i00 + fx * i01
    bottom = (1.0 - fx) * i10 + fx * i11
    out = np.where(valid, (1.0 - fy) * top + fy * bottom, 0.0)

    tape = tape_of(image, u, v)
    if tape is None:
        return out, valid

    inputs = (("image", image), ("u", u), ("v", v))
    roles = [(name, x) for name, x in inputs if isinstance(x, Tensor)]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        g = np.where(valid, g, 0.0)
        grads = []
        for name, _ in roles:
            if name == "image":
                grad = np.zeros(img.shape)
                np.add.at(grad, (y0, x0), g * (1.0 - fx) * (1.0 - fy))
                np.add.at(grad, (y0, x0 + 1), g * fx * (1.0 - fy))
                np.add.at(grad, (y0 + 1, x0), g * (1.0 - fx) * fy)
                np.add.at(grad, (y0 + 1, x0 + 1), g * fx * fy)
            elif name == "u":
                grad = g * ((1.0 - fy) * (i01 - i00) + fy * (i11 - i10))
            else:
                grad = g * (bottom - top)
            grads.append(grad)
        return grads

    return tape.record("bilinear_sample", out, [x for _, x in roles], backward), valid
