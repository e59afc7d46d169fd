"""Dense reverse-mode automatic differentiation used by the losses and the refiner."""

from helmholtz.autodiff.functional import (
    absolute,
    add,
    avg_pool2,
    bilinear_sample,
    box_filter3,
    box_mean3,
    broadcast_to,
    clamp,
    div,
    exp,
    getitem,
    maximum,
    maximum_n,
    mean,
    minimum,
    minimum_n,
    mul,
    neg,
    pad_reflect,
    reshape,
    safe_div,
    stack,
    sub,
    sum_,
    where,
)
from helmholtz.autodiff.tape import (
    DIV_EPS,
    AutodiffError,
    GradientMap,
    Tape,
    Tensor,
    is_tensor,
    value_of,
)

__all__ = [
    "Tape",
    "Tensor",
    "GradientMap",
    "AutodiffError",
    "DIV_EPS",
    "is_tensor",
    "value_of",
    "add",
    "sub",
    "mul",
    "div",
    "safe_div",
    "neg",
    "absolute",
    "exp",
    "minimum",
    "maximum",
    "minimum_n",
    "maximum_n",
    "clamp",
    "where",
    "sum_",
    "mean",
    "getitem",
    "stack",
    "broadcast_to",
    "reshape",
    "pad_reflect",
    "box_mean3",
    "box_filter3",
    "avg_pool2",
    "bilinear_sample",
]
