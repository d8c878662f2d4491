"""原语的函数式接口"""

from typing import Optional, Sequence, Tuple

from .base_primitive import OpKind
from .tensor import Tensor, forward_primitive


def add(a: Tensor, b: Tensor) -> Tensor:
    return forward_primitive(OpKind.ADD, [a, b])


def sub(a: Tensor, b: Tensor) -> Tensor:
    return forward_primitive(OpKind.SUB, [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return forward_primitive(OpKind.MUL_ELEMENTWISE, [a, b])


def scalar_mul(a: Tensor, scalar: float) -> Tensor:
    return forward_primitive(OpKind.SCALAR_MUL, [a], {"scalar": float(scalar)})


def relu(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.RELU, [x])


def square(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.SQUARE, [x])


def sqrt(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.SQRT, [x])


def abs_(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.ABS, [x])


def clamp01(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.CLAMP01, [x])


def reduce_sum(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.REDUCE_SUM, [x])


def reduce_mean(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.REDUCE_MEAN, [x])


def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None, padding: int = 0) -> Tensor:
    """步长 1 卷积；padding 为四周补零宽度"""
    inputs = [x, kernel] if bias is None else [x, kernel, bias]
    return forward_primitive(OpKind.CONV2D, inputs, {"padding": int(padding)})


def bilinear_resize(x: Tensor, size: Tuple[int, int]) -> Tensor:
    return forward_primitive(OpKind.BILINEAR_RESIZE, [x], {"size": (int(size[0]), int(size[1]))})


def bicubic_resize(x: Tensor, size: Tuple[int, int]) -> Tensor:
    return forward_primitive(OpKind.BICUBIC_RESIZE, [x], {"size": (int(size[0]), int(size[1]))})


def unfold_patches(x: Tensor, patch: int, stride: int = 1, padding: int = 0) -> Tensor:
    return forward_primitive(
        OpKind.UNFOLD_PATCHES, [x], {"patch": int(patch), "stride": int(stride), "padding": int(padding)}
    )


def fold_patches_overlap_average(
    cols: Tensor,
    shape: Sequence[int],
    patch: int,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    return forward_primitive(
        OpKind.FOLD_PATCHES_OVERLAP_AVERAGE,
        [cols],
        {
            "shape": tuple(int(v) for v in shape),
            "patch": int(patch),
            "stride": int(stride),
            "padding": int(padding),
        },
    )


def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    return forward_primitive(OpKind.MATMUL, [a, b], {"transpose_b": bool(transpose_b)})


def softmax_rows(x: Tensor, temperature: float = 1.0) -> Tensor:
    return forward_primitive(OpKind.SOFTMAX_ROWS, [x], {"temperature": float(temperature)})


def l2_normalize_rows(x: Tensor) -> Tensor:
    return forward_primitive(OpKind.L2_NORMALIZE_ROWS, [x])


def concat_channels(*tensors: Tensor) -> Tensor:
    return forward_primitive(OpKind.CONCAT_CHANNELS, list(tensors))
