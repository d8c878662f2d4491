"""原语实现：每个 OpKind 的前向规则与精确反向规则"""

from typing import Sequence, Tuple

import numpy as np

from .base_primitive import Attrs, BasePrimitive, OpKind
from .kernels import apply_separable, apply_separable_transpose, resize_matrix
from .registry import register_primitive


# =============================================================================
# 逐元素算子
# =============================================================================

class _SameShapeBinary(BasePrimitive):
    arity = 2

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        a, b = inputs
        if a.shape != b.shape:
            raise self._mismatch("operands must have identical shapes", a.shape, b.shape)


@register_primitive
class Add(_SameShapeBinary):
    kind = OpKind.ADD

    def forward(self, inputs, attrs):
        return inputs[0] + inputs[1], ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [grad, grad]


@register_primitive
class Sub(_SameShapeBinary):
    kind = OpKind.SUB

    def forward(self, inputs, attrs):
        return inputs[0] - inputs[1], ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [grad, -grad]


@register_primitive
class MulElementwise(_SameShapeBinary):
    kind = OpKind.MUL_ELEMENTWISE

    def forward(self, inputs, attrs):
        return inputs[0] * inputs[1], ()

    def backward(self, grad, inputs, output, saved, attrs):
        a, b = inputs
        return [grad * b, grad * a]


@register_primitive
class ScalarMul(BasePrimitive):
    kind = OpKind.SCALAR_MUL

    def forward(self, inputs, attrs):
        return inputs[0] * float(attrs["scalar"]), ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [grad * float(attrs["scalar"])]


@register_primitive
class Relu(BasePrimitive):
    kind = OpKind.RELU

    def forward(self, inputs, attrs):
        return np.maximum(inputs[0], 0.0), ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [grad * (inputs[0] > 0.0)]


@register_primitive
class Square(BasePrimitive):
    kind = OpKind.SQUARE

    def forward(self, inputs, attrs):
        return inputs[0] * inputs[0], ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [grad * 2.0 * inputs[0]]


@register_primitive
class Sqrt(BasePrimitive):
    """平方根；输入必须非负，0 处梯度取 0"""

    kind = OpKind.SQRT

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        if np.any(inputs[0] < 0.0):
            raise self._mismatch("input must be non-negative", inputs[0].shape)

    def forward(self, inputs, attrs):
        return np.sqrt(inputs[0]), ()

    def backward(self, grad, inputs, output, saved, attrs):
        inv = np.zeros_like(output)
        np.divide(0.5, output, out=inv, where=output > 0.0)
        return [grad * inv]


@register_primitive
class Abs(BasePrimitive):
    kind = OpKind.ABS

    def forward(self, inputs, attrs):
        return np.abs(inputs[0]), ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [grad * np.sign(inputs[0])]


@register_primitive
class Clamp01(BasePrimitive):
    """取值范围截断：梯度只在 (0, 1) 内部通过，边界处为零"""

    kind = OpKind.CLAMP01

    def forward(self, inputs, attrs):
        return np.clip(inputs[0], 0.0, 1.0), ()

    def backward(self, grad, inputs, output, saved, attrs):
        x = inputs[0]
        return [grad * ((x > 0.0) & (x < 1.0))]


# =============================================================================
# 归约
# =============================================================================

@register_primitive
class ReduceSum(BasePrimitive):
    kind = OpKind.REDUCE_SUM

    def forward(self, inputs, attrs):
        return np.array([np.sum(inputs[0])], dtype=np.float64), ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [np.full(inputs[0].shape, grad[0], dtype=np.float64)]


@register_primitive
class ReduceMean(BasePrimitive):
    kind = OpKind.REDUCE_MEAN

    def forward(self, inputs, attrs):
        return np.array([np.mean(inputs[0])], dtype=np.float64), ()

    def backward(self, grad, inputs, output, saved, attrs):
        x = inputs[0]
        return [np.full(x.shape, grad[0] / x.size, dtype=np.float64)]


# =============================================================================
# 卷积与重采样
# =============================================================================

@register_primitive
class Conv2d(BasePrimitive):
    """步长 1 的二维卷积，输入 H×W×Cin，卷积核 k×k×Cin×Cout，可选偏置 Cout"""

    kind = OpKind.CONV2D
    arity = None

    def validate(self, inputs, attrs):
        if len(inputs) not in (2, 3):
            raise self._mismatch(f"expected 2 or 3 inputs, got {len(inputs)}", *[x.shape for x in inputs])
        x, k = inputs[0], inputs[1]
        if x.ndim != 3 or k.ndim != 4:
            raise self._mismatch("input must be H×W×Cin and kernel kh×kw×Cin×Cout", x.shape, k.shape)
        if x.shape[2] != k.shape[2]:
            raise self._mismatch(f"input channels {x.shape[2]} != kernel Cin {k.shape[2]}", x.shape, k.shape)
        pad = int(attrs.get("padding", 0))
        if x.shape[0] + 2 * pad < k.shape[0] or x.shape[1] + 2 * pad < k.shape[1]:
            raise self._mismatch(f"kernel larger than padded input (padding={pad})", x.shape, k.shape)
        if len(inputs) == 3 and inputs[2].shape != (k.shape[3],):
            raise self._mismatch(f"bias must have shape ({k.shape[3]},)", k.shape, inputs[2].shape)

    def forward(self, inputs, attrs):
        x, k = inputs[0], inputs[1]
        pad = int(attrs.get("padding", 0))
        xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0))) if pad else x
        kh, kw, _, cout = k.shape
        ho = xp.shape[0] - kh + 1
        wo = xp.shape[1] - kw + 1
        out = np.zeros((ho, wo, cout), dtype=np.float64)
        for di in range(kh):
            for dj in range(kw):
                out += xp[di:di + ho, dj:dj + wo, :] @ k[di, dj]
        if len(inputs) == 3:
            out += inputs[2]
        return out, (xp,)

    def backward(self, grad, inputs, output, saved, attrs):
        x, k = inputs[0], inputs[1]
        (xp,) = saved
        pad = int(attrs.get("padding", 0))
        kh, kw, cin, cout = k.shape
        ho, wo = grad.shape[:2]
        g2 = grad.reshape(-1, cout)
        gxp = np.zeros_like(xp)
        gk = np.zeros_like(k)
        for di in range(kh):
            for dj in range(kw):
                window = xp[di:di + ho, dj:dj + wo, :]
                gk[di, dj] = window.reshape(-1, cin).T @ g2
                gxp[di:di + ho, dj:dj + wo, :] += grad @ k[di, dj].T
        gx = gxp[pad:pad + x.shape[0], pad:pad + x.shape[1], :] if pad else gxp
        grads = [gx, gk]
        if len(inputs) == 3:
            grads.append(grad.sum(axis=(0, 1)))
        return grads


class _SeparableResize(BasePrimitive):
    kernel: str = "cubic"

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        x = inputs[0]
        out_h, out_w = attrs["size"]
        if x.ndim != 3:
            raise self._mismatch("input must be H×W×C", x.shape)
        if out_h < 1 or out_w < 1:
            raise self._mismatch(f"output size must be positive, got {(out_h, out_w)}", x.shape)

    def _matrices(self, x: np.ndarray, attrs: Attrs) -> Tuple[np.ndarray, np.ndarray]:
        out_h, out_w = attrs["size"]
        return (
            resize_matrix(x.shape[0], int(out_h), self.kernel),
            resize_matrix(x.shape[1], int(out_w), self.kernel),
        )

    def forward(self, inputs, attrs):
        rows, cols = self._matrices(inputs[0], attrs)
        return apply_separable(inputs[0], rows, cols), ()

    def backward(self, grad, inputs, output, saved, attrs):
        rows, cols = self._matrices(inputs[0], attrs)
        return [apply_separable_transpose(grad, rows, cols)]


@register_primitive
class BilinearResize(_SeparableResize):
    kind = OpKind.BILINEAR_RESIZE
    kernel = "linear"


@register_primitive
class BicubicResize(_SeparableResize):
    kind = OpKind.BICUBIC_RESIZE
    kernel = "cubic"


# =============================================================================
# 块展开 / 折叠
# =============================================================================

def patch_grid(size: int, patch: int, stride: int, padding: int) -> int:
    """一个维度上的块位置个数"""
    return (size + 2 * padding - patch) // stride + 1


def unfold_array(x: np.ndarray, patch: int, stride: int, padding: int) -> np.ndarray:
    """把 H×W×C 展开为 (L, patch·patch·C) 的行矩阵，行按光栅顺序"""
    h, w, c = x.shape
    nh = patch_grid(h, patch, stride, padding)
    nw = patch_grid(w, patch, stride, padding)
    xp = np.pad(x, ((padding, padding), (padding, padding), (0, 0))) if padding else x
    cols = np.empty((nh, nw, patch, patch, c), dtype=np.float64)
    span_h = stride * (nh - 1) + 1
    span_w = stride * (nw - 1) + 1
    for di in range(patch):
        for dj in range(patch):
            cols[:, :, di, dj, :] = xp[di:di + span_h:stride, dj:dj + span_w:stride, :]
    return cols.reshape(nh * nw, patch * patch * c)


def fold_sum_array(cols: np.ndarray, shape: Sequence[int], patch: int, stride: int, padding: int) -> np.ndarray:
    """unfold_array 的伴随：把块叠加回 H×W×C（重叠处求和）"""
    h, w, c = shape
    nh = patch_grid(h, patch, stride, padding)
    nw = patch_grid(w, patch, stride, padding)
    blocks = cols.reshape(nh, nw, patch, patch, c)
    acc = np.zeros((h + 2 * padding, w + 2 * padding, c), dtype=np.float64)
    span_h = stride * (nh - 1) + 1
    span_w = stride * (nw - 1) + 1
    for di in range(patch):
        for dj in range(patch):
            acc[di:di + span_h:stride, dj:dj + span_w:stride, :] += blocks[:, :, di, dj, :]
    return acc[padding:padding + h, padding:padding + w, :]


def _geometry(attrs: Attrs) -> Tuple[int, int, int]:
    return int(attrs["patch"]), int(attrs.get("stride", 1)), int(attrs.get("padding", 0))


@register_primitive
class UnfoldPatches(BasePrimitive):
    kind = OpKind.UNFOLD_PATCHES

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        x = inputs[0]
        patch, stride, padding = _geometry(attrs)
        if x.ndim != 3:
            raise self._mismatch("input must be H×W×C", x.shape)
        if patch < 1 or stride < 1 or padding < 0:
            raise self._mismatch(f"invalid geometry patch={patch} stride={stride} padding={padding}", x.shape)
        if patch_grid(x.shape[0], patch, stride, padding) < 1 or patch_grid(x.shape[1], patch, stride, padding) < 1:
            raise self._mismatch(f"empty patch grid for patch={patch} padding={padding}", x.shape)

    def forward(self, inputs, attrs):
        return unfold_array(inputs[0], *_geometry(attrs)), ()

    def backward(self, grad, inputs, output, saved, attrs):
        return [fold_sum_array(grad, inputs[0].shape, *_geometry(attrs))]


@register_primitive
class FoldPatchesOverlapAverage(BasePrimitive):
    """块折叠：重叠像素取平均，未被任何块覆盖的像素为零"""

    kind = OpKind.FOLD_PATCHES_OVERLAP_AVERAGE

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        cols = inputs[0]
        h, w, c = (int(v) for v in attrs["shape"])
        patch, stride, padding = _geometry(attrs)
        nh = patch_grid(h, patch, stride, padding)
        nw = patch_grid(w, patch, stride, padding)
        expected = (nh * nw, patch * patch * c)
        if nh < 1 or nw < 1 or cols.shape != expected:
            raise self._mismatch(f"patch matrix must be {expected} for output {(h, w, c)}", cols.shape)

    def _inverse_count(self, attrs: Attrs) -> np.ndarray:
        h, w, _ = (int(v) for v in attrs["shape"])
        patch, stride, padding = _geometry(attrs)
        nh = patch_grid(h, patch, stride, padding)
        nw = patch_grid(w, patch, stride, padding)
        ones = np.ones((nh * nw, patch * patch), dtype=np.float64)
        count = fold_sum_array(ones, (h, w, 1), patch, stride, padding)
        inv = np.zeros_like(count)
        np.divide(1.0, count, out=inv, where=count > 0)
        return inv

    def forward(self, inputs, attrs):
        shape = tuple(int(v) for v in attrs["shape"])
        inv = self._inverse_count(attrs)
        summed = fold_sum_array(inputs[0], shape, *_geometry(attrs))
        return summed * inv, (inv,)

    def backward(self, grad, inputs, output, saved, attrs):
        (inv,) = saved
        return [unfold_array(grad * inv, *_geometry(attrs))]


# =============================================================================
# 矩阵与行运算
# =============================================================================

@register_primitive
class Matmul(BasePrimitive):
    """二维矩阵乘法；transpose_b=True 时计算 a @ b.T"""

    kind = OpKind.MATMUL
    arity = 2

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        a, b = inputs
        if a.ndim != 2 or b.ndim != 2:
            raise self._mismatch("operands must be 2-D", a.shape, b.shape)
        inner_b = b.shape[1] if attrs.get("transpose_b", False) else b.shape[0]
        if a.shape[1] != inner_b:
            raise self._mismatch(f"inner dimensions differ ({a.shape[1]} vs {inner_b})", a.shape, b.shape)

    def forward(self, inputs, attrs):
        a, b = inputs
        return (a @ b.T if attrs.get("transpose_b", False) else a @ b), ()

    def backward(self, grad, inputs, output, saved, attrs):
        a, b = inputs
        if attrs.get("transpose_b", False):
            return [grad @ b, grad.T @ a]
        return [grad @ b.T, a.T @ grad]


class _RowOp(BasePrimitive):
    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        if inputs[0].ndim != 2:
            raise self._mismatch("input must be 2-D", inputs[0].shape)


@register_primitive
class SoftmaxRows(_RowOp):
    """逐行 softmax(x / τ)"""

    kind = OpKind.SOFTMAX_ROWS

    def validate(self, inputs, attrs):
        super().validate(inputs, attrs)
        if float(attrs.get("temperature", 1.0)) <= 0.0:
            raise self._mismatch("temperature must be positive", inputs[0].shape)

    def forward(self, inputs, attrs):
        tau = float(attrs.get("temperature", 1.0))
        z = inputs[0] / tau
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True), ()

    def backward(self, grad, inputs, output, saved, attrs):
        tau = float(attrs.get("temperature", 1.0))
        y = output
        inner = np.sum(grad * y, axis=1, keepdims=True)
        return [y * (grad - inner) / tau]


@register_primitive
class L2NormalizeRows(_RowOp):
    """逐行 x / sqrt(|x|² + eps)；eps 使零行保持有限且处处光滑"""

    kind = OpKind.L2_NORMALIZE_ROWS

    def forward(self, inputs, attrs):
        x = inputs[0]
        eps = float(attrs.get("eps", 1e-12))
        norm = np.sqrt(np.sum(x * x, axis=1, keepdims=True) + eps)
        return x / norm, (norm,)

    def backward(self, grad, inputs, output, saved, attrs):
        x = inputs[0]
        (norm,) = saved
        inner = np.sum(grad * x, axis=1, keepdims=True)
        return [grad / norm - x * inner / norm ** 3]


@register_primitive
class ConcatChannels(BasePrimitive):
    kind = OpKind.CONCAT_CHANNELS
    arity = None

    def validate(self, inputs, attrs):
        if not inputs:
            raise self._mismatch("needs at least one input")
        first = inputs[0]
        for x in inputs:
            if x.ndim != 3 or x.shape[:2] != first.shape[:2]:
                raise self._mismatch("inputs must be H×W×C with equal H, W", *[y.shape for y in inputs])

    def forward(self, inputs, attrs):
        return np.concatenate(list(inputs), axis=2), ()

    def backward(self, grad, inputs, output, saved, attrs):
        splits = np.cumsum([x.shape[2] for x in inputs])[:-1]
        return list(np.split(grad, splits, axis=2))

