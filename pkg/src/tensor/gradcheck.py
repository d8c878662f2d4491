"""有限差分梯度（反向求导的测试基准）"""

from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np

from .base_primitive import Attrs, OpKind
from .tensor import ComputationRecord, Tensor, backward, forward_primitive

ScalarFn = Callable[[Tensor], Union[Tensor, float]]


def _scalar(value: Union[Tensor, float]) -> float:
    if isinstance(value, Tensor):
        return value.item()
    return float(value)


def finite_diff_grad(
    f: ScalarFn,
    x: Tensor,
    h: float = 1e-5,
    indices: Optional[Iterable[int]] = None,
) -> Tensor:
    """中心差分梯度 (f(x + h·e_i) - f(x - h·e_i)) / 2h

    Args:
        f: 标量函数，接收一个脱离记录的 Tensor
        x: 求导点
        h: 步长，必须为正
        indices: 只计算这些扁平下标，其余位置为 0；None 表示全部

    Returns:
        与 x 同形状的梯度张量
    """
    if h <= 0:
        raise ValueError(f"finite difference step must be positive, got {h}")
    base = np.array(x.data, dtype=np.float64).reshape(-1)
    grad = np.zeros_like(base)
    positions = range(base.size) if indices is None else indices
    for i in positions:
        original = base[i]
        base[i] = original + h
        f_plus = _scalar(f(Tensor.constant(base.reshape(x.shape))))
        base[i] = original - h
        f_minus = _scalar(f(Tensor.constant(base.reshape(x.shape))))
        base[i] = original
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return Tensor.constant(grad.reshape(x.shape))


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """max|a - b| / max(‖a‖∞, ‖b‖∞, 1e-12)"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)), 1e-12)
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


# =============================================================================
# 原语梯度自检
# =============================================================================

def _away_from_zero(rng: np.random.Generator, shape: Tuple[int, ...], margin: float = 0.1) -> np.ndarray:
    """随机正负值，绝对值不小于 margin（避开 0 处的不可导点）"""
    magnitude = rng.uniform(margin, 1.0, size=shape)
    return magnitude * rng.choice([-1.0, 1.0], size=shape)


def random_case(kind: OpKind, rng: np.random.Generator) -> Tuple[List[np.ndarray], Attrs]:
    """为原语构造一组小尺寸随机输入（避开不可导点）

    Returns:
        (输入数组列表, 属性字典)
    """
    kind = OpKind(kind)
    if kind in (OpKind.ADD, OpKind.SUB, OpKind.MUL_ELEMENTWISE):
        return [rng.normal(size=(3, 4)), rng.normal(size=(3, 4))], {}
    if kind == OpKind.SCALAR_MUL:
        return [rng.normal(size=(3, 4))], {"scalar": float(rng.uniform(-2.0, 2.0))}
    if kind in (OpKind.RELU, OpKind.ABS):
        return [_away_from_zero(rng, (3, 4))], {}
    if kind == OpKind.SQUARE:
        return [rng.normal(size=(3, 4))], {}
    if kind == OpKind.SQRT:
        return [rng.uniform(0.5, 2.0, size=(3, 4))], {}
    if kind == OpKind.CLAMP01:
        inside = rng.uniform(0.05, 0.95, size=(3, 4))
        outside = rng.choice([-0.5, 1.5], size=(3, 4))
        return [np.where(rng.uniform(size=(3, 4)) < 0.7, inside, outside)], {}
    if kind in (OpKind.REDUCE_SUM, OpKind.REDUCE_MEAN):
        return [rng.normal(size=(3, 4))], {}
    if kind == OpKind.CONV2D:
        return (
            [rng.normal(size=(5, 5, 2)), rng.normal(size=(3, 3, 2, 3)), rng.normal(size=(3,))],
            {"padding": int(rng.integers(0, 2))},
        )
    if kind in (OpKind.BILINEAR_RESIZE, OpKind.BICUBIC_RESIZE):
        return [rng.normal(size=(4, 5, 2))], {"size": (int(rng.integers(2, 9)), int(rng.integers(2, 9)))}
    if kind == OpKind.UNFOLD_PATCHES:
        return [rng.normal(size=(5, 5, 2))], {"patch": 3, "stride": 2, "padding": 1}
    if kind == OpKind.FOLD_PATCHES_OVERLAP_AVERAGE:
        return [rng.normal(size=(9, 18))], {"shape": (5, 5, 2), "patch": 3, "stride": 2, "padding": 1}
    if kind == OpKind.MATMUL:
        transpose_b = bool(rng.integers(0, 2))
        b_shape = (5, 4) if transpose_b else (4, 5)
        return [rng.normal(size=(3, 4)), rng.normal(size=b_shape)], {"transpose_b": transpose_b}
    if kind == OpKind.SOFTMAX_ROWS:
        return [rng.normal(size=(3, 5))], {"temperature": float(rng.uniform(0.3, 2.0))}
    if kind == OpKind.L2_NORMALIZE_ROWS:
        return [rng.normal(size=(3, 5))], {}
    if kind == OpKind.CONCAT_CHANNELS:
        return [rng.normal(size=(3, 4, 2)), rng.normal(size=(3, 4, 3))], {}
    raise KeyError(f"no random case for op kind '{kind}'")


def check_primitive(kind: OpKind, rng: np.random.Generator, h: float = 1e-5) -> float:
    """比较反向梯度与中心差分，返回所有输入上的最大相对误差

    标量根取 sum(out ⊙ W)，W 为随机权重，以检验任意上游梯度。
    """
    inputs, attrs = random_case(kind, rng)
    out_shape = forward_primitive(kind, [Tensor.constant(x) for x in inputs], attrs).shape
    weights = Tensor.constant(rng.normal(size=out_shape))

    record = ComputationRecord()
    leaves = [record.leaf(x) for x in inputs]
    out = forward_primitive(kind, leaves, attrs)
    root = forward_primitive(OpKind.REDUCE_SUM, [forward_primitive(OpKind.MUL_ELEMENTWISE, [out, weights])])
    grads = backward(root, wrt=leaves)

    worst = 0.0
    for i, leaf in enumerate(leaves):
        def f(x: Tensor, i: int = i) -> float:
            args = [Tensor.constant(v) for v in inputs]
            args[i] = x
            y = forward_primitive(kind, args, attrs)
            return float(np.sum(y.data * weights.data))

        numeric = finite_diff_grad(f, Tensor.constant(inputs[i]), h)
        worst = max(worst, relative_error(grads[leaf.node_id].data, numeric.data))
    record.clear()
    return worst
