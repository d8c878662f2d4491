"""插值核与可分离重采样矩阵

重采样按像素中心对齐：目标像素 j 对应源坐标 (j + 0.5) * n_in / n_out - 0.5，
越界采样点夹到边缘，不做抗混叠预滤波。
"""

from functools import lru_cache

import numpy as np

CATMULL_ROM_A = -0.5


def cubic_weight(x: np.ndarray) -> np.ndarray:
    """Catmull-Rom 三次卷积核 (a = -0.5)"""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    a = CATMULL_ROM_A
    near = ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0
    far = ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def linear_weight(x: np.ndarray) -> np.ndarray:
    """三角（双线性）核"""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    return np.where(ax < 1.0, 1.0 - ax, 0.0)


_KERNELS = {
    "cubic": (cubic_weight, (-1, 0, 1, 2)),
    "linear": (linear_weight, (0, 1)),
}


@lru_cache(maxsize=256)
def resize_matrix(n_in: int, n_out: int, kernel: str = "cubic") -> np.ndarray:
    """构造一维重采样矩阵 R (n_out × n_in)，out = R @ in

    Args:
        n_in: 输入长度
        n_out: 输出长度
        kernel: "cubic" 或 "linear"

    Returns:
        只读矩阵
    """
    if n_in < 1 or n_out < 1:
        raise ValueError(f"resize lengths must be positive, got {n_in} -> {n_out}")
    weight_fn, offsets = _KERNELS[kernel]
    matrix = np.zeros((n_out, n_in), dtype=np.float64)
    for j in range(n_out):
        src = (j + 0.5) * n_in / n_out - 0.5
        base = int(np.floor(src))
        t = src - base
        for offset in offsets:
            w = float(weight_fn(t - offset))
            if w == 0.0:
                continue
            idx = min(max(base + offset, 0), n_in - 1)
            matrix[j, idx] += w
    matrix.setflags(write=False)
    return matrix


def apply_separable(image: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """对 H×W×C 数组施加 rows (H'×H) 与 cols (W'×W) 两个一维映射"""
    tmp = np.einsum("ih,hwc->iwc", rows, image)
    return np.einsum("jw,iwc->ijc", cols, tmp)


def apply_separable_transpose(grad: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """apply_separable 的伴随映射"""
    tmp = np.einsum("ih,ijc->hjc", rows, grad)
    return np.einsum("jw,hjc->hwc", cols, tmp)


def resize_array(image: np.ndarray, out_h: int, out_w: int, kernel: str = "cubic") -> np.ndarray:
    """按指定核把 H×W×C 数组重采样到 out_h × out_w（不截断取值范围）"""
    h, w = image.shape[:2]
    return apply_separable(
        image,
        resize_matrix(h, out_h, kernel),
        resize_matrix(w, out_w, kernel),
    )
