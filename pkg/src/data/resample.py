"""裁剪与双三次重采样"""

from fractions import Fraction
from typing import Tuple, Union

import numpy as np

from src.tensor.kernels import resize_array
from src.utils.errors import DataError

Factor = Union[int, float, Fraction]


def center_crop(image: np.ndarray, size: int) -> np.ndarray:
    """中心裁剪 size×size，左上角为 (⌊(H−size)/2⌋, ⌊(W−size)/2⌋)

    Raises:
        DataError: size 超过图像尺寸
    """
    height, width = image.shape[:2]
    if size < 1 or size > min(height, width):
        raise DataError(f"center crop {size} exceeds image {height}x{width}")
    top = (height - size) // 2
    left = (width - size) // 2
    return image[top:top + size, left:left + size].copy()


def scaled_size(height: int, width: int, factor: Factor) -> Tuple[int, int]:
    """输出尺寸 round(输入·factor)，按有理数计算避免浮点误差"""
    frac = Fraction(factor).limit_denominator(1_000_000)
    out_h = int(round(Fraction(height) * frac))
    out_w = int(round(Fraction(width) * frac))
    return out_h, out_w


def bicubic_resize(image: np.ndarray, factor: Factor) -> np.ndarray:
    """Catmull-Rom (a = -0.5) 双三次重采样，边缘夹取，结果截断到 [0, 1]

    Args:
        image: H×W×C 图像
        factor: 正有理缩放因子，例如 Fraction(1, 4) 或 4

    Returns:
        round(H·factor) × round(W·factor) × C 图像

    Raises:
        DataError: 输出尺寸不为正
    """
    if Fraction(factor) <= 0:
        raise DataError(f"resize factor must be positive, got {factor}")
    out_h, out_w = scaled_size(image.shape[0], image.shape[1], factor)
    return resize_to(image, out_h, out_w)


def resize_to(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """双三次重采样到指定尺寸并截断到 [0, 1]"""
    if out_h < 1 or out_w < 1:
        raise DataError(f"resize output size must be positive, got {out_h}x{out_w}")
    return np.clip(resize_array(np.asarray(image, dtype=np.float64), out_h, out_w, "cubic"), 0.0, 1.0)


def degrade(gt: np.ndarray, scale: int) -> np.ndarray:
    """×1/s 退化：LR = bicubic_resize(GT, 1/s)"""
    return bicubic_resize(gt, Fraction(1, scale))
