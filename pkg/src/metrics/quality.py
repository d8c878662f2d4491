"""图像质量指标：PSNR、SSIM 与攻击质量报告"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field
from skimage.color import rgb2ycbcr
from skimage.metrics import structural_similarity

from src.utils.errors import ShapeMismatchError

PSNR_CAP = 100.0
MSE_FLOOR = 1e-10
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a: np.ndarray, b: np.ndarray, op: str, y_channel: bool) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(op, "images must have the same shape", [a.shape, b.shape])
    if y_channel:
        return to_luma(a), to_luma(b)
    return a, b


def to_luma(image: np.ndarray) -> np.ndarray:
    """BT.601 亮度 Y = (16 + 65.481R + 128.553G + 24.966B) / 255，输入 RGB ∈ [0, 1]"""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError("to_luma", "expected an H×W×3 image", [image.shape])
    return rgb2ycbcr(image)[:, :, 0] / 255.0


def psnr(a: np.ndarray, b: np.ndarray, y_channel: bool = False, cap: float = PSNR_CAP) -> float:
    """PSNR = 10·log10(1 / MSE)，MSE < 1e-10 时取上限 100 dB"""
    a, b = _pair(a, b, "psnr", y_channel)
    mse = float(np.mean((a - b) ** 2))
    if mse < MSE_FLOOR:
        return cap
    return min(10.0 * np.log10(1.0 / mse), cap)


def ssim(a: np.ndarray, b: np.ndarray, y_channel: bool = False) -> float:
    """单尺度 SSIM

    11×11 高斯窗 (σ=1.5)，K1=0.01，K2=0.03，动态范围 1.0；
    局部统计使用总体方差，只在窗口完全落在图内的有效区域取平均，
    逐通道计算后对 3 个通道求平均。

    Raises:
        ShapeMismatchError: 形状不同或边长小于窗口
    """
    a, b = _pair(a, b, "ssim", y_channel)
    if min(a.shape[0], a.shape[1]) < SSIM_WINDOW:
        raise ShapeMismatchError("ssim", f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window", [a.shape])
    value = structural_similarity(
        a,
        b,
        data_range=1.0,
        channel_axis=None if a.ndim == 2 else -1,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
    )
    return float(value)


class QualityReport(BaseModel):
    """单样本攻击质量报告：干净输出、对抗输出、性能下降、隐蔽性"""

    psnr_clean: float = Field(..., description="干净输出 vs GT")
    ssim_clean: float = Field(...)
    psnr_adv: float = Field(..., description="对抗输出 vs GT")
    ssim_adv: float = Field(...)
    psnr_drop: float = Field(..., description="psnr_clean − psnr_adv")
    ssim_drop: float = Field(..., description="ssim_clean − ssim_adv")
    psnr_stealth: float = Field(..., description="干净参考图 vs 对抗参考图")
    ssim_stealth: float = Field(...)


def evaluate_attack(
    gt: np.ndarray,
    clean_sr: np.ndarray,
    adv_sr: np.ndarray,
    ref: np.ndarray,
    adv_ref: np.ndarray,
    y_channel: bool = False,
) -> QualityReport:
    """组装质量报告，下降量按对应指标之差计算"""
    psnr_clean = psnr(clean_sr, gt, y_channel)
    ssim_clean = ssim(clean_sr, gt, y_channel)
    psnr_adv = psnr(adv_sr, gt, y_channel)
    ssim_adv = ssim(adv_sr, gt, y_channel)
    return QualityReport(
        psnr_clean=psnr_clean,
        ssim_clean=ssim_clean,
        psnr_adv=psnr_adv,
        ssim_adv=ssim_adv,
        psnr_drop=psnr_clean - psnr_adv,
        ssim_drop=ssim_clean - ssim_adv,
        psnr_stealth=psnr(ref, adv_ref, y_channel),
        ssim_stealth=ssim(ref, adv_ref, y_channel),
    )
