"""图像质量指标"""

from .quality import QualityReport, evaluate_attack, psnr, ssim, to_luma

__all__ = ["QualityReport", "evaluate_attack", "psnr", "ssim", "to_luma"]
