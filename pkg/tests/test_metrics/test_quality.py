"""图像质量指标测试"""

import pytest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from src.metrics import evaluate_attack, psnr, ssim, to_luma
from src.utils.errors import ShapeMismatchError


@pytest.fixture
def image():
    return np.random.default_rng(0).uniform(0.2, 0.8, size=(16, 16, 3))


def _ssim_reference(a: np.ndarray, b: np.ndarray, sigma: float = 1.5, radius: int = 5) -> float:
    """逐通道直接计算：可分离高斯加权的局部统计，只在有效区域取平均"""
    taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2 * sigma**2))
    window = np.outer(taps, taps) / taps.sum() ** 2
    c1, c2 = 0.01**2, 0.03**2
    size = 2 * radius + 1
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        for i in range(x.shape[0] - size + 1):
            for j in range(x.shape[1] - size + 1):
                px, py = x[i:i + size, j:j + size], y[i:i + size, j:j + size]
                mx, my = np.sum(window * px), np.sum(window * py)
                vx = np.sum(window * px * px) - mx * mx
                vy = np.sum(window * py * py) - my * my
                cxy = np.sum(window * px * py) - mx * my
                scores.append((2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
    return float(np.mean(scores))


class TestPSNR:
    """PSNR 测试类"""

    def test_uniform_offset(self, image):
        """测试整体偏移 0.1 时为 20 dB"""
        assert psnr(image, image + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_budget_offset(self, image):
        """测试整体偏移 8/255 时约为 30.07 dB"""
        assert psnr(image, image + 8 / 255) == pytest.approx(30.07, abs=0.01)

    def test_symmetric(self, image):
        """测试 PSNR 与 SSIM 对称"""
        other = np.clip(image + np.random.default_rng(3).normal(0.0, 0.05, image.shape), 0.0, 1.0)
        assert psnr(image, other) == psnr(other, image)
        assert ssim(image, other) == pytest.approx(ssim(other, image), abs=1e-12)

    def test_decreases_with_offset(self, image):
        """测试整体偏移增大时 PSNR 严格下降"""
        values = [psnr(image, image + offset) for offset in (0.01, 0.02, 0.05, 0.1, 0.2)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_identical_images_capped(self, image):
        """测试相同图像取上限"""
        assert psnr(image, image) == 100.0

    def test_shape_mismatch(self, image):
        """测试形状不同"""
        with pytest.raises(ShapeMismatchError):
            psnr(image, image[:8])


class TestSSIM:
    """SSIM 测试类"""

    def test_self_similarity(self, image):
        """测试自身 SSIM 为 1"""
        assert abs(ssim(image, image) - 1.0) <= 1e-12

    def test_constant_images(self):
        """测试常数图像只剩亮度项"""
        a = np.full((16, 16, 3), 0.25)
        b = np.full((16, 16, 3), 0.75)
        c1 = 1e-4
        expected = (2 * 0.25 * 0.75 + c1) / (0.25**2 + 0.75**2 + c1)
        assert ssim(a, b) == pytest.approx(expected, abs=1e-6)

    def test_matches_direct_computation(self, image):
        """测试与逐窗口直接计算的 SSIM 一致"""
        other = np.clip(image + np.random.default_rng(4).normal(0.0, 0.05, image.shape), 0.0, 1.0)
        assert abs(ssim(image, other) - _ssim_reference(image, other)) <= 1e-9

    def test_noise_lowers_ssim(self, image):
        """测试加噪后 SSIM 下降"""
        noisy = np.clip(image + np.random.default_rng(1).normal(0.0, 0.1, image.shape), 0.0, 1.0)
        assert ssim(image, noisy) < 0.9

    def test_too_small(self):
        """测试小于窗口的图像"""
        small = np.zeros((8, 8, 3))
        with pytest.raises(ShapeMismatchError):
            ssim(small, small)


class TestLuma:
    """亮度通道测试类"""

    def test_black_and_white(self):
        """测试 BT.601 的黑白电平"""
        rgb = np.zeros((2, 2, 3))
        rgb[1] = 1.0
        luma = to_luma(rgb)
        assert luma.shape == (2, 2)
        assert luma[0, 0] == pytest.approx(16 / 255)
        assert luma[1, 0] == pytest.approx(235 / 255)

    def test_requires_rgb(self):
        """测试输入必须是三通道"""
        with pytest.raises(ShapeMismatchError):
            to_luma(np.zeros((4, 4)))

    def test_y_channel_metrics(self, image):
        """测试 Y 通道指标"""
        assert psnr(image, image, y_channel=True) == 100.0
        assert abs(ssim(image, image, y_channel=True) - 1.0) <= 1e-12


class TestEvaluateAttack:
    """攻击质量报告测试类"""

    def test_no_attack_identity(self, image):
        """测试未攻击时下降量为 0、隐蔽性取上限"""
        report = evaluate_attack(image, image, image, image, image)
        assert report.psnr_drop == 0.0
        assert report.ssim_drop == 0.0
        assert report.psnr_stealth == 100.0
        assert abs(report.ssim_stealth - 1.0) <= 1e-12

    def test_drops_are_differences(self, image):
        """测试下降量等于干净与对抗指标之差"""
        rng = np.random.default_rng(2)
        gt = image
        clean = np.clip(gt + rng.normal(0.0, 0.01, gt.shape), 0.0, 1.0)
        adv = np.clip(gt + rng.normal(0.0, 0.1, gt.shape), 0.0, 1.0)
        adv_ref = np.clip(gt + 4 / 255, 0.0, 1.0)
        report = evaluate_attack(gt, clean, adv, gt, adv_ref)
        assert report.psnr_drop == report.psnr_clean - report.psnr_adv
        assert report.ssim_drop == report.ssim_clean - report.ssim_adv
        assert report.psnr_drop > 0.0
        assert report.psnr_stealth == pytest.approx(20 * np.log10(255 / 4))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
