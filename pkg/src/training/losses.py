"""训练损失：L1 重建损失与固定随机卷积网络上的感知代理损失"""

from dataclasses import dataclass

import numpy as np

from src.tensor import Tensor
from src.tensor.ops import abs_, conv2d, reduce_mean, relu, sqrt, square, sub
from src.utils.rng import stream

PROXY_CHANNELS = 8


def l_rec(sr: Tensor, gt: Tensor) -> Tensor:
    """平均绝对误差（逐像素逐通道）"""
    return reduce_mean(abs_(sub(sr, gt)))


@dataclass(frozen=True)
class PerceptualProxy:
    """冻结的两层卷积特征提取器 3→8→8（ReLU），替代预训练的特征网络

    权重 ~ N(0, 1/fan_in)，由独立种子生成，训练中从不更新。
    """

    conv1_weight: Tensor
    conv1_bias: Tensor
    conv2_weight: Tensor
    conv2_bias: Tensor

    @classmethod
    def create(cls, seed: int) -> "PerceptualProxy":
        rng = stream("perceptual_proxy", seed)
        c = PROXY_CHANNELS
        w1 = rng.normal(0.0, np.sqrt(1.0 / 27.0), size=(3, 3, 3, c))
        w2 = rng.normal(0.0, np.sqrt(1.0 / (9.0 * c)), size=(3, 3, c, c))
        return cls(
            conv1_weight=Tensor.constant(w1),
            conv1_bias=Tensor.constant(np.zeros(c)),
            conv2_weight=Tensor.constant(w2),
            conv2_bias=Tensor.constant(np.zeros(c)),
        )

    def features(self, image: Tensor) -> Tensor:
        hidden = relu(conv2d(image, self.conv1_weight, self.conv1_bias, padding=1))
        return relu(conv2d(hidden, self.conv2_weight, self.conv2_bias, padding=1))


def l_per_proxy(sr: Tensor, gt: Tensor, proxy: PerceptualProxy) -> Tensor:
    """‖φ(sr) − φ(gt)‖_F / √N，N 为特征元素个数"""
    diff = sub(proxy.features(sr), proxy.features(gt))
    return sqrt(reduce_mean(square(diff)))
