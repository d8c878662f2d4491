"""训练损失、优化器与训练循环测试"""

import pytest
import sys
import os

import numpy as np
import pandas as pd
from pydantic import ValidationError

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from src.data import synthesize_triplet
from src.model import MatchVariant, ModelConfig, ModelParams, init_params
from src.tensor import Tensor
from src.training import (
    AdamConfig,
    LossProfile,
    OptimizerState,
    PerceptualProxy,
    TrainConfig,
    adam_step,
    l_per_proxy,
    l_rec,
    train,
    train_loss_gradients,
)
from src.utils.errors import DataError


def _tiny_dataset(count: int = 2):
    return [synthesize_triplet(2024, i, 1 + 2 * (i % 3), gt_size=16) for i in range(count)]


def _config(variant: MatchVariant = MatchVariant.DOWNSAMPLE) -> ModelConfig:
    return ModelConfig(feature_channels=4, variant=variant)


def _conv_relu_loop(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    h, wd, _ = x.shape
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    out = np.zeros((h, wd, w.shape[3]))
    for i in range(h):
        for j in range(wd):
            for o in range(w.shape[3]):
                out[i, j, o] = np.sum(xp[i:i + 3, j:j + 3, :] * w[:, :, :, o]) + b[o]
    return np.maximum(out, 0.0)


class TestLosses:
    """损失函数测试类"""

    def test_l_rec_is_mean_absolute_error(self):
        """测试 L1 重建损失"""
        sr = Tensor.constant(np.full((2, 2, 3), 0.5))
        gt = Tensor.constant(np.full((2, 2, 3), 0.25))
        assert l_rec(sr, gt).item() == pytest.approx(0.25)

    def test_l_per_zero_for_identical_images(self):
        """测试相同图像的感知损失为零"""
        proxy = PerceptualProxy.create(1)
        x = Tensor.constant(np.random.default_rng(0).uniform(size=(8, 8, 3)))
        assert l_per_proxy(x, x, proxy).item() == 0.0

    def test_l_per_positive_for_different_images(self):
        """测试不同图像的感知损失为正"""
        proxy = PerceptualProxy.create(1)
        rng = np.random.default_rng(0)
        a = Tensor.constant(rng.uniform(size=(8, 8, 3)))
        b = Tensor.constant(rng.uniform(size=(8, 8, 3)))
        assert l_per_proxy(a, b, proxy).item() > 0.0

    def test_proxy_is_deterministic(self):
        """测试感知代理网络由种子确定"""
        a, b = PerceptualProxy.create(5), PerceptualProxy.create(5)
        assert np.array_equal(a.conv1_weight.data, b.conv1_weight.data)
        assert a.conv2_weight.shape == (3, 3, 8, 8)

    def test_l_per_matches_explicit_convolution(self):
        """测试感知代理损失与逐元素循环实现的卷积网络一致"""
        proxy = PerceptualProxy.create(3)
        rng = np.random.default_rng(12)
        sr, gt = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))

        def phi(x):
            hidden = _conv_relu_loop(x, proxy.conv1_weight.data, proxy.conv1_bias.data)
            return _conv_relu_loop(hidden, proxy.conv2_weight.data, proxy.conv2_bias.data)

        expected = np.sqrt(np.mean(np.square(phi(sr) - phi(gt))))
        actual = l_per_proxy(Tensor.constant(sr), Tensor.constant(gt), proxy).item()
        assert actual == pytest.approx(expected, rel=1e-10)


class TestAdam:
    """Adam 测试类"""

    def test_first_step_moves_by_learning_rate(self):
        """测试第一步更新幅度约等于学习率（偏差修正后）"""
        config = _config()
        params = ModelParams.zeros(config)
        grads = {name: np.full(arr.shape, 3.0) for name, arr in params.items()}
        updated, state = adam_step(params, grads, OptimizerState.zeros_like(params), AdamConfig(learning_rate=0.01))
        assert state.step == 1
        assert np.allclose(updated["fusion.conv2.bias"], -0.01, rtol=1e-6)

    def test_does_not_mutate_inputs(self):
        """测试不修改输入参数"""
        config = _config()
        params = init_params(config, 0)
        before = params["lr_encoder.conv1.weight"].copy()
        grads = {name: np.ones(arr.shape) for name, arr in params.items()}
        adam_step(params, grads, OptimizerState.zeros_like(params), AdamConfig())
        assert np.array_equal(params["lr_encoder.conv1.weight"], before)

    def test_zero_gradient_keeps_params(self):
        """测试梯度全零时参数保持不变"""
        params = init_params(_config(), 0)
        grads = {name: np.zeros(arr.shape) for name, arr in params.items()}
        updated, _ = adam_step(params, grads, OptimizerState.zeros_like(params), AdamConfig())
        assert all(np.array_equal(updated[k], params[k]) for k in params)

    def test_invalid_betas(self):
        """测试非法 beta"""
        with pytest.raises(ValidationError):
            AdamConfig(betas=(0.9, 1.0))


class TestTrainConfig:
    """TrainConfig 测试类"""

    def test_rec_profile_has_no_perceptual_weight(self):
        """测试 rec 档位的 λ1 为 0"""
        assert TrainConfig.for_profile("rec").lambda_per == 0.0
        assert TrainConfig.for_profile("full-proxy").lambda_per > 0.0

    def test_rec_with_lambda_rejected(self):
        """测试 rec 档位不能设置 λ1"""
        with pytest.raises(ValidationError):
            TrainConfig(profile=LossProfile.REC, lambda_per=0.1)

    def test_overrides(self):
        """测试覆盖默认值"""
        config = TrainConfig.for_profile(LossProfile.FULL_PROXY, steps=3, lambda_per=0.2)
        assert config.steps == 3
        assert config.lambda_per == 0.2


class TestLossGradients:
    """批梯度测试类"""

    def test_matches_finite_difference(self):
        """测试批损失对单个参数的梯度与差分一致"""
        config = _config(MatchVariant.FULLRES)
        params = init_params(config, 2)
        proxy = PerceptualProxy.create(1)
        batch = _tiny_dataset(2)
        _, grads = train_loss_gradients(params, proxy, batch, config, lambda_per=0.05)

        name, index, h = "fusion.conv2.bias", 1, 1e-6

        def total(delta: float) -> float:
            arrays = {k: np.array(v) for k, v in params.items()}
            arrays[name][index] += delta
            return train_loss_gradients(ModelParams.from_arrays(arrays), proxy, batch, config, 0.05)[0].total

        numeric = (total(h) - total(-h)) / (2 * h)
        assert grads[name][index] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_rec_profile_still_reports_perceptual_term(self):
        """测试 rec 档位仍记录 per 项但不计入总损失"""
        config = _config()
        loss, _ = train_loss_gradients(init_params(config, 0), PerceptualProxy.create(1), _tiny_dataset(1), config, 0.0)
        assert loss.per > 0.0
        assert loss.total == loss.rec

    def test_thread_jobs_do_not_change_result(self):
        """测试批内并发不影响结果"""
        config = _config()
        params, proxy, batch = init_params(config, 0), PerceptualProxy.create(1), _tiny_dataset(3)
        serial = train_loss_gradients(params, proxy, batch, config, 0.05, jobs=1)
        threaded = train_loss_gradients(params, proxy, batch, config, 0.05, jobs=3)
        assert serial[0] == threaded[0]
        assert all(np.array_equal(serial[1][k], threaded[1][k]) for k in serial[1])

    def test_empty_batch(self):
        """测试空批次"""
        config = _config()
        with pytest.raises(DataError):
            train_loss_gradients(init_params(config, 0), PerceptualProxy.create(1), [], config, 0.0)


class TestTrain:
    """训练循环测试类"""

    def test_history_and_loss_csv(self, tmp_path):
        """测试损失记录与 CSV 输出"""
        config = TrainConfig.for_profile(LossProfile.FULL_PROXY, steps=3, batch_size=2, log_every=1)
        run = train(config, _config(), _tiny_dataset(2))
        assert [step for step, _ in run.history] == [1, 2, 3]
        path = run.write_loss_csv(tmp_path / "loss.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["step", "loss_total", "loss_rec", "loss_per"]
        assert len(frame) == 3

    def test_deterministic(self):
        """测试同种子训练结果一致"""
        config = TrainConfig.for_profile(LossProfile.REC, steps=2, batch_size=1)
        a = train(config, _config(), _tiny_dataset(2))
        b = train(config, _config(), _tiny_dataset(2))
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_perceptual_weight_changes_result(self):
        """测试同种子下 λ1=0 与 λ1=0.05 训练出的参数不同"""
        plain = TrainConfig.for_profile(LossProfile.FULL_PROXY, steps=2, batch_size=1, lambda_per=0.0)
        weighted = TrainConfig.for_profile(LossProfile.FULL_PROXY, steps=2, batch_size=1, lambda_per=0.05)
        a = train(plain, _config(), _tiny_dataset(2))
        b = train(weighted, _config(), _tiny_dataset(2))
        assert list(a.params) == list(b.params)
        assert any(not np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_on_step_callback(self):
        """测试每步回调"""
        seen = []
        config = TrainConfig.for_profile(LossProfile.REC, steps=2, batch_size=1)
        train(config, _config(), _tiny_dataset(1), on_step=lambda step, loss: seen.append(step))
        assert seen == [1, 2]

    def test_empty_dataset(self):
        """测试空训练集"""
        with pytest.raises(DataError):
            train(TrainConfig.for_profile(LossProfile.REC, steps=1), _config(), [])

    @pytest.mark.slow
    def test_loss_decreases(self):
        """测试短训练后重建损失下降"""
        config = TrainConfig.for_profile(LossProfile.REC, steps=60, batch_size=2, learning_rate=3e-3)
        run = train(config, _config(MatchVariant.FULLRES), _tiny_dataset(2))
        first = np.mean([loss.rec for _, loss in run.history[:5]])
        last = np.mean([loss.rec for _, loss in run.history[-5:]])
        assert last < first


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
