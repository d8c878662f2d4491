"""双输入超分模型测试"""

import pytest
import sys
import os

import numpy as np
from pydantic import ValidationError

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from src.data import resize_to
from src.harness.verify import lowpass_pair
from src.model import (
    MatchVariant,
    ModelConfig,
    ModelParams,
    compute_key_features,
    forward_graph,
    init_params,
    match_textures,
    super_resolve,
)
from src.tensor import ComputationRecord, Tensor, grad_of
from src.tensor.primitives import patch_grid
from src.tensor.ops import reduce_mean, square
from src.utils.errors import ShapeMismatchError


def _config(variant: MatchVariant, channels: int = 4) -> ModelConfig:
    return ModelConfig(feature_channels=channels, variant=variant)


class TestModelConfig:
    """ModelConfig 测试类"""

    def test_defaults(self):
        """测试默认结构"""
        config = ModelConfig()
        assert config.scale == 4
        assert config.variant == MatchVariant.DOWNSAMPLE
        assert config.value_patch == 12
        assert config.value_padding == 4

    def test_key_strides(self):
        """测试两种变体的 key 步长"""
        assert _config(MatchVariant.DOWNSAMPLE).key_stride == 2
        assert _config(MatchVariant.DOWNSAMPLE).key_hr_stride == 8
        assert _config(MatchVariant.FULLRES).key_stride == 4
        assert _config(MatchVariant.FULLRES).key_hr_stride == 4
        assert _config(MatchVariant.DOWNSAMPLE).key_padding == 1
        assert _config(MatchVariant.FULLRES).key_padding == 0

    def test_even_patch_rejected(self):
        """测试偶数块尺寸"""
        with pytest.raises(ValidationError):
            ModelConfig(patch_size=4)

    def test_fullres_stride_must_align(self):
        """测试 fullres 的 HR 步长必须是倍率的整数倍"""
        with pytest.raises(ValidationError):
            ModelConfig(variant=MatchVariant.FULLRES, hr_match_stride=6)

    def test_fullres_patch_must_cover_value_centre(self):
        """测试 fullres 的 key 块太小、无法对齐 value 中心时被拒绝"""
        with pytest.raises(ValidationError):
            ModelConfig(variant=MatchVariant.FULLRES, scale=8, hr_match_stride=8)
        assert ModelConfig(variant=MatchVariant.FULLRES, scale=8, hr_match_stride=8, patch_size=7).key_padding == 0


class TestModelParams:
    """ModelParams 测试类"""

    def test_shape_table_order(self):
        """测试参数表顺序与形状"""
        table = ModelParams.shape_table(_config(MatchVariant.DOWNSAMPLE, channels=4))
        assert table[0] == ("lr_encoder.conv1.weight", (3, 3, 3, 4))
        assert table[-1] == ("fusion.conv2.bias", (3,))
        assert ("fusion.conv1.weight", (3, 3, 8, 4)) in table
        assert len(table) == 16

    def test_init_deterministic(self):
        """测试同种子初始化一致"""
        config = _config(MatchVariant.FULLRES)
        a, b = init_params(config, 3), init_params(config, 3)
        assert all(np.array_equal(a[name], b[name]) for name in a)
        assert not np.array_equal(a["lr_encoder.conv1.weight"], init_params(config, 4)["lr_encoder.conv1.weight"])

    def test_biases_start_at_zero(self):
        """测试偏置初始化为零"""
        params = init_params(_config(MatchVariant.DOWNSAMPLE), 0)
        assert all(np.all(params[name] == 0.0) for name in params if name.endswith(".bias"))

    def test_weight_variance_matches_fan_in(self):
        """测试权重方差约为 1/fan_in"""
        weights = init_params(ModelConfig(), 0)["fusion.conv1.weight"]
        fan_in = weights.shape[0] * weights.shape[1] * weights.shape[2]
        assert weights.size >= 1000
        assert abs(weights.var() * fan_in - 1.0) <= 0.2

    def test_check_rejects_other_width(self):
        """测试通道数不一致的参数"""
        params = init_params(_config(MatchVariant.DOWNSAMPLE, channels=4), 0)
        with pytest.raises(ShapeMismatchError):
            params.check(_config(MatchVariant.DOWNSAMPLE, channels=8))

    def test_params_are_read_only(self):
        """测试参数数组只读"""
        params = ModelParams.zeros(_config(MatchVariant.DOWNSAMPLE))
        with pytest.raises(ValueError):
            params["fusion.conv2.bias"][0] = 1.0


class TestForward:
    """前向与匹配测试类"""

    @pytest.fixture
    def images(self):
        rng = np.random.default_rng(0)
        return rng.uniform(0.0, 1.0, size=(8, 8, 3)), rng.uniform(0.0, 1.0, size=(32, 32, 3))

    @pytest.mark.parametrize("variant,keys", [(MatchVariant.DOWNSAMPLE, 16), (MatchVariant.FULLRES, 64)])
    def test_shapes(self, images, variant, keys):
        """测试输出尺寸与匹配网格"""
        lr, ref = images
        config = _config(variant)
        trace = forward_graph(init_params(config, 1).as_constants(), config, Tensor.constant(lr), Tensor.constant(ref))
        assert trace.sr.shape == (32, 32, 3)
        assert trace.correspondence.num_queries == 16
        assert trace.correspondence.num_keys == keys
        assert trace.transferred.shape == (32, 32, 4)
        assert np.allclose(trace.correspondence.weights.sum(axis=1), 1.0)
        assert trace.correspondence.query_grid[1].tolist() == [0, 2]

    def test_output_range(self, images):
        """测试输出在 [0, 1] 内"""
        lr, ref = images
        config = _config(MatchVariant.FULLRES)
        sr = super_resolve(init_params(config, 2), config, lr, ref)
        assert sr.min() >= 0.0 and sr.max() <= 1.0

    def test_zero_params_leave_bicubic_residual(self, images):
        """测试全零网络只剩全局双三次残差"""
        lr, ref = images
        config = _config(MatchVariant.DOWNSAMPLE)
        sr = super_resolve(ModelParams.zeros(config), config, lr, ref)
        assert np.array_equal(sr, resize_to(lr, 32, 32))

    def test_ref_size_must_match(self, images):
        """测试参考图尺寸必须是 LR 的 s 倍"""
        lr, _ = images
        config = _config(MatchVariant.DOWNSAMPLE)
        with pytest.raises(ShapeMismatchError):
            super_resolve(init_params(config, 0), config, lr, np.zeros((28, 32, 3)))

    def test_deterministic(self, images):
        """测试前向确定性"""
        lr, ref = images
        config = _config(MatchVariant.FULLRES)
        params = init_params(config, 5)
        assert np.array_equal(super_resolve(params, config, lr, ref), super_resolve(params, config, lr, ref))


class TestMatchTextures:
    """纹理匹配测试类"""

    @pytest.fixture
    def features(self):
        rng = np.random.default_rng(11)
        return Tensor.constant(rng.normal(size=(8, 8, 4))), Tensor.constant(rng.normal(size=(8, 8, 4)))

    def test_rows_on_simplex(self, features):
        """测试每行权重非负且和为 1"""
        queries, keys = features
        for variant in MatchVariant:
            weights = match_textures(queries, keys, _config(variant)).weights
            assert np.all(weights >= 0.0)
            assert np.max(np.abs(weights.sum(axis=1) - 1.0)) <= 1e-9

    def test_self_match_picks_corresponding_key(self, features):
        """测试参考特征与查询相同时每行最大权重落在对应位置"""
        queries, _ = features
        correspondence = match_textures(queries, queries, _config(MatchVariant.DOWNSAMPLE))
        assert np.array_equal(correspondence.query_grid, correspondence.key_grid)
        assert correspondence.weights.argmax(axis=1).tolist() == list(range(correspondence.num_queries))

    def test_self_match_through_downsampled_reference(self):
        """测试参考图的 ×1/4 下采样等于 LR 时 downsample 变体自匹配"""
        rng = np.random.default_rng(12)
        ref = rng.uniform(0.25, 0.75, size=(32, 32, 3))
        lr = resize_to(ref, 8, 8)
        config = _config(MatchVariant.DOWNSAMPLE)
        trace = forward_graph(init_params(config, 2).as_constants(), config, Tensor.constant(lr), Tensor.constant(ref))
        assert np.allclose(trace.key_features.data, trace.lr_features.data)
        hits = trace.correspondence.weights.argmax(axis=1) == np.arange(trace.correspondence.num_queries)
        assert hits.all()

    def test_high_temperature_is_uniform(self, features):
        """测试温度极大时每行趋于均匀分布 1/K"""
        queries, keys = features
        config = ModelConfig(feature_channels=4, attention_temperature=1e6)
        correspondence = match_textures(queries, keys, config)
        assert np.max(np.abs(correspondence.weights - 1.0 / correspondence.num_keys)) <= 1e-6

    def test_channel_mismatch(self, features):
        """测试查询与 key 通道数不同"""
        queries, _ = features
        with pytest.raises(ShapeMismatchError):
            match_textures(queries, Tensor.constant(np.zeros((8, 8, 3))), _config(MatchVariant.DOWNSAMPLE))

    @pytest.mark.parametrize("variant", list(MatchVariant))
    def test_key_centres_align_with_value_patches(self, variant):
        """测试 key 中心映射到 HR 后与所取 value 块中心相差不超过半个像素"""
        rng = np.random.default_rng(13)
        config = _config(variant)
        trace = forward_graph(
            init_params(config, 0).as_constants(), config,
            Tensor.constant(rng.uniform(size=(8, 8, 3))), Tensor.constant(rng.uniform(size=(32, 32, 3))),
        )
        s = config.scale
        keys = trace.correspondence.key_grid.astype(float)
        if variant == MatchVariant.DOWNSAMPLE:
            keys = s * keys + (s - 1) / 2
        count = patch_grid(32, config.value_patch, config.key_hr_stride, config.value_padding)
        starts = np.arange(count) * config.key_hr_stride - config.value_padding + (config.value_patch - 1) / 2
        rows, cols = np.meshgrid(starts, starts, indexing="ij")
        values = np.stack([rows.reshape(-1), cols.reshape(-1)], axis=1)
        assert keys.shape == values.shape
        assert np.max(np.abs(keys - values)) <= 0.5


class TestLowPassKeys:
    """downsample 变体的低通性质"""

    def test_annihilated_perturbation_keeps_downsample_keys(self):
        """测试被 ×1/4 核抵消的扰动不改变 downsample 变体的 key"""
        ref, perturbation = lowpass_pair(np.random.default_rng(3))
        config = _config(MatchVariant.DOWNSAMPLE)
        params = init_params(config, 0).as_constants()
        clean = compute_key_features(params, config, Tensor.constant(ref)).data
        dirty = compute_key_features(params, config, Tensor.constant(ref + perturbation)).data
        assert np.array_equal(clean, dirty)

    def test_same_perturbation_moves_fullres_keys(self):
        """测试同一扰动会改变 fullres 变体的 key"""
        ref, perturbation = lowpass_pair(np.random.default_rng(3))
        config = _config(MatchVariant.FULLRES)
        params = init_params(config, 0).as_constants()
        clean = compute_key_features(params, config, Tensor.constant(ref)).data
        dirty = compute_key_features(params, config, Tensor.constant(ref + perturbation)).data
        assert not np.array_equal(clean, dirty)

    def test_perturbation_stays_in_range(self):
        """测试构造的扰动不越界"""
        ref, perturbation = lowpass_pair(np.random.default_rng(4))
        assert np.max(np.abs(perturbation)) == pytest.approx(1 / 64)
        assert (ref + perturbation).min() >= 0.0 and (ref + perturbation).max() <= 1.0


class TestGradients:
    """对参考图求导"""

    @pytest.mark.parametrize("variant", list(MatchVariant))
    def test_gradient_reaches_reference(self, variant):
        """测试损失对参考图的梯度非零且有限"""
        rng = np.random.default_rng(9)
        config = _config(variant)
        params = init_params(config, 1).as_constants()
        lr = Tensor.constant(rng.uniform(size=(4, 4, 3)))
        record = ComputationRecord()
        ref = record.leaf(rng.uniform(size=(16, 16, 3)))
        loss = reduce_mean(square(forward_graph(params, config, lr, ref).sr))
        grad = grad_of(loss, ref)
        assert grad.shape == (16, 16, 3)
        assert np.all(np.isfinite(grad))
        assert np.any(grad != 0.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
