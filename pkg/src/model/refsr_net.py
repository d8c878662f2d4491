"""紧凑的双输入参考图超分模型 M(I_LR, I_Ref; θ)

流水线：编码 LR → 计算参考图 key 特征 → 软注意力纹理匹配 →
按注意力加权搬运全分辨率参考 value 块并重叠平均折叠 →
与 ×s 双线性上采样的 LR 特征拼接后融合 → 加上 ×s 双三次全局残差 → clamp01。

两种匹配变体只在 key 的来源上不同：
- downsample: 参考图先 ×1/s 双三次下采样再编码（对高频扰动是低通的）
- fullres:    在全分辨率参考特征上按 HR 网格取 key
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from src.tensor import Tensor
from src.tensor.ops import (
    add,
    bicubic_resize,
    bilinear_resize,
    clamp01,
    concat_channels,
    conv2d,
    fold_patches_overlap_average,
    l2_normalize_rows,
    matmul,
    relu,
    softmax_rows,
    unfold_patches,
)
from src.tensor.primitives import patch_grid
from src.utils.errors import ShapeMismatchError
from src.utils.rng import stream

from .schemas import Correspondence, MatchVariant, ModelConfig, ModelParams

ParamTensors = Mapping[str, Tensor]


@dataclass(frozen=True)
class ForwardTrace:
    """一次前向的中间结果"""

    sr: Tensor
    lr_features: Tensor
    key_features: Tensor
    value_features: Tensor
    correspondence: Correspondence
    transferred: Tensor


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """初始化参数：权重 ~ N(0, 1/fan_in)，偏置为零"""
    rng = stream("model", seed)
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in ModelParams.shape_table(config):
        if name.endswith(".weight"):
            fan_in = shape[0] * shape[1] * shape[2]
            arrays[name] = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape)
        else:
            arrays[name] = np.zeros(shape)
    return ModelParams.from_arrays(arrays)


def _encode(x: Tensor, params: ParamTensors, prefix: str) -> Tensor:
    hidden = conv2d(x, params[f"{prefix}.conv1.weight"], params[f"{prefix}.conv1.bias"], padding=1)
    return conv2d(relu(hidden), params[f"{prefix}.conv2.weight"], params[f"{prefix}.conv2.bias"], padding=1)


def _grid_centers(height: int, width: int, patch: int, stride: int, pad: int) -> np.ndarray:
    """块中心坐标：第 k 个块的中心在 k·stride − pad + patch//2"""
    offset = patch // 2 - pad
    rows = np.arange(patch_grid(height, patch, stride, pad)) * stride + offset
    cols = np.arange(patch_grid(width, patch, stride, pad)) * stride + offset
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.reshape(-1), cc.reshape(-1)], axis=1)


def compute_key_features(params: ParamTensors, config: ModelConfig, ref: Tensor) -> Tensor:
    """参考图 key 特征；downsample 变体先做 ×1/s 双三次下采样"""
    if config.variant == MatchVariant.DOWNSAMPLE:
        height, width = ref.shape[0] // config.scale, ref.shape[1] // config.scale
        ref = bicubic_resize(ref, (height, width))
    return _encode(ref, params, "ref_key_encoder")


def match_textures(lr_features: Tensor, ref_key_features: Tensor, config: ModelConfig) -> Correspondence:
    """软注意力纹理匹配

    两张特征图按各自网格展开成 p×p 块，逐块 L2 归一化后计算余弦相似度，
    再按温度 τ 做行 softmax。全程可导（无 argmax）。

    Raises:
        ShapeMismatchError: 特征图通道数不同或网格为空
    """
    if lr_features.shape[2] != ref_key_features.shape[2]:
        raise ShapeMismatchError(
            "match_textures", "query and key feature channels differ", [lr_features.shape, ref_key_features.shape]
        )
    p = config.patch_size
    queries = unfold_patches(lr_features, p, config.match_stride, p // 2)
    keys = unfold_patches(ref_key_features, p, config.key_stride, config.key_padding)
    similarity = matmul(l2_normalize_rows(queries), l2_normalize_rows(keys), transpose_b=True)
    attention = softmax_rows(similarity, config.attention_temperature)
    return Correspondence(
        attention=attention,
        query_grid=_grid_centers(lr_features.shape[0], lr_features.shape[1], p, config.match_stride, p // 2),
        key_grid=_grid_centers(
            ref_key_features.shape[0], ref_key_features.shape[1], p, config.key_stride, config.key_padding
        ),
    )


def _check_inputs(config: ModelConfig, lr: Tensor, ref: Tensor) -> None:
    s = config.scale
    if len(lr.shape) != 3 or lr.shape[2] != 3 or len(ref.shape) != 3 or ref.shape[2] != 3:
        raise ShapeMismatchError("super_resolve", "lr and ref must be H×W×3 images", [lr.shape, ref.shape])
    if ref.shape[:2] != (s * lr.shape[0], s * lr.shape[1]):
        raise ShapeMismatchError(
            "super_resolve", f"ref must be {s}x the lr size ({s * lr.shape[0]}x{s * lr.shape[1]})", [lr.shape, ref.shape]
        )


def forward_graph(params: ParamTensors, config: ModelConfig, lr: Tensor, ref: Tensor) -> ForwardTrace:
    """在张量上执行完整前向，params / lr / ref 任一挂接在记录上即可求导

    Raises:
        ShapeMismatchError: lr、ref 与倍率 s 不匹配
    """
    _check_inputs(config, lr, ref)
    s = config.scale
    hr_h, hr_w = s * lr.shape[0], s * lr.shape[1]
    channels = config.feature_channels

    lr_features = _encode(lr, params, "lr_encoder")
    key_features = compute_key_features(params, config, ref)
    correspondence = match_textures(lr_features, key_features, config)

    value_features = _encode(ref, params, "ref_value_encoder")
    values = unfold_patches(value_features, config.value_patch, config.key_hr_stride, config.value_padding)
    if values.shape[0] != correspondence.num_keys:
        raise ShapeMismatchError(
            "super_resolve",
            f"{values.shape[0]} value patches for {correspondence.num_keys} keys",
            [ref.shape, key_features.shape],
        )
    transferred = fold_patches_overlap_average(
        matmul(correspondence.attention, values),
        (hr_h, hr_w, channels),
        config.value_patch,
        s * config.match_stride,
        config.value_padding,
    )

    fused = concat_channels(bilinear_resize(lr_features, (hr_h, hr_w)), transferred)
    fused = conv2d(fused, params["fusion.conv1.weight"], params["fusion.conv1.bias"], padding=1)
    fused = conv2d(relu(fused), params["fusion.conv2.weight"], params["fusion.conv2.bias"], padding=1)
    sr = clamp01(add(fused, bicubic_resize(lr, (hr_h, hr_w))))

    return ForwardTrace(
        sr=sr,
        lr_features=lr_features,
        key_features=key_features,
        value_features=value_features,
        correspondence=correspondence,
        transferred=transferred,
    )


def super_resolve(
    params: ModelParams,
    config: ModelConfig,
    lr: np.ndarray,
    ref: np.ndarray,
    param_tensors: Optional[ParamTensors] = None,
) -> np.ndarray:
    """超分一张图像（不记录计算图）

    Args:
        params: 模型参数
        config: 模型配置
        lr: H×W×3 低分辨率输入
        ref: sH×sW×3 参考图
        param_tensors: 已转换好的参数张量，批量调用时可复用

    Returns:
        sH×sW×3 输出图像
    """
    tensors = param_tensors if param_tensors is not None else params.as_constants()
    trace = forward_graph(tensors, config, Tensor.constant(lr), Tensor.constant(ref))
    return np.array(trace.sr.data)
