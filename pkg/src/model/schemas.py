"""模型配置、参数容器与匹配结果"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from config import settings
from src.tensor import ComputationRecord, Tensor
from src.utils.errors import ShapeMismatchError

Shape = Tuple[int, ...]


class MatchVariant(str, Enum):
    """纹理匹配变体"""
    DOWNSAMPLE = "downsample"  # 在 ×1/s 参考图上计算 key（低通）
    FULLRES = "fullres"        # 在全分辨率参考特征上计算 key


class ModelConfig(BaseModel):
    """双输入超分模型的结构超参数"""

    scale: int = Field(default=4, ge=2, description="超分倍率 s")
    feature_channels: int = Field(default=16, ge=1, description="特征通道数 C")
    patch_size: int = Field(default=3, ge=1, description="匹配块尺寸 p（奇数）")
    match_stride: int = Field(default=2, ge=1, description="LR 网格上的查询 / key 步长")
    hr_match_stride: int = Field(default=4, ge=1, description="fullres 变体在 HR 网格上的 key 步长")
    attention_temperature: float = Field(default=0.05, gt=0, description="softmax 温度 τ")
    variant: MatchVariant = Field(default=MatchVariant.DOWNSAMPLE, description="匹配变体")

    @field_validator("patch_size")
    @classmethod
    def _odd_patch(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"patch_size must be odd, got {value}")
        return value

    @model_validator(mode="after")
    def _check_grids(self) -> "ModelConfig":
        if self.patch_size < self.match_stride:
            raise ValueError(
                f"patch_size {self.patch_size} < match_stride {self.match_stride} leaves output pixels uncovered"
            )
        if self.variant == MatchVariant.FULLRES:
            if self.hr_match_stride % self.scale != 0:
                raise ValueError(
                    f"hr_match_stride {self.hr_match_stride} must be a multiple of scale {self.scale} "
                    "so key and value grids line up"
                )
            if self.patch_size // 2 < (self.scale - 1) // 2:
                raise ValueError(
                    f"patch_size {self.patch_size} is too small to centre fullres keys on "
                    f"{self.scale * self.patch_size}px value patches"
                )
        return self

    @classmethod
    def from_settings(cls, variant: MatchVariant, feature_channels: Optional[int] = None) -> "ModelConfig":
        """按全局配置构建，只有变体与通道数可以单独指定"""
        return cls(
            scale=settings.scale,
            feature_channels=feature_channels if feature_channels is not None else settings.feature_channels,
            patch_size=settings.patch_size,
            match_stride=settings.match_stride,
            hr_match_stride=settings.hr_match_stride,
            attention_temperature=settings.attention_temperature,
            variant=MatchVariant(variant),
        )

    @property
    def key_stride(self) -> int:
        """key 特征图上的步长"""
        return self.match_stride if self.variant == MatchVariant.DOWNSAMPLE else self.hr_match_stride

    @property
    def key_padding(self) -> int:
        """key 展开时的补零宽度

        value 块（s·p 像素）的中心落在 HR 坐标 k·S + (s−1)/2。downsample 变体的 key
        在 ×1/s 网格上天然对齐；fullres 变体的 key 在 HR 网格上，补零少 ⌊(s−1)/2⌋，
        使 key 中心移到 k·S + ⌊(s−1)/2⌋，与 value 中心相差不超过半个像素。
        """
        if self.variant == MatchVariant.DOWNSAMPLE:
            return self.patch_size // 2
        return self.patch_size // 2 - (self.scale - 1) // 2

    @property
    def key_hr_stride(self) -> int:
        """key 位置映射到 HR 网格后的间距"""
        return self.scale * self.match_stride if self.variant == MatchVariant.DOWNSAMPLE else self.hr_match_stride

    @property
    def value_patch(self) -> int:
        return self.scale * self.patch_size

    @property
    def value_padding(self) -> int:
        return self.scale * (self.patch_size // 2)


_ENCODERS = ("lr_encoder", "ref_key_encoder", "ref_value_encoder")


@dataclass(frozen=True)
class ModelParams:
    """全部可学习张量 θ（名称 → 只读数组，按 shape_table 顺序）"""

    arrays: Dict[str, np.ndarray]

    @staticmethod
    def shape_table(config: ModelConfig) -> List[Tuple[str, Shape]]:
        """规范的 (名称, 形状) 顺序，检查点按此顺序写出"""
        c = config.feature_channels
        table: List[Tuple[str, Shape]] = []
        for encoder in _ENCODERS:
            table += [
                (f"{encoder}.conv1.weight", (3, 3, 3, c)),
                (f"{encoder}.conv1.bias", (c,)),
                (f"{encoder}.conv2.weight", (3, 3, c, c)),
                (f"{encoder}.conv2.bias", (c,)),
            ]
        table += [
            ("fusion.conv1.weight", (3, 3, 2 * c, c)),
            ("fusion.conv1.bias", (c,)),
            ("fusion.conv2.weight", (3, 3, c, 3)),
            ("fusion.conv2.bias", (3,)),
        ]
        return table

    @classmethod
    def from_arrays(cls, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        frozen = {}
        for name, value in arrays.items():
            arr = np.array(value, dtype=np.float64)
            arr.setflags(write=False)
            frozen[name] = arr
        return cls(arrays=frozen)

    @classmethod
    def zeros(cls, config: ModelConfig) -> "ModelParams":
        """全零网络：输出只剩全局双三次残差"""
        return cls.from_arrays({name: np.zeros(shape) for name, shape in cls.shape_table(config)})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __len__(self) -> int:
        return len(self.arrays)

    def items(self):
        return self.arrays.items()

    @property
    def num_parameters(self) -> int:
        return int(sum(arr.size for arr in self.arrays.values()))

    def check(self, config: ModelConfig) -> None:
        """校验名称与形状和配置一致"""
        expected = self.shape_table(config)
        actual = [(name, tuple(arr.shape)) for name, arr in self.arrays.items()]
        if sorted(actual) != sorted(expected):
            missing = sorted(set(expected) - set(actual))
            extra = sorted(set(actual) - set(expected))
            raise ShapeMismatchError(
                "model_params", f"parameter table does not match config (missing {missing}, unexpected {extra})"
            )
        for name, arr in self.arrays.items():
            if not np.all(np.isfinite(arr)):
                raise ShapeMismatchError("model_params", f"parameter {name} has non-finite values")

    def as_constants(self) -> Dict[str, Tensor]:
        return {name: Tensor(arr) for name, arr in self.arrays.items()}

    def attach(self, record: ComputationRecord) -> Dict[str, Tensor]:
        """把参数登记为记录上的叶子节点"""
        return {name: record.leaf(arr) for name, arr in self.arrays.items()}


@dataclass(frozen=True)
class Correspondence:
    """纹理匹配结果

    attention 的每一行是一个查询块对全部 key 块的软注意力分布；
    query_grid / key_grid 给出每个块中心在各自特征图上的 (row, col) 坐标。
    """

    attention: Tensor
    query_grid: np.ndarray
    key_grid: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.attention.data

    @property
    def num_queries(self) -> int:
        return int(self.attention.shape[0])

    @property
    def num_keys(self) -> int:
        return int(self.attention.shape[1])
