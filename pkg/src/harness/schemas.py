"""实验配置与报告行"""

from enum import Enum
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from config import settings
from src.model.schemas import MatchVariant, ModelConfig
from src.training.trainer import LossProfile


class Condition(str, Enum):
    """实验条件"""
    ATTACK = "attack"
    NOISE = "noise"


class VictimSpec(BaseModel):
    """一个受害模型：检查点 + 变体 + 损失档位"""

    checkpoint: str = Field(..., description="检查点路径")
    variant: MatchVariant = Field(..., description="匹配变体")
    profile: LossProfile = Field(..., description="训练损失档位")


class ExperimentConfig(BaseModel):
    """攻击评测配置"""

    manifest: str = Field(..., description="数据集清单路径")
    victims: List[VictimSpec] = Field(..., min_length=1, description="受害模型列表")
    epsilons: List[float] = Field(default_factory=lambda: settings.epsilon_grid, min_length=1)
    iterations: List[int] = Field(default_factory=lambda: settings.iteration_grid, min_length=1)
    levels: List[int] = Field(default_factory=lambda: settings.level_grid, min_length=1)
    default_epsilon: float = Field(default_factory=lambda: settings.attack_epsilon, gt=0, le=1)
    default_iterations: int = Field(default_factory=lambda: settings.attack_iterations, ge=1)
    master_seed: int = Field(default_factory=lambda: settings.master_seed)
    output_dir: str = Field(default_factory=lambda: settings.output_dir)
    jobs: int = Field(default_factory=lambda: settings.jobs, ge=1, description="并行进程数")
    model: ModelConfig = Field(default_factory=ModelConfig, description="模型结构模板，variant 由受害模型覆盖")
    y_channel: bool = Field(default=False, description="在 Y 通道上计算指标")
    dump_images: bool = Field(default=False, description="写出每个样本的图像与损失轨迹")
    charts: bool = Field(default=True, description="写出 SVG 折线图")

    @field_validator("epsilons")
    @classmethod
    def _check_epsilons(cls, values: List[float]) -> List[float]:
        for eps in values:
            if not 0.0 < eps <= 1.0:
                raise ValueError(f"epsilon must lie in (0, 1], got {eps}")
        return values

    @field_validator("iterations")
    @classmethod
    def _check_iterations(cls, values: List[int]) -> List[int]:
        if any(t < 1 for t in values):
            raise ValueError(f"iteration counts must be >= 1, got {values}")
        return values

    @field_validator("levels")
    @classmethod
    def _check_levels(cls, values: List[int]) -> List[int]:
        if any(level not in range(1, 6) for level in values):
            raise ValueError(f"similarity levels must lie in 1..5, got {values}")
        return values

    @model_validator(mode="after")
    def _unique_victims(self) -> "ExperimentConfig":
        keys = [(v.variant, v.profile) for v in self.victims]
        if len(set(keys)) != len(keys):
            raise ValueError("each (variant, profile) pair may appear only once")
        return self

    def model_for(self, victim: VictimSpec) -> ModelConfig:
        return self.model.model_copy(update={"variant": victim.variant})

    def grid_points(self) -> List[Tuple[float, int]]:
        """攻击网格：默认 T 下的 ε 扫描 ∪ 默认 ε 下的 T 扫描（去重、排序）"""
        points = {(eps, self.default_iterations) for eps in self.epsilons}
        points |= {(self.default_epsilon, t) for t in self.iterations}
        return sorted(points)

    def checkpoints_by_epsilon(self) -> Dict[float, List[int]]:
        """同一 ε 的网格点共用一条 PGD 轨迹"""
        grouped: Dict[float, List[int]] = {}
        for eps, t in self.grid_points():
            grouped.setdefault(eps, []).append(t)
        return grouped

    def noise_epsilons(self) -> List[float]:
        return sorted(set(eps for eps, _ in self.grid_points()))


ROW_COLUMNS = [
    "variant",
    "loss_profile",
    "condition",
    "epsilon",
    "iterations",
    "similarity_level",
    "sample_id",
    "psnr_clean",
    "ssim_clean",
    "psnr_adv",
    "ssim_adv",
    "psnr_drop",
    "ssim_drop",
    "psnr_stealth",
    "ssim_stealth",
    "seed",
]

METRIC_COLUMNS = ROW_COLUMNS[7:15]


class ReportRow(BaseModel):
    """rows.csv 的一行：一个样本在一个网格点、一个条件下的质量报告"""

    variant: MatchVariant
    loss_profile: LossProfile
    condition: Condition
    epsilon: float
    iterations: int = Field(..., ge=0, description="噪声对照行为 0")
    similarity_level: int = Field(..., ge=1, le=5)
    sample_id: str
    psnr_clean: float
    ssim_clean: float
    psnr_adv: float
    ssim_adv: float
    psnr_drop: float
    ssim_drop: float
    psnr_stealth: float
    ssim_stealth: float
    seed: int

    @property
    def key(self) -> Tuple:
        return (
            self.variant.value,
            self.loss_profile.value,
            self.condition.value,
            self.epsilon,
            self.iterations,
            self.sample_id,
        )
