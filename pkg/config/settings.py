"""RefSR-Adv 工作台配置模块"""

from functools import lru_cache
from typing import List

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """全局配置

    所有字段都可以通过 ``REFSR_<FIELD>`` 环境变量或 ``.env`` 文件覆盖。
    """

    model_config = SettingsConfigDict(
        env_prefix="REFSR_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # ==========================================================================
    # Data Configuration
    # ==========================================================================
    master_seed: int = Field(default=2024, description="数据集主种子")
    scale: int = Field(default=4, ge=2, description="超分倍率 s")
    gt_size: int = Field(default=64, ge=16, description="合成 GT 边长（像素）")
    folder_crop_size: int = Field(default=600, ge=16, description="用户图像中心裁剪尺寸")

    # ==========================================================================
    # Model Configuration
    # ==========================================================================
    feature_channels: int = Field(default=16, ge=1)
    patch_size: int = Field(default=3, ge=1)
    match_stride: int = Field(default=2, ge=1)
    hr_match_stride: int = Field(default=4, ge=1)
    attention_temperature: float = Field(default=0.05, gt=0)
    model_seed: int = Field(default=7)

    # ==========================================================================
    # Training Configuration
    # ==========================================================================
    train_steps: int = Field(default=2000, ge=1)
    train_batch_size: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    lambda_per: float = Field(default=0.05, ge=0, description="full-proxy 档位的感知损失权重 λ1")
    proxy_seed: int = Field(default=1234, description="感知代理网络的独立种子")
    train_log_every: int = Field(default=50, ge=1)

    # ==========================================================================
    # Attack Configuration
    # ==========================================================================
    attack_epsilon: float = Field(default=8 / 255, gt=0, le=1)
    attack_iterations: int = Field(default=50, ge=1)
    attack_seed: int = Field(default=0)

    # ==========================================================================
    # Victim Recipe
    # ==========================================================================
    victim_dir: str = Field(default="./checkpoints", description="受害模型检查点与清单目录")
    victim_train_count: int = Field(default=16, ge=1, description="训练集每个等级的样本数")
    victim_test_count: int = Field(default=7, ge=1, description="留出测试集每个等级的样本数")
    heldout_seed: int = Field(default=2025, description="留出测试集主种子（与 master_seed 不同）")

    # ==========================================================================
    # Ablation Grids
    # ==========================================================================
    sweep_epsilons: str = Field(default="2,4,8,16", description="以 1/255 为单位的 ε 列表")
    sweep_iterations: str = Field(default="10,30,50,100")
    sweep_levels: str = Field(default="1,2,3,4,5")

    # ==========================================================================
    # Runtime
    # ==========================================================================
    jobs: int = Field(default=1, ge=1)
    output_dir: str = Field(default="./runs")

    # ==========================================================================
    # Logging
    # ==========================================================================
    log_level: str = Field(default="INFO")

    @property
    def epsilon_grid(self) -> List[float]:
        """解析 ε 网格（以 1/255 为单位）"""
        return [int(v) / 255 for v in _split_csv(self.sweep_epsilons)]

    @property
    def iteration_grid(self) -> List[int]:
        """解析迭代次数网格"""
        return [int(v) for v in _split_csv(self.sweep_iterations)]

    @property
    def level_grid(self) -> List[int]:
        """解析相似度等级网格"""
        return [int(v) for v in _split_csv(self.sweep_levels)]


def _split_csv(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


@lru_cache()
def get_settings() -> Settings:
    """获取配置单例"""
    return Settings()


# 便捷访问
settings = get_settings()
