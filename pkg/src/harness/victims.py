"""受害模型配方

四个 (变体, 损失档位) 组合的检查点都按同一份配方训练：固定的合成训练集、
与之不重叠的留出测试集、以及全局默认的训练超参。训练是确定性的，
所以同一配方在任何机器上都会得到逐字节相同的检查点。
"""

import hashlib
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, model_validator

from config import settings
from src.data.manifest import DatasetManifest, build_synthetic_manifest, save_manifest
from src.model.schemas import MatchVariant, ModelConfig
from src.training.trainer import LossProfile, TrainConfig
from src.utils.logger import logger

from .runner import cmd_train

PathLike = Union[str, Path]
VictimKey = Tuple[MatchVariant, LossProfile]

TRAIN_MANIFEST = "train_manifest.json"
TEST_MANIFEST = "test_manifest.json"
ALL_VICTIMS: List[VictimKey] = [(variant, profile) for variant in MatchVariant for profile in LossProfile]


class VictimRecipe(BaseModel):
    """受害模型配方"""

    train_seed: int = Field(default_factory=lambda: settings.master_seed, description="训练集主种子")
    test_seed: int = Field(default_factory=lambda: settings.heldout_seed, description="留出测试集主种子")
    train_count: int = Field(default_factory=lambda: settings.victim_train_count, ge=1)
    test_count: int = Field(default_factory=lambda: settings.victim_test_count, ge=1)
    gt_size: int = Field(default_factory=lambda: settings.gt_size, ge=16)
    feature_channels: int = Field(default_factory=lambda: settings.feature_channels, ge=1)
    steps: int = Field(default_factory=lambda: settings.train_steps, ge=1)
    init_seed: int = Field(default_factory=lambda: settings.model_seed, description="参数初始化与批次洗牌的种子")

    @model_validator(mode="after")
    def _disjoint_sets(self) -> "VictimRecipe":
        if self.train_seed == self.test_seed:
            raise ValueError(f"train and test sets share master seed {self.train_seed}")
        return self

    @property
    def fingerprint(self) -> str:
        """配方摘要，用于区分不同配方训练出的缓存"""
        return hashlib.sha1(self.model_dump_json().encode("utf-8")).hexdigest()[:12]

    def train_manifest(self) -> DatasetManifest:
        return build_synthetic_manifest(self.train_seed, self.train_count, self.gt_size, settings.scale)

    def test_manifest(self) -> DatasetManifest:
        return build_synthetic_manifest(self.test_seed, self.test_count, self.gt_size, settings.scale)

    def model_for(self, variant: MatchVariant) -> ModelConfig:
        return ModelConfig.from_settings(variant, feature_channels=self.feature_channels)

    def train_for(self, profile: LossProfile, jobs: int = 1) -> TrainConfig:
        return TrainConfig.for_profile(profile, steps=self.steps, seed=self.init_seed, jobs=jobs)


def checkpoint_path(out_dir: PathLike, variant: MatchVariant, profile: LossProfile) -> Path:
    return Path(out_dir) / f"{MatchVariant(variant).value}_{LossProfile(profile).value}.bin"


def victims_present(out_dir: PathLike) -> bool:
    """目录里是否已有全部四个检查点与测试清单"""
    out_dir = Path(out_dir)
    if not (out_dir / TEST_MANIFEST).is_file():
        return False
    return all(checkpoint_path(out_dir, v, p).is_file() for v, p in ALL_VICTIMS)


def cmd_train_victims(
    recipe: VictimRecipe,
    out_dir: PathLike,
    victims: Optional[List[VictimKey]] = None,
    force: bool = False,
    jobs: int = 1,
) -> Dict[VictimKey, Path]:
    """按配方训练受害模型，写出检查点、损失日志与训练 / 测试清单

    已存在的检查点默认跳过（force=True 时重训）。
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_manifest = save_manifest(recipe.train_manifest(), out_dir / TRAIN_MANIFEST)
    save_manifest(recipe.test_manifest(), out_dir / TEST_MANIFEST)

    paths: Dict[VictimKey, Path] = {}
    for variant, profile in victims or ALL_VICTIMS:
        path = checkpoint_path(out_dir, variant, profile)
        paths[(variant, profile)] = path
        if path.is_file() and not force:
            logger.info(f"Keeping existing victim {path}")
            continue
        cmd_train(train_manifest, recipe.model_for(variant), recipe.train_for(profile, jobs), path)
    logger.info(f"Victims ready under {out_dir} (recipe {recipe.fingerprint})")
    return paths
