"""受害模型上的攻击趋势测试

使用 REFSR_VICTIM_DIR（默认 ./checkpoints）里按固定配方训练的四个受害模型；
检查点缺失时按同一配方现场训练并缓存到 pytest 缓存目录。
"""

import pytest
import sys
import os
from pathlib import Path

import numpy as np
import pandas as pd

ROOT = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, ROOT)

from config import settings
from src.attack import AttackConfig, run_attack
from src.data import load_dataset, resize_to
from src.harness import (
    ALL_VICTIMS,
    TEST_MANIFEST,
    Condition,
    ExperimentConfig,
    VictimRecipe,
    VictimSpec,
    build_jobs,
    checkpoint_path,
    cmd_train_victims,
    run_jobs,
    victims_present,
)
from src.harness.reporting import rows_frame
from src.metrics import psnr
from src.model import MatchVariant, super_resolve
from src.training import LossProfile, load_checkpoint, save_checkpoint

pytestmark = pytest.mark.slow

EPS8 = 8 / 255
SWEEP_EPSILONS = [2 / 255, 4 / 255, 8 / 255, 16 / 255]
SWEEP_ITERATIONS = [10, 30, 50, 100]
REC = LossProfile.REC


@pytest.fixture(scope="module")
def recipe():
    return VictimRecipe()


@pytest.fixture(scope="module")
def victim_dir(request, recipe, tmp_path_factory):
    shipped = Path(settings.victim_dir)
    if not shipped.is_absolute():
        shipped = Path(ROOT) / shipped
    if victims_present(shipped):
        return shipped
    cache = getattr(request.config, "cache", None)
    name = f"refsr_victims_{recipe.fingerprint}"
    out = cache.mkdir(name) if cache is not None else tmp_path_factory.mktemp(name)
    cmd_train_victims(recipe, out, jobs=settings.jobs)
    return Path(out)


@pytest.fixture(scope="module")
def test_set(victim_dir):
    dataset = load_dataset(victim_dir / TEST_MANIFEST)
    assert len(dataset) >= 32
    return dataset


def _experiment(victim_dir, recipe, variant, tmp_path_factory, epsilons, iterations) -> ExperimentConfig:
    return ExperimentConfig(
        manifest=str(victim_dir / TEST_MANIFEST),
        victims=[VictimSpec(checkpoint=str(checkpoint_path(victim_dir, variant, REC)), variant=variant, profile=REC)],
        epsilons=epsilons,
        iterations=iterations,
        levels=[1, 2, 3, 4, 5],
        default_epsilon=EPS8,
        default_iterations=50,
        output_dir=str(tmp_path_factory.mktemp("trend_rows")),
        jobs=settings.jobs,
        model=recipe.model_for(variant),
        charts=False,
    )


@pytest.fixture(scope="module")
def rows(victim_dir, recipe, tmp_path_factory):
    """fullres 跑完整 ε / T 网格，downsample 只跑默认网格点；两者都带噪声对照"""
    conditions = (Condition.ATTACK, Condition.NOISE)
    fullres = _experiment(victim_dir, recipe, MatchVariant.FULLRES, tmp_path_factory, SWEEP_EPSILONS, SWEEP_ITERATIONS)
    downsample = _experiment(victim_dir, recipe, MatchVariant.DOWNSAMPLE, tmp_path_factory, [EPS8], [50])
    collected = []
    for config in (fullres, downsample):
        collected += run_jobs(build_jobs(config, conditions), config.jobs)
    return rows_frame(collected)


def _mean_drop(frame: pd.DataFrame, variant, condition, epsilon=EPS8, iterations=50, level=None) -> float:
    mask = (
        (frame["variant"] == MatchVariant(variant).value)
        & (frame["condition"] == Condition(condition).value)
        & np.isclose(frame["epsilon"], epsilon)
    )
    if condition == Condition.ATTACK:
        mask &= frame["iterations"] == iterations
    if level is not None:
        mask &= frame["similarity_level"] == level
    selected = frame.loc[mask, "psnr_drop"]
    assert len(selected) > 0
    return float(selected.mean())


class TestAttackTrends:
    """攻击强度随条件变化的趋势测试类"""

    @pytest.mark.parametrize("variant", list(MatchVariant))
    def test_attack_dominates_noise(self, rows, variant):
        """测试同预算下攻击的 PSNR 下降至少 1 dB 且不小于噪声的 5 倍"""
        attack = _mean_drop(rows, variant, Condition.ATTACK)
        noise = _mean_drop(rows, variant, Condition.NOISE)
        assert attack >= 1.0
        assert attack >= 5.0 * noise

    def test_drop_grows_with_budget(self, rows):
        """测试 PSNR 下降随 ε 单调不减（允许一处不超过 0.05 dB 的相邻倒挂）"""
        drops = [_mean_drop(rows, MatchVariant.FULLRES, Condition.ATTACK, epsilon=eps) for eps in SWEEP_EPSILONS]
        inversions = [b - a for a, b in zip(drops, drops[1:]) if b < a]
        assert len(inversions) <= 1
        assert all(gap >= -0.05 for gap in inversions)

    def test_drop_grows_with_iterations(self, rows):
        """测试 T=100 比 T=10 多下降至少 0.2 dB"""
        short = _mean_drop(rows, MatchVariant.FULLRES, Condition.ATTACK, iterations=10)
        long = _mean_drop(rows, MatchVariant.FULLRES, Condition.ATTACK, iterations=100)
        assert long - short >= 0.2

    def test_similar_references_hurt_more(self, rows):
        """测试等级 1 的下降比等级 5 至少多 0.2 dB"""
        similar = _mean_drop(rows, MatchVariant.FULLRES, Condition.ATTACK, level=1)
        distant = _mean_drop(rows, MatchVariant.FULLRES, Condition.ATTACK, level=5)
        assert similar - distant >= 0.2

    def test_fullres_matching_more_vulnerable(self, rows):
        """测试 fullres 变体的下降不小于 downsample 变体"""
        fullres = _mean_drop(rows, MatchVariant.FULLRES, Condition.ATTACK)
        downsample = _mean_drop(rows, MatchVariant.DOWNSAMPLE, Condition.ATTACK)
        assert fullres >= downsample

    def test_stealth_bound(self, rows):
        """测试每条攻击行的隐蔽性不低于 20·log10(1/ε) − 0.01 dB"""
        attack = rows[rows["condition"] == Condition.ATTACK.value]
        bound = 20 * np.log10(1.0 / attack["epsilon"]) - 0.01
        assert (attack["psnr_stealth"] >= bound).all()


class TestDestructionTrace:
    """破坏损失轨迹测试类"""

    def test_windowed_trace_rises(self, victim_dir, recipe, test_set):
        """测试 fullres 受害模型上平均 L_des 的 10 步窗口均值单调不减且末值高于首值"""
        config = recipe.model_for(MatchVariant.FULLRES)
        params = load_checkpoint(checkpoint_path(victim_dir, MatchVariant.FULLRES, REC), config)
        attack = AttackConfig(epsilon=EPS8, iterations=50, seed=settings.master_seed)
        traces = np.array([
            run_attack(params, config, t.lr, t.ref, attack, sample_id=t.sample_id).loss_trace for t in test_set
        ])
        mean = traces.mean(axis=0)
        windows = mean.reshape(-1, 10).mean(axis=1)
        assert np.all(np.diff(windows) >= 0.0)
        assert mean[-1] > mean[0]


class TestVictimQuality:
    """受害模型质量测试类"""

    @pytest.mark.parametrize("variant,profile", ALL_VICTIMS)
    def test_beats_bicubic(self, victim_dir, recipe, test_set, variant, profile):
        """测试留出集上 PSNR 比双三次上采样至少高 0.3 dB"""
        config = recipe.model_for(variant)
        params = load_checkpoint(checkpoint_path(victim_dir, variant, profile), config)
        tensors = params.as_constants()
        model, bicubic = [], []
        for t in test_set:
            model.append(psnr(t.gt, super_resolve(params, config, t.lr, t.ref, tensors)))
            bicubic.append(psnr(t.gt, resize_to(t.lr, *t.gt.shape[:2])))
        assert np.mean(model) - np.mean(bicubic) >= 0.3

    @pytest.mark.parametrize("variant,profile", ALL_VICTIMS)
    def test_training_loss_fell(self, victim_dir, variant, profile):
        """测试训练损失日志中最后 50 步的均值低于最初 50 步"""
        path = checkpoint_path(victim_dir, variant, profile)
        loss = pd.read_csv(path.with_name(path.name + ".loss.csv"))
        assert loss["loss_total"].tail(50).mean() < loss["loss_total"].head(50).mean()

    @pytest.mark.parametrize("variant,profile", ALL_VICTIMS)
    def test_checkpoint_roundtrip(self, victim_dir, recipe, tmp_path, variant, profile):
        """测试检查点读出再写回逐字节一致"""
        path = checkpoint_path(victim_dir, variant, profile)
        params = load_checkpoint(path, recipe.model_for(variant))
        copy = save_checkpoint(params, tmp_path / path.name)
        assert Path(copy).read_bytes() == path.read_bytes()


if __name__ == "__main__":
    pytest.main([__file__, "-v", "-m", "slow"])
