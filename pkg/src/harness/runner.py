"""实验编排：数据生成、训练、攻击评测与噪声对照

评测按 (受害模型, 样本) 切分为相互独立的工作项，--jobs > 1 时交给进程池；
每个工作项的随机流只由 (master_seed, sample_id) 派生，
结果按键排序后写出，因此输出字节与并行度无关。
"""

from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.attack.refsr_adv import (
    AttackConfig,
    attack_stream,
    clean_baseline,
    random_noise_reference,
    run_attack_schedule,
    save_attack_artifacts,
)
from src.data.manifest import (
    MANIFEST_NAME,
    DatasetManifest,
    build_synthetic_manifest,
    load_dataset,
    load_folder_manifest,
    save_manifest,
    write_dataset,
)
from src.data.synth import SampleTriplet
from src.metrics.quality import QualityReport, evaluate_attack
from src.model.refsr_net import super_resolve
from src.model.schemas import MatchVariant, ModelConfig, ModelParams
from src.training.checkpoint import load_checkpoint, save_checkpoint
from src.training.trainer import TrainConfig, TrainingRun, train
from src.utils.errors import RefSRError, UsageError
from src.utils.logger import logger

from .reporting import ReportPaths, write_reports, write_rows_csv
from .schemas import Condition, ExperimentConfig, ReportRow, VictimSpec

PathLike = Union[str, Path]


# =============================================================================
# gen-data / train
# =============================================================================

def cmd_gen_data(
    master_seed: int,
    count_per_level: int,
    gt_size: int,
    out_dir: PathLike,
    levels: Sequence[int] = (1, 2, 3, 4, 5),
    scale: int = 4,
) -> DatasetManifest:
    """生成合成数据集：每个样本序号 × 每个等级一个三元组，写 PPM 与 manifest.json"""
    manifest = build_synthetic_manifest(master_seed, count_per_level, gt_size, scale, levels)
    return write_dataset(manifest, out_dir)


def cmd_index_folder(folder: PathLike, crop_size: int = 600, scale: int = 4) -> DatasetManifest:
    """为用户图像目录写出 manifest.json（路径相对该目录）"""
    manifest = load_folder_manifest(folder, crop_size, scale)
    save_manifest(manifest, Path(folder) / MANIFEST_NAME)
    return manifest


def cmd_train(
    manifest: PathLike,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_checkpoint: PathLike,
    levels: Optional[Sequence[int]] = None,
) -> TrainingRun:
    """训练一个受害模型并保存检查点与 <checkpoint>.loss.csv"""
    dataset = load_dataset(manifest, levels)
    run = train(train_config, model_config, dataset)
    out_checkpoint = Path(out_checkpoint)
    save_checkpoint(run.params, out_checkpoint)
    loss_path = run.write_loss_csv(out_checkpoint.with_name(out_checkpoint.name + ".loss.csv"))
    first, last = run.history[0][1], run.history[-1][1]
    logger.info(
        f"Final loss {last.total:.6f} (rec {last.rec:.6f}, per {last.per:.6f}); "
        f"initial {first.total:.6f}; loss log {loss_path}"
    )
    return run


# =============================================================================
# 工作项
# =============================================================================

@dataclass(frozen=True)
class SampleJob:
    """一个 (受害模型, 样本) 工作项，可跨进程传递"""

    victim: VictimSpec
    model_config: ModelConfig
    params: ModelParams
    triplet: SampleTriplet
    checkpoints_by_epsilon: Dict[float, List[int]]
    noise_epsilons: List[float]
    master_seed: int
    conditions: tuple
    y_channel: bool = False
    artifact_dir: Optional[str] = None


def _row(job: SampleJob, condition: Condition, epsilon: float, iterations: int, report: QualityReport) -> ReportRow:
    return ReportRow(
        variant=job.victim.variant,
        loss_profile=job.victim.profile,
        condition=condition,
        epsilon=epsilon,
        iterations=iterations,
        similarity_level=job.triplet.similarity_level,
        sample_id=job.triplet.sample_id,
        seed=job.master_seed,
        **report.model_dump(),
    )


def evaluate_sample(job: SampleJob) -> List[ReportRow]:
    """对一个样本跑完全部网格点与条件"""
    t = job.triplet
    param_tensors = job.params.as_constants()
    baseline = clean_baseline(job.params, job.model_config, t.lr, t.ref)
    rows: List[ReportRow] = []

    if Condition.ATTACK in job.conditions:
        for epsilon, checkpoints in sorted(job.checkpoints_by_epsilon.items()):
            attack_config = AttackConfig(epsilon=epsilon, iterations=max(checkpoints), seed=job.master_seed)
            results = run_attack_schedule(
                job.params, job.model_config, t.lr, t.ref, attack_config,
                checkpoints=checkpoints, sample_id=t.sample_id, baseline=baseline,
            )
            for iterations, result in sorted(results.items()):
                report = evaluate_attack(t.gt, baseline, result.adv_output, t.ref, result.adv_ref, job.y_channel)
                rows.append(_row(job, Condition.ATTACK, epsilon, iterations, report))
                if job.artifact_dir is not None:
                    stem = f"{job.victim.variant.value}_{job.victim.profile.value}_{t.sample_id}_e{epsilon * 255:g}_t{iterations}"
                    save_attack_artifacts(result, job.artifact_dir, stem)

    if Condition.NOISE in job.conditions:
        for epsilon in job.noise_epsilons:
            noisy_ref = random_noise_reference(t.ref, epsilon, attack_stream(job.master_seed, t.sample_id, "noise"))
            noisy_sr = super_resolve(job.params, job.model_config, t.lr, noisy_ref, param_tensors)
            report = evaluate_attack(t.gt, baseline, noisy_sr, t.ref, noisy_ref, job.y_channel)
            rows.append(_row(job, Condition.NOISE, epsilon, 0, report))

    attack_rows = [r for r in rows if r.condition == Condition.ATTACK]
    if attack_rows:
        worst = max(attack_rows, key=lambda r: r.psnr_drop)
        logger.info(
            f"{job.victim.variant.value}/{job.victim.profile.value} {t.sample_id}: "
            f"{len(rows)} rows, max psnr_drop {worst.psnr_drop:.3f} dB at eps={worst.epsilon * 255:g}/255 T={worst.iterations}"
        )
    else:
        logger.info(f"{job.victim.variant.value}/{job.victim.profile.value} {t.sample_id}: {len(rows)} rows")
    return rows


def build_jobs(config: ExperimentConfig, conditions: Sequence[Condition]) -> List[SampleJob]:
    """加载受害模型与数据集，展开为工作项"""
    manifest = Path(config.manifest)
    if not manifest.is_file():
        raise UsageError(f"manifest not found: {manifest}")
    for victim in config.victims:
        if not Path(victim.checkpoint).is_file():
            raise UsageError(f"checkpoint not found: {victim.checkpoint}")

    dataset = load_dataset(manifest, config.levels)
    if not dataset:
        raise UsageError(f"no samples in {manifest} for levels {config.levels}")

    artifact_dir = str(Path(config.output_dir) / "artifacts") if config.dump_images else None
    jobs = []
    for victim in config.victims:
        model_config = config.model_for(victim)
        params = load_checkpoint(victim.checkpoint, model_config)
        for triplet in dataset:
            jobs.append(
                SampleJob(
                    victim=victim,
                    model_config=model_config,
                    params=params,
                    triplet=triplet,
                    checkpoints_by_epsilon=config.checkpoints_by_epsilon(),
                    noise_epsilons=config.noise_epsilons(),
                    master_seed=config.master_seed,
                    conditions=tuple(conditions),
                    y_channel=config.y_channel,
                    artifact_dir=artifact_dir,
                )
            )
    return jobs


def run_jobs(jobs: Sequence[SampleJob], workers: int, partial_path: Optional[Path] = None) -> List[ReportRow]:
    """执行工作项；中途失败时先把已完成的行写到 partial_path 再抛出"""
    rows: List[ReportRow] = []
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(evaluate_sample, job) for job in jobs]
                for future in as_completed(futures):
                    rows.extend(future.result())
        else:
            for job in jobs:
                rows.extend(evaluate_sample(job))
    except (RefSRError, OSError, ValueError):
        if rows and partial_path is not None:
            write_rows_csv(rows, partial_path)
            logger.warning(f"Aborting after {len(rows)} rows; partial results flushed to {partial_path}")
        raise
    return sorted(rows, key=lambda r: r.key)


def _run_experiment(config: ExperimentConfig, conditions: Sequence[Condition]) -> ReportPaths:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = build_jobs(config, conditions)
    logger.info(
        f"Running {len(jobs)} work items ({len(config.victims)} victims) "
        f"with {config.jobs} worker(s), conditions: {', '.join(c.value for c in conditions)}"
    )
    rows = run_jobs(jobs, config.jobs, out_dir / "rows.partial.csv")
    paths = write_reports(rows, config, out_dir)
    logger.info(f"Wrote {len(rows)} rows to {paths.rows}")
    return paths


def cmd_attack_eval(config: ExperimentConfig) -> ReportPaths:
    """攻击评测：每个样本、每个网格点跑攻击，并附带同预算噪声对照"""
    return _run_experiment(config, (Condition.ATTACK, Condition.NOISE))


def cmd_noise_baseline(config: ExperimentConfig) -> ReportPaths:
    """噪声对照：只评估干净参考图 vs 随机噪声参考图"""
    return _run_experiment(config, (Condition.NOISE,))


def default_victims(checkpoints: Sequence[str], variants: Sequence[str], profiles: Sequence[str]) -> List[VictimSpec]:
    """把成对的 --checkpoint / --variant / --profile 组装成受害模型列表"""
    if not checkpoints:
        raise UsageError("at least one --checkpoint is required")
    if len(variants) not in (1, len(checkpoints)) or len(profiles) not in (1, len(checkpoints)):
        raise UsageError("--variant and --profile must be given once or once per --checkpoint")
    victims = []
    for i, checkpoint in enumerate(checkpoints):
        variant = variants[i] if len(variants) > 1 else variants[0]
        profile = profiles[i] if len(profiles) > 1 else profiles[0]
        victims.append(VictimSpec(checkpoint=checkpoint, variant=MatchVariant(variant), profile=profile))
    return victims
