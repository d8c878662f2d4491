"""RefSR-Adv 命令行入口

用法:
    python -m src.harness.cli gen-data --out data/synth --count 4
    python -m src.harness.cli train --manifest data/synth/manifest.json --variant fullres --profile rec --out ckpt/f_rec.bin
    python -m src.harness.cli train-victims --out checkpoints
    python -m src.harness.cli attack-eval --manifest ... --checkpoint ckpt/f_rec.bin --variant fullres --profile rec --out runs/a
    python -m src.harness.cli noise-baseline ...
    python -m src.harness.cli verify
"""

import argparse
import sys
from fractions import Fraction
from typing import Optional, Sequence

from pydantic import ValidationError

from config import settings
from src.model.schemas import MatchVariant, ModelConfig
from src.training.trainer import LossProfile, TrainConfig
from src.utils.errors import RefSRError, UsageError
from src.utils.logger import logger, set_level

from .runner import (
    cmd_attack_eval,
    cmd_gen_data,
    cmd_index_folder,
    cmd_noise_baseline,
    cmd_train,
    default_victims,
)
from .schemas import ExperimentConfig
from .verify import print_report, run_verification
from .victims import VictimRecipe, cmd_train_victims

VARIANTS = [v.value for v in MatchVariant]
PROFILES = [p.value for p in LossProfile]


class _Parser(argparse.ArgumentParser):
    """参数错误抛 UsageError，由 main 统一映射为退出码 1"""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: {message}")


def parse_epsilon(raw: str) -> float:
    """ε 以 1/255 为单位：'8' → 8/255；也接受 '0.5' 或 '17/2' 这样的分数"""
    try:
        value = float(Fraction(raw.strip()))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid epsilon '{raw}' (expected a number of 1/255 steps)")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"epsilon must be positive, got '{raw}'")
    return value / 255.0


def _model_config(args: argparse.Namespace, variant: str = MatchVariant.DOWNSAMPLE.value) -> ModelConfig:
    return ModelConfig.from_settings(MatchVariant(variant), args.channels)


def _add_common_eval_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="数据集 manifest.json")
    p.add_argument("--checkpoint", action="append", default=[], help="受害模型检查点（可重复）")
    p.add_argument("--variant", action="append", choices=VARIANTS, default=[], help="与 --checkpoint 按序配对")
    p.add_argument("--profile", action="append", choices=PROFILES, default=[], help="与 --checkpoint 按序配对")
    p.add_argument("--epsilon", type=parse_epsilon, nargs="+", default=None, help="ε 网格（单位 1/255）")
    p.add_argument("--levels", type=int, nargs="+", default=None, help="参与评测的相似度等级")
    p.add_argument("--default-epsilon", type=parse_epsilon, default=None, help="T 扫描时固定的 ε（单位 1/255）")
    p.add_argument("--seed", type=int, default=None, help="攻击与噪声的主种子")
    p.add_argument("--out", required=True, help="输出目录")
    p.add_argument("--jobs", type=int, default=None, help="并行进程数")
    p.add_argument("--y-channel", action="store_true", help="在 Y 通道上计算指标")
    p.add_argument("--no-charts", action="store_true", help="不写 SVG 图")
    p.add_argument("--channels", type=int, default=None, help="特征通道数 C（须与检查点一致）")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="refsr-adv", description="RefSR-Adv: adversarial reference attacks on RefSR models")
    parser.add_argument("--log-level", default=None, help="DEBUG / INFO / WARNING / ERROR")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="生成合成 (GT, Ref, LR) 三元组")
    p.add_argument("--out", default=None, help="输出目录（--from-folder 时可省略）")
    p.add_argument("--from-folder", default=None, help="为 <id>_gt / <id>_ref 用户图像目录生成 manifest.json")
    p.add_argument("--crop-size", type=int, default=settings.folder_crop_size)
    p.add_argument("--seed", type=int, default=settings.master_seed)
    p.add_argument("--count", type=int, default=4, help="每个相似度等级的样本数")
    p.add_argument("--gt-size", type=int, default=settings.gt_size)
    p.add_argument("--levels", type=int, nargs="+", default=[1, 2, 3, 4, 5])

    p = sub.add_parser("train", help="训练一个受害模型")
    p.add_argument("--manifest", required=True)
    p.add_argument("--variant", choices=VARIANTS, required=True)
    p.add_argument("--profile", choices=PROFILES, required=True)
    p.add_argument("--out", required=True, help="检查点输出路径")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None, help="Adam 学习率")
    p.add_argument("--lambda-per", type=float, default=None, help="感知损失权重（仅 full-proxy）")
    p.add_argument("--levels", type=int, nargs="+", default=None)
    p.add_argument("--seed", type=int, default=settings.model_seed)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="批内样本并发线程数")

    p = sub.add_parser("train-victims", help="按固定配方训练全部四个受害模型")
    p.add_argument("--out", default=settings.victim_dir, help="检查点与清单输出目录")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--train-count", type=int, default=None, help="训练集每个等级的样本数")
    p.add_argument("--test-count", type=int, default=None, help="留出测试集每个等级的样本数")
    p.add_argument("--gt-size", type=int, default=None)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--force", action="store_true", help="重训已存在的检查点")
    p.add_argument("--jobs", type=int, default=1, help="批内样本并发线程数")

    p = sub.add_parser("attack-eval", help="攻击评测（附带同预算噪声对照）")
    _add_common_eval_args(p)
    p.add_argument("--iters", type=int, nargs="+", default=None, help="T 网格")
    p.add_argument("--default-iters", type=int, default=None, help="ε 扫描时固定的 T")
    p.add_argument("--dump-images", action="store_true", help="写出对抗参考图、输出与损失轨迹")

    p = sub.add_parser("noise-baseline", help="只跑随机噪声对照")
    _add_common_eval_args(p)

    p = sub.add_parser("verify", help="运行不变量自检")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    victims = default_victims(args.checkpoint, args.variant, args.profile)
    values = {
        "manifest": args.manifest,
        "victims": victims,
        "output_dir": args.out,
        "model": _model_config(args),
        "y_channel": args.y_channel,
        "charts": not args.no_charts,
        "dump_images": getattr(args, "dump_images", False),
    }
    optional = {
        "epsilons": args.epsilon,
        "iterations": getattr(args, "iters", None),
        "levels": args.levels,
        "default_epsilon": args.default_epsilon,
        "default_iterations": getattr(args, "default_iters", None),
        "master_seed": args.seed,
        "jobs": args.jobs,
    }
    values.update({k: v for k, v in optional.items() if v is not None})
    return ExperimentConfig(**values)


def run(args: argparse.Namespace) -> int:
    if args.command == "gen-data":
        if args.from_folder:
            manifest = cmd_index_folder(args.from_folder, args.crop_size, settings.scale)
            logger.info(f"Indexed {len(manifest.entries)} image pairs in {args.from_folder}")
            return 0
        if not args.out:
            raise UsageError("gen-data needs --out (or --from-folder)")
        manifest = cmd_gen_data(args.seed, args.count, args.gt_size, args.out, args.levels, settings.scale)
        logger.info(f"Generated {len(manifest.entries)} samples under {args.out}")
        return 0

    if args.command == "train":
        overrides = {
            "steps": args.steps,
            "batch_size": args.batch_size,
            "learning_rate": args.lr,
            "lambda_per": args.lambda_per,
        }
        train_config = TrainConfig.for_profile(
            args.profile, seed=args.seed, jobs=args.jobs, **{k: v for k, v in overrides.items() if v is not None}
        )
        cmd_train(args.manifest, _model_config(args, args.variant), train_config, args.out, args.levels)
        return 0

    if args.command == "train-victims":
        overrides = {
            "steps": args.steps,
            "train_count": args.train_count,
            "test_count": args.test_count,
            "gt_size": args.gt_size,
            "feature_channels": args.channels,
        }
        recipe = VictimRecipe(**{k: v for k, v in overrides.items() if v is not None})
        cmd_train_victims(recipe, args.out, force=args.force, jobs=args.jobs)
        return 0

    if args.command == "attack-eval":
        cmd_attack_eval(_experiment_config(args))
        return 0

    if args.command == "noise-baseline":
        cmd_noise_baseline(_experiment_config(args))
        return 0

    if args.command == "verify":
        results = run_verification(args.seed)
        print_report(results)
        failed = [r.name for r in results if not r.passed]
        if failed:
            logger.error(f"Invariant checks failed: {', '.join(failed)}")
            return 3
        return 0

    raise UsageError(f"unknown command '{args.command}'")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """解析参数并执行子命令，异常映射为退出码"""
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        if args.log_level:
            set_level(args.log_level)
        return run(args)
    except RefSRError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
