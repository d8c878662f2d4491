"""报告输出：rows.csv、summary.json 与 SVG 折线图"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TYPE_CHECKING, Union

import numpy as np
import pandas as pd

from src.utils.logger import logger

from .schemas import METRIC_COLUMNS, ROW_COLUMNS, Condition, ReportRow

if TYPE_CHECKING:
    from .schemas import ExperimentConfig

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.6f"
GROUP_COLUMNS = ["variant", "loss_profile", "condition", "epsilon", "iterations"]


@dataclass
class ReportPaths:
    rows: Path
    summary: Path
    charts: List[Path] = field(default_factory=list)


def rows_frame(rows: Sequence[ReportRow]) -> pd.DataFrame:
    """行列表 → DataFrame（列顺序固定，按键排序，指标保留 6 位小数）"""
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=ROW_COLUMNS)
    frame = frame.sort_values(
        ["variant", "loss_profile", "condition", "epsilon", "iterations", "sample_id"], kind="mergesort"
    ).reset_index(drop=True)
    frame[METRIC_COLUMNS] = frame[METRIC_COLUMNS].astype(float).round(6)
    return frame


def write_rows_csv(rows: Sequence[ReportRow], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows_frame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _stats(frame: pd.DataFrame) -> Dict[str, Any]:
    stats: Dict[str, Any] = {"count": int(len(frame))}
    for column in METRIC_COLUMNS:
        values = frame[column].to_numpy(dtype=float)
        stats[f"{column}_mean"] = float(np.mean(values))
        stats[f"{column}_std"] = float(np.std(values))
    return stats


def summarize(rows: Sequence[ReportRow], config: Optional["ExperimentConfig"] = None) -> Dict[str, Any]:
    """按 (变体, 档位, 条件, ε, T) 分组的均值 / 标准差，外加等级拆分与噪声对照比

    统计量基于 rows.csv 中的 6 位小数值计算，可由 rows.csv 复算；标准差为总体标准差。
    """
    frame = rows_frame(rows)
    groups = []
    for key, group in frame.groupby(GROUP_COLUMNS, sort=True):
        entry = dict(zip(GROUP_COLUMNS, key))
        entry["epsilon"] = float(entry["epsilon"])
        entry["iterations"] = int(entry["iterations"])
        entry.update(_stats(group))
        groups.append(entry)

    summary: Dict[str, Any] = {
        "groups": groups,
        "notes": {
            "noise_control": "uniform(-eps, eps) noise clipped to [0, 1], matched in budget to the attack",
            "ssim": "11x11 Gaussian window (sigma 1.5), valid region only, mean over RGB channels",
            "std": "population standard deviation over samples",
        },
    }
    if config is None:
        return summary

    summary["default_point"] = {"epsilon": config.default_epsilon, "iterations": config.default_iterations}
    summary["y_channel"] = config.y_channel

    attack = frame[frame["condition"] == Condition.ATTACK.value]
    at_default = attack[
        np.isclose(attack["epsilon"], config.default_epsilon) & (attack["iterations"] == config.default_iterations)
    ]
    by_level = []
    for (variant, profile, level), group in at_default.groupby(["variant", "loss_profile", "similarity_level"]):
        entry = {"variant": variant, "loss_profile": profile, "similarity_level": int(level)}
        entry.update(_stats(group))
        by_level.append(entry)
    summary["by_level"] = by_level

    noise = frame[frame["condition"] == Condition.NOISE.value]
    ratios = []
    for (variant, profile, epsilon), group in noise.groupby(["variant", "loss_profile", "epsilon"]):
        matched = attack[
            (attack["variant"] == variant)
            & (attack["loss_profile"] == profile)
            & np.isclose(attack["epsilon"], epsilon)
            & (attack["iterations"] == config.default_iterations)
        ]
        if matched.empty:
            continue
        attack_drop = float(matched["psnr_drop"].mean())
        noise_drop = float(group["psnr_drop"].mean())
        ratios.append({
            "variant": variant,
            "loss_profile": profile,
            "epsilon": float(epsilon),
            "attack_psnr_drop_mean": attack_drop,
            "noise_psnr_drop_mean": noise_drop,
            "ratio": attack_drop / noise_drop if noise_drop > 0 else None,
        })
    summary["noise_vs_attack"] = ratios
    return summary


def write_summary_json(summary: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


# =============================================================================
# SVG 折线图（matplotlib）
# =============================================================================

def render_line_chart(
    series: Dict[str, List[tuple]],
    path: PathLike,
    title: str,
    xlabel: str,
    ylabel: str,
) -> Optional[Path]:
    """把若干条 (x, y) 折线画成 SVG；matplotlib 不可用时跳过"""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        logger.warning(f"Skipping chart {path}: matplotlib is unavailable ({e})")
        return None

    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, points in sorted(series.items()):
        if not points:
            continue
        xs, ys = zip(*sorted(points))
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "refsr-adv"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _series(frame: pd.DataFrame, x: str, metric: str = "psnr_drop") -> Dict[str, List[tuple]]:
    out: Dict[str, List[tuple]] = {}
    for (variant, profile, condition), group in frame.groupby(["variant", "loss_profile", "condition"]):
        means = group.groupby(x)[metric].mean()
        out[f"{variant}/{profile} {condition}"] = [(float(k), float(v)) for k, v in means.items()]
    return out


def write_charts(rows: Sequence[ReportRow], config: "ExperimentConfig", out_dir: Path) -> List[Path]:
    """psnr_drop 对 ε、T、相似度等级的三张折线图"""
    frame = rows_frame(rows)
    attack = frame[frame["condition"] == Condition.ATTACK.value]
    at_default_t = frame[
        (frame["condition"] == Condition.NOISE.value) | (frame["iterations"] == config.default_iterations)
    ].copy()
    at_default_t["epsilon_255"] = at_default_t["epsilon"] * 255.0
    at_default_eps = attack[np.isclose(attack["epsilon"], config.default_epsilon)]
    at_default_point = at_default_eps[at_default_eps["iterations"] == config.default_iterations]

    charts = [
        render_line_chart(
            _series(at_default_t, "epsilon_255"), out_dir / "chart_epsilon.svg",
            f"PSNR drop vs budget (T={config.default_iterations})", "epsilon (x 1/255)", "PSNR drop (dB)",
        ),
        render_line_chart(
            _series(at_default_eps, "iterations"), out_dir / "chart_iterations.svg",
            f"PSNR drop vs iterations (eps={config.default_epsilon * 255:g}/255)", "iterations T", "PSNR drop (dB)",
        ),
        render_line_chart(
            _series(at_default_point, "similarity_level"), out_dir / "chart_levels.svg",
            "PSNR drop vs similarity level", "similarity level (1 = most similar)", "PSNR drop (dB)",
        ),
    ]
    return [path for path in charts if path is not None]


def write_reports(rows: Sequence[ReportRow], config: "ExperimentConfig", out_dir: PathLike) -> ReportPaths:
    out_dir = Path(out_dir)
    paths = ReportPaths(
        rows=write_rows_csv(rows, out_dir / "rows.csv"),
        summary=write_summary_json(summarize(rows, config), out_dir / "summary.json"),
    )
    if config.charts and rows:
        paths.charts = write_charts(rows, config, out_dir)
    return paths
