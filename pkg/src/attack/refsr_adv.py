"""参考图对抗攻击 RefSR-Adv

只扰动参考图，LR 输入保持逐位不变：
    1. 以模型在干净参考图上的输出 I_clean 作为伪 GT
    2. δ⁽⁰⁾ ~ U(−ε, ε)，投影到 ε 球与像素范围
    3. 迭代 T 次：前向 M(I_LR, I_Ref + δ)，最大化破坏损失 L_des，
       沿梯度符号上升一步并投影
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from config import settings
from src.data.image_io import save_image
from src.model.refsr_net import forward_graph, super_resolve
from src.model.schemas import ModelConfig, ModelParams
from src.tensor import ComputationRecord, Tensor, grad_of
from src.tensor.ops import reduce_mean, square, sub
from src.utils.errors import AttackDivergenceError
from src.utils.logger import logger
from src.utils.rng import stream

SeedLike = Union[int, np.random.Generator]
StepCallback = Callable[[int, np.ndarray, float], None]


class AttackConfig(BaseModel):
    """攻击配置"""

    epsilon: float = Field(default_factory=lambda: settings.attack_epsilon, gt=0, le=1, description="L∞ 扰动预算 ε")
    step_size: Optional[float] = Field(default=None, gt=0, description="步长 α，缺省为 ε/4")
    iterations: int = Field(default_factory=lambda: settings.attack_iterations, ge=1, description="迭代次数 T")
    seed: int = Field(default_factory=lambda: settings.attack_seed, description="随机初始化种子")

    @model_validator(mode="after")
    def _check_step(self) -> "AttackConfig":
        if self.step_size is not None and self.step_size > self.epsilon:
            raise ValueError(f"step size {self.step_size} exceeds epsilon {self.epsilon}")
        return self

    @property
    def alpha(self) -> float:
        return self.step_size if self.step_size is not None else self.epsilon / 4.0


@dataclass(frozen=True)
class AttackResult:
    """攻击结果"""

    adv_ref: np.ndarray
    delta: np.ndarray
    baseline: np.ndarray
    adv_output: np.ndarray
    loss_trace: Tuple[float, ...]
    epsilon: float
    iterations: int
    sample_id: str = ""

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else 0.0


def attack_stream(seed: int, sample_id: str, purpose: str = "init") -> np.random.Generator:
    """每个样本独立的随机流，由 (seed, sample_id) 派生"""
    return stream(purpose, seed, sample_id)


def _generator(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else stream("attack", int(seed))


def project_delta(delta: np.ndarray, ref: np.ndarray, epsilon: float) -> np.ndarray:
    """投影到 ε 球，再令 ref + δ 落在 [0, 1]

    只有越界的元素会被 Clip(ref + δ, 0, 1) − ref 改写；
    浮点舍入导致的一个 ulp 越界由 nextafter 向零收缩修正。
    """
    delta = np.clip(delta, -epsilon, epsilon)
    adv = ref + delta
    outside = (adv < 0.0) | (adv > 1.0)
    if np.any(outside):
        delta = np.where(outside, np.clip(adv, 0.0, 1.0) - ref, delta)
        delta = np.clip(delta, -epsilon, epsilon)
        for _ in range(8):
            adv = ref + delta
            outside = (adv < 0.0) | (adv > 1.0)
            if not np.any(outside):
                break
            delta = np.where(outside, np.nextafter(delta, 0.0), delta)
    return delta


def clean_baseline(params: ModelParams, config: ModelConfig, lr: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """伪 GT：模型在干净参考图上的输出（不记录计算图）"""
    return super_resolve(params, config, lr, ref)


def init_delta(ref: np.ndarray, epsilon: float, seed: SeedLike) -> np.ndarray:
    """δ⁽⁰⁾ ~ U(−ε, ε)，再投影使 ref + δ ∈ [0, 1]"""
    rng = _generator(seed)
    delta = rng.uniform(-epsilon, epsilon, size=np.shape(ref))
    return project_delta(delta, np.asarray(ref, dtype=np.float64), epsilon)


def destruction_loss(adv_out: Tensor, baseline: Tensor) -> Tensor:
    """破坏损失：对抗输出与伪 GT 的均方差"""
    return reduce_mean(square(sub(adv_out, baseline)))


def pgd_step(delta: np.ndarray, grad: np.ndarray, ref: np.ndarray, epsilon: float, alpha: float) -> np.ndarray:
    """δ ← Π(δ + α·sign(∇))，sign(0) = 0"""
    return project_delta(delta + alpha * np.sign(grad), ref, epsilon)


def run_attack_schedule(
    params: ModelParams,
    model_config: ModelConfig,
    lr: np.ndarray,
    ref: np.ndarray,
    attack_config: AttackConfig,
    checkpoints: Iterable[int],
    sample_id: str = "",
    baseline: Optional[np.ndarray] = None,
    on_step: Optional[StepCallback] = None,
) -> Dict[int, AttackResult]:
    """执行一条 PGD 轨迹，在每个检查点迭代数处截取结果

    轨迹是确定性的，因此截取的 T 次结果与单独跑 T 次完全相同。

    Args:
        params: 受害模型参数
        model_config: 模型配置
        lr: 低分辨率输入
        ref: 干净参考图
        attack_config: 攻击配置（iterations 字段被 checkpoints 取代）
        checkpoints: 需要结果的迭代数
        sample_id: 样本 ID，参与随机流派生
        baseline: 预先算好的伪 GT
        on_step: 每次投影后的回调 (iteration, delta, loss)

    Returns:
        迭代数 → AttackResult

    Raises:
        AttackDivergenceError: 破坏损失出现 NaN / Inf
    """
    wanted = sorted(set(int(t) for t in checkpoints))
    if not wanted or wanted[0] < 1:
        raise ValueError(f"attack checkpoints must be positive iteration counts, got {wanted}")
    ref = np.asarray(ref, dtype=np.float64)
    epsilon, alpha = attack_config.epsilon, attack_config.alpha

    param_tensors = params.as_constants()
    if baseline is None:
        baseline = super_resolve(params, model_config, lr, ref, param_tensors)
    baseline_t = Tensor.constant(baseline)
    lr_t = Tensor.constant(lr)
    ref_t = Tensor.constant(ref)

    delta = init_delta(ref, epsilon, attack_stream(attack_config.seed, sample_id))
    trace: List[float] = []
    results: Dict[int, AttackResult] = {}
    for iteration in range(1, wanted[-1] + 1):
        record = ComputationRecord()
        delta_t = record.leaf(delta)
        out = forward_graph(param_tensors, model_config, lr_t, ref_t + delta_t)
        loss = destruction_loss(out.sr, baseline_t)
        value = loss.item()
        if not np.isfinite(value):
            raise AttackDivergenceError(
                iteration, value, f"sample={sample_id or '-'} max|delta|={float(np.max(np.abs(delta))):.6g}"
            )
        grad = grad_of(loss, delta_t)
        record.clear()

        delta = pgd_step(delta, grad, ref, epsilon, alpha)
        trace.append(value)
        logger.debug(f"attack {sample_id or '-'} iter {iteration}: l_des={value:.8f}")
        if on_step is not None:
            on_step(iteration, delta, value)

        if iteration in wanted:
            adv_ref = ref + delta
            results[iteration] = AttackResult(
                adv_ref=adv_ref,
                delta=delta.copy(),
                baseline=baseline,
                adv_output=super_resolve(params, model_config, lr, adv_ref, param_tensors),
                loss_trace=tuple(trace),
                epsilon=epsilon,
                iterations=iteration,
                sample_id=sample_id,
            )
    return results


def run_attack(
    params: ModelParams,
    model_config: ModelConfig,
    lr: np.ndarray,
    ref: np.ndarray,
    attack_config: AttackConfig,
    sample_id: str = "",
    baseline: Optional[np.ndarray] = None,
    on_step: Optional[StepCallback] = None,
) -> AttackResult:
    """完整执行一次 RefSR-Adv 攻击（T = attack_config.iterations）"""
    results = run_attack_schedule(
        params, model_config, lr, ref, attack_config,
        checkpoints=[attack_config.iterations],
        sample_id=sample_id,
        baseline=baseline,
        on_step=on_step,
    )
    return results[attack_config.iterations]


def random_noise_reference(ref: np.ndarray, epsilon: float, seed: SeedLike) -> np.ndarray:
    """随机噪声对照：ref + U(−ε, ε)，截断到 [0, 1]"""
    ref = np.asarray(ref, dtype=np.float64)
    noise = _generator(seed).uniform(-epsilon, epsilon, size=ref.shape)
    return ref + project_delta(noise, ref, epsilon)


def save_attack_artifacts(result: AttackResult, out_dir: Union[str, Path], stem: str) -> List[Path]:
    """写出对抗参考图、伪 GT、对抗输出（PPM）与损失轨迹 CSV"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        save_image(result.adv_ref, out_dir / f"{stem}_adv_ref.ppm"),
        save_image(result.baseline, out_dir / f"{stem}_clean_sr.ppm"),
        save_image(result.adv_output, out_dir / f"{stem}_adv_sr.ppm"),
    ]
    trace_path = out_dir / f"{stem}_loss_trace.csv"
    pd.DataFrame(
        {"iteration": np.arange(1, len(result.loss_trace) + 1), "l_des": list(result.loss_trace)}
    ).to_csv(trace_path, index=False, float_format="%.10f")
    written.append(trace_path)
    return written
