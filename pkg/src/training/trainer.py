"""训练循环

每个样本使用独立的 ComputationRecord 前向 / 反向，
批内梯度按样本序号顺序累加后取平均，因此结果与并发度无关。
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from config import settings
from src.data.synth import SampleTriplet
from src.model.refsr_net import forward_graph, init_params
from src.model.schemas import ModelConfig, ModelParams
from src.tensor import ComputationRecord, Tensor, backward
from src.utils.errors import DataError, DivergenceError
from src.utils.logger import logger
from src.utils.rng import stream

from .losses import PerceptualProxy, l_per_proxy, l_rec
from .optimizer import AdamConfig, OptimizerState, adam_step

LOSS_COLUMNS = ["step", "loss_total", "loss_rec", "loss_per"]


class LossProfile(str, Enum):
    """损失档位"""
    REC = "rec"                # 仅重建损失
    FULL_PROXY = "full-proxy"  # 重建 + λ1·感知代理损失


class TrainConfig(BaseModel):
    """训练配置"""

    steps: int = Field(default=2000, ge=1, description="优化步数")
    batch_size: int = Field(default=8, ge=1, description="批大小 N_b")
    learning_rate: float = Field(default=1e-3, gt=0)
    adam_betas: Tuple[float, float] = Field(default=(0.9, 0.999))
    adam_eps: float = Field(default=1e-8, gt=0)
    profile: LossProfile = Field(default=LossProfile.FULL_PROXY)
    lambda_per: float = Field(default=0.05, ge=0, description="感知损失权重 λ1")
    seed: int = Field(default=0, description="参数初始化与批次洗牌的种子")
    proxy_seed: int = Field(default=1234, description="感知代理网络的种子")
    log_every: int = Field(default=50, ge=1)
    jobs: int = Field(default=1, ge=1, description="批内样本并发数")

    @model_validator(mode="after")
    def _rec_has_no_perceptual_term(self) -> "TrainConfig":
        if self.profile == LossProfile.REC and self.lambda_per != 0.0:
            raise ValueError(f"profile 'rec' requires lambda_per = 0, got {self.lambda_per}")
        return self

    @classmethod
    def for_profile(cls, profile: Union[str, LossProfile], **overrides) -> "TrainConfig":
        """按档位构建配置：rec → λ1 = 0；full-proxy → λ1 取全局默认值"""
        profile = LossProfile(profile)
        values = {
            "steps": settings.train_steps,
            "batch_size": settings.train_batch_size,
            "learning_rate": settings.learning_rate,
            "proxy_seed": settings.proxy_seed,
            "log_every": settings.train_log_every,
            "lambda_per": 0.0 if profile == LossProfile.REC else settings.lambda_per,
        }
        values.update(overrides)
        return cls(profile=profile, **values)

    @property
    def adam(self) -> AdamConfig:
        return AdamConfig(learning_rate=self.learning_rate, betas=self.adam_betas, eps=self.adam_eps)


@dataclass(frozen=True)
class BatchLoss:
    total: float
    rec: float
    per: float


@dataclass
class TrainingRun:
    """训练结果：最终参数与逐步损失"""

    params: ModelParams
    history: List[Tuple[int, BatchLoss]] = field(default_factory=list)

    def loss_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(step, loss.total, loss.rec, loss.per) for step, loss in self.history],
            columns=LOSS_COLUMNS,
        )

    def write_loss_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.loss_frame().to_csv(path, index=False, float_format="%.8f")
        return path


def _sample_gradients(
    params: ModelParams,
    proxy: PerceptualProxy,
    triplet: SampleTriplet,
    model_config: ModelConfig,
    lambda_per: float,
) -> Tuple[BatchLoss, Dict[str, np.ndarray]]:
    record = ComputationRecord()
    leaves = params.attach(record)
    trace = forward_graph(leaves, model_config, Tensor.constant(triplet.lr), Tensor.constant(triplet.ref))
    gt = Tensor.constant(triplet.gt)
    rec = l_rec(trace.sr, gt)
    if lambda_per > 0.0:
        per = l_per_proxy(trace.sr, gt, proxy)
        total = rec + per * lambda_per
    else:
        per = l_per_proxy(trace.sr.detach(), gt, proxy)
        total = rec
    grads = backward(total, wrt=leaves.values())
    result = {name: grads[leaf.node_id].data for name, leaf in leaves.items()}
    loss = BatchLoss(total=total.item(), rec=rec.item(), per=per.item())
    record.clear()
    return loss, result


def train_loss_gradients(
    params: ModelParams,
    proxy: PerceptualProxy,
    triplets: Sequence[SampleTriplet],
    model_config: ModelConfig,
    lambda_per: float,
    jobs: int = 1,
) -> Tuple[BatchLoss, Dict[str, np.ndarray]]:
    """批平均损失及其对全部参数的梯度

    Args:
        params: 当前参数
        proxy: 感知代理网络
        triplets: 批内样本
        model_config: 模型配置
        lambda_per: 感知损失权重
        jobs: 批内样本并发数

    Returns:
        (批平均损失, 参数名 → 梯度数组)
    """
    if not triplets:
        raise DataError("empty training batch")

    def run(triplet: SampleTriplet):
        return _sample_gradients(params, proxy, triplet, model_config, lambda_per)

    if jobs > 1 and len(triplets) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, triplets))
    else:
        results = [run(t) for t in triplets]

    n = len(results)
    grads = {name: np.zeros_like(arr) for name, arr in params.items()}
    total = rec = per = 0.0
    for loss, sample_grads in results:
        total += loss.total
        rec += loss.rec
        per += loss.per
        for name, grad in sample_grads.items():
            grads[name] = grads[name] + grad
    grads = {name: grad / n for name, grad in grads.items()}
    return BatchLoss(total / n, rec / n, per / n), grads


def _batches(n: int, batch_size: int, seed: int) -> Iterator[List[int]]:
    """按种子洗牌的无限批次流，每轮重新洗牌"""
    rng = stream("train_batches", seed)
    order: List[int] = []
    while True:
        batch = []
        while len(batch) < batch_size:
            if not order:
                order = [int(i) for i in rng.permutation(n)]
            batch.append(order.pop(0))
        yield batch


def train(
    config: TrainConfig,
    model_config: ModelConfig,
    dataset: Sequence[SampleTriplet],
    init: Optional[ModelParams] = None,
    on_step: Optional[Callable[[int, BatchLoss], None]] = None,
) -> TrainingRun:
    """用 Adam 最小化 l_rec + λ1·l_per_proxy 的批平均

    Raises:
        DataError: 训练集为空
        DivergenceError: 损失出现 NaN / Inf
    """
    if not dataset:
        raise DataError("training set is empty")
    params = init if init is not None else init_params(model_config, config.seed)
    params.check(model_config)
    proxy = PerceptualProxy.create(config.proxy_seed)
    state = OptimizerState.zeros_like(params)
    adam = config.adam
    run = TrainingRun(params=params)

    logger.info(
        f"Training {model_config.variant.value} / {config.profile.value}: "
        f"{config.steps} steps, batch {config.batch_size}, {len(dataset)} samples, lambda_per={config.lambda_per}"
    )
    batches = _batches(len(dataset), config.batch_size, config.seed)
    for step in range(1, config.steps + 1):
        batch = [dataset[i] for i in next(batches)]
        loss, grads = train_loss_gradients(params, proxy, batch, model_config, config.lambda_per, config.jobs)
        if not np.isfinite(loss.total):
            raise DivergenceError(step, loss.total)
        run.history.append((step, loss))
        params, state = adam_step(params, grads, state, adam)
        if on_step is not None:
            on_step(step, loss)
        if step % config.log_every == 0 or step == config.steps:
            logger.info(
                f"step {step}/{config.steps} loss={loss.total:.6f} rec={loss.rec:.6f} per={loss.per:.6f}"
            )

    run.params = params
    return run
