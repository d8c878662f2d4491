"""Adam 优化器（带偏差修正）"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from src.model.schemas import ModelParams


class AdamConfig(BaseModel):
    """Adam 超参数"""

    learning_rate: float = Field(default=1e-3, gt=0)
    betas: Tuple[float, float] = Field(default=(0.9, 0.999))
    eps: float = Field(default=1e-8, gt=0)

    @field_validator("betas")
    @classmethod
    def _check_betas(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in value):
            raise ValueError(f"adam betas must lie in [0, 1), got {value}")
        return value


@dataclass
class OptimizerState:
    """一阶 / 二阶矩与步数，矩的形状与参数一一对应"""

    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "OptimizerState":
        return cls(
            first_moment={name: np.zeros_like(arr) for name, arr in params.items()},
            second_moment={name: np.zeros_like(arr) for name, arr in params.items()},
        )


def adam_step(
    params: ModelParams,
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    config: AdamConfig,
) -> Tuple[ModelParams, OptimizerState]:
    """执行一步 Adam 更新，返回新的参数与状态（不修改输入）"""
    beta1, beta2 = config.betas
    step = state.step + 1
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step

    updated: Dict[str, np.ndarray] = {}
    first: Dict[str, np.ndarray] = {}
    second: Dict[str, np.ndarray] = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        m = state.first_moment.get(name, np.zeros_like(value))
        v = state.second_moment.get(name, np.zeros_like(value))
        first[name] = beta1 * m + (1.0 - beta1) * grad
        second[name] = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = first[name] / correction1
        v_hat = second[name] / correction2
        updated[name] = value - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)

    return ModelParams.from_arrays(updated), OptimizerState(first, second, step)
