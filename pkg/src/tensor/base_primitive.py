"""可微原语基类定义"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.errors import ShapeMismatchError


class OpKind(str, Enum):
    """原语种类"""

    ADD = "add"
    SUB = "sub"
    MUL_ELEMENTWISE = "mul_elementwise"
    SCALAR_MUL = "scalar_mul"
    RELU = "relu"
    CONV2D = "conv2d"
    BILINEAR_RESIZE = "bilinear_resize"
    BICUBIC_RESIZE = "bicubic_resize"
    UNFOLD_PATCHES = "unfold_patches"
    FOLD_PATCHES_OVERLAP_AVERAGE = "fold_patches_overlap_average"
    MATMUL = "matmul"
    SOFTMAX_ROWS = "softmax_rows"
    L2_NORMALIZE_ROWS = "l2_normalize_rows"
    REDUCE_SUM = "reduce_sum"
    REDUCE_MEAN = "reduce_mean"
    SQUARE = "square"
    SQRT = "sqrt"
    ABS = "abs"
    CONCAT_CHANNELS = "concat_channels"
    CLAMP01 = "clamp01"


Attrs = Dict[str, Any]
Saved = Tuple[Any, ...]


class BasePrimitive(ABC):
    """原语基类

    所有原语都需要继承此类并实现 forward / backward。forward 只接收 numpy 数组，
    返回输出和反向传播需要保存的中间量；backward 返回每个输入的梯度。
    """

    # 原语种类
    kind: OpKind

    # 输入个数，None 表示可变
    arity: Optional[int] = 1

    def validate(self, inputs: Sequence[np.ndarray], attrs: Attrs) -> None:
        """检查输入个数，子类可扩展形状检查

        Args:
            inputs: 输入数组
            attrs: 属性字典

        Raises:
            ShapeMismatchError: 输入不合法
        """
        if self.arity is not None and len(inputs) != self.arity:
            raise ShapeMismatchError(
                self.kind.value,
                f"expected {self.arity} inputs, got {len(inputs)}",
                [x.shape for x in inputs],
            )

    @abstractmethod
    def forward(self, inputs: Sequence[np.ndarray], attrs: Attrs) -> Tuple[np.ndarray, Saved]:
        """前向计算

        Args:
            inputs: 输入数组
            attrs: 属性字典

        Returns:
            (输出数组, 反向需要的保存量)
        """

    @abstractmethod
    def backward(
        self,
        grad: np.ndarray,
        inputs: Sequence[np.ndarray],
        output: np.ndarray,
        saved: Saved,
        attrs: Attrs,
    ) -> List[np.ndarray]:
        """反向计算

        Args:
            grad: 损失对输出的梯度
            inputs: 前向输入
            output: 前向输出
            saved: 前向保存量
            attrs: 属性字典

        Returns:
            损失对每个输入的梯度，与输入一一对应
        """

    def _mismatch(self, detail: str, *shapes: Sequence[int]) -> ShapeMismatchError:
        return ShapeMismatchError(self.kind.value, detail, list(shapes))

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__}(kind='{self.kind.value}')>"
