"""异常层级定义

库代码只负责抛出异常；CLI 统一捕获并映射为退出码：
0 成功，1 用法错误，2 数据错误，3 数值失败。
"""

from typing import Optional, Sequence


class RefSRError(Exception):
    """工作台异常基类"""

    exit_code: int = 1


# =============================================================================
# 用法错误 (exit 1)
# =============================================================================

class UsageError(RefSRError):
    """命令行参数组合错误或缺失输入文件"""

    exit_code = 1


# =============================================================================
# 张量 / 计算图错误
# =============================================================================

class ShapeMismatchError(RefSRError, ValueError):
    """算子输入形状不合法"""

    exit_code = 2

    def __init__(self, op: str, detail: str, shapes: Optional[Sequence[Sequence[int]]] = None):
        self.op = op
        self.shapes = [tuple(s) for s in (shapes or [])]
        suffix = f" (shapes: {', '.join(str(s) for s in self.shapes)})" if self.shapes else ""
        self.detail = detail
        super().__init__(f"{op}: {detail}{suffix}")

    def __reduce__(self):
        return (type(self), (self.op, self.detail, self.shapes))


class RecordClearedError(RefSRError):
    """计算记录已被清空，节点句柄失效"""

    exit_code = 3


class NonScalarRootError(RefSRError, ValueError):
    """反向传播的根节点不是标量"""

    exit_code = 3


# =============================================================================
# 数据错误 (exit 2)
# =============================================================================

class DataError(RefSRError):
    """数据读写或格式错误"""

    exit_code = 2


class ImageFormatError(DataError):
    """图像文件头损坏、数据截断或位深不支持"""


class ManifestError(DataError):
    """数据集清单不合法"""


class CheckpointError(DataError):
    """检查点文件错误"""


class CheckpointMagicError(CheckpointError):
    """魔数不匹配"""


class CheckpointVersionError(CheckpointError):
    """版本号不匹配"""


class CheckpointTruncatedError(CheckpointError):
    """文件被截断"""


class CheckpointShapeError(CheckpointError):
    """张量形状表与模型配置不一致"""


# =============================================================================
# 数值失败 (exit 3)
# =============================================================================

class NumericalError(RefSRError):
    """数值计算失败"""

    exit_code = 3


class DivergenceError(NumericalError):
    """训练损失出现 NaN / Inf"""

    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"training diverged at step {step}: loss={loss}")

    def __reduce__(self):
        return (type(self), (self.step, self.loss))


class AttackDivergenceError(NumericalError):
    """攻击过程中破坏损失出现 NaN / Inf"""

    def __init__(self, iteration: int, loss: float, diagnostic: str = ""):
        self.iteration = iteration
        self.loss = loss
        self.diagnostic = diagnostic
        message = f"destruction loss became non-finite at iteration {iteration}: {loss}"
        if diagnostic:
            message += f" ({diagnostic})"
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (self.iteration, self.loss, self.diagnostic))
