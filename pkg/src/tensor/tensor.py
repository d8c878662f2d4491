"""张量与计算记录

Tensor 是带形状的双精度数组；挂接到 ComputationRecord 的张量拥有节点句柄，
其上的原语调用会被追加到记录中，供 backward 反向求导。
一个记录只能在单个线程内使用；脱离记录的张量是不可变值，可以自由共享。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import NonScalarRootError, RecordClearedError, RefSRError

from . import primitives  # noqa: F401  注册全部原语
from .base_primitive import Attrs, OpKind
from .registry import PrimitiveRegistry

ArrayLike = Union[np.ndarray, Sequence[float], float]


@dataclass(frozen=True)
class Node:
    """计算记录中的一个节点"""

    op: Optional[OpKind]
    inputs: Tuple[Optional[int], ...]
    attrs: Attrs
    saved: Tuple[Any, ...]
    input_data: Tuple[np.ndarray, ...]
    output: np.ndarray = field(repr=False)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.output.shape


def _as_array(data: ArrayLike) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    arr.setflags(write=False)
    return arr


class Tensor:
    """稠密双精度张量（行主序）"""

    __slots__ = ("data", "node_id", "_record", "_generation")

    def __init__(
        self,
        data: ArrayLike,
        record: Optional["ComputationRecord"] = None,
        node_id: Optional[int] = None,
    ):
        readonly = isinstance(data, np.ndarray) and data.dtype == np.float64 and not data.flags.writeable
        self.data = data if readonly else _as_array(data)
        self.node_id = node_id
        self._record = record
        self._generation = record.generation if record is not None else None

    @classmethod
    def constant(cls, data: ArrayLike) -> "Tensor":
        """创建脱离记录的常量张量"""
        return cls(_as_array(data))

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def record(self) -> Optional["ComputationRecord"]:
        return self._record

    @property
    def is_attached(self) -> bool:
        return self.node_id is not None

    def ensure_valid(self) -> None:
        """检查节点句柄仍然有效"""
        if self._record is not None and self._generation != self._record.generation:
            raise RecordClearedError(f"tensor node {self.node_id} belongs to a cleared computation record")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def __add__(self, other: "Tensor") -> "Tensor":
        return forward_primitive(OpKind.ADD, [self, _wrap(other)])

    def __sub__(self, other: "Tensor") -> "Tensor":
        return forward_primitive(OpKind.SUB, [self, _wrap(other)])

    def __mul__(self, other: Union["Tensor", float, int]) -> "Tensor":
        if isinstance(other, (int, float)):
            return forward_primitive(OpKind.SCALAR_MUL, [self], {"scalar": float(other)})
        return forward_primitive(OpKind.MUL_ELEMENTWISE, [self, _wrap(other)])

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __repr__(self) -> str:
        where = f"node={self.node_id}" if self.is_attached else "detached"
        return f"<Tensor(shape={self.shape}, {where})>"


def _wrap(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor.constant(value)


class ComputationRecord:
    """只追加的计算记录（梯度带）

    节点按创建顺序编号，输入节点一定先于使用它的节点，天然满足拓扑序。
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self.generation = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf(self, data: Union[Tensor, ArrayLike]) -> Tensor:
        """登记一个可求导的输入（叶子节点）"""
        arr = data.data if isinstance(data, Tensor) else _as_array(data)
        node_id = self._append(Node(op=None, inputs=(), attrs={}, saved=(), input_data=(), output=arr))
        return Tensor(arr, record=self, node_id=node_id)

    def _append(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def clear(self) -> None:
        """清空记录，已发放的节点句柄全部失效"""
        self.nodes = []
        self.generation += 1


def forward_primitive(kind: OpKind, inputs: Sequence[Tensor], attrs: Optional[Attrs] = None) -> Tensor:
    """执行一个原语

    只要有任意输入挂接在记录上，结果节点就追加到该记录中。

    Args:
        kind: 原语种类
        inputs: 输入张量
        attrs: 属性字典

    Returns:
        输出张量

    Raises:
        ShapeMismatchError: 输入形状对该原语不合法
        RecordClearedError: 输入所属记录已被清空
    """
    attrs = dict(attrs or {})
    primitive = PrimitiveRegistry.get(kind)
    record: Optional[ComputationRecord] = None
    for tensor in inputs:
        if tensor.is_attached:
            tensor.ensure_valid()
            if record is None:
                record = tensor.record
            elif tensor.record is not record:
                raise RefSRError(f"{OpKind(kind).value}: inputs belong to different computation records")

    datas = [t.data for t in inputs]
    primitive.validate(datas, attrs)
    out, saved = primitive.forward(datas, attrs)
    out = np.ascontiguousarray(out, dtype=np.float64)
    out.setflags(write=False)

    if record is None:
        return Tensor(out)
    node = Node(
        op=OpKind(kind),
        inputs=tuple(t.node_id for t in inputs),
        attrs=attrs,
        saved=saved,
        input_data=tuple(datas),
        output=out,
    )
    return Tensor(out, record=record, node_id=record._append(node))


def backward(root: Tensor, wrt: Optional[Iterable[Tensor]] = None) -> Dict[int, Tensor]:
    """反向模式求导

    Args:
        root: 挂接在记录上的标量张量
        wrt: 只返回这些张量的梯度；None 表示返回所有节点

    Returns:
        node_id 到梯度张量的映射；与 root 无关的节点梯度为零

    Raises:
        NonScalarRootError: root 不是标量
        RecordClearedError: 记录已被清空
    """
    if not root.is_attached:
        raise RefSRError("backward() root is not attached to a computation record")
    root.ensure_valid()
    if root.size != 1:
        raise NonScalarRootError(f"backward() needs a scalar root, got shape {root.shape}")

    record = root.record
    nodes = record.nodes
    grads: List[Optional[np.ndarray]] = [None] * len(nodes)
    grads[root.node_id] = np.ones(root.shape, dtype=np.float64)

    for node_id in range(root.node_id, -1, -1):
        node = nodes[node_id]
        grad = grads[node_id]
        if grad is None or node.op is None:
            continue
        primitive = PrimitiveRegistry.get(node.op)
        input_grads = primitive.backward(grad, node.input_data, node.output, node.saved, node.attrs)
        for input_id, input_grad in zip(node.inputs, input_grads):
            if input_id is None:
                continue
            if grads[input_id] is None:
                grads[input_id] = np.array(input_grad, dtype=np.float64)
            else:
                grads[input_id] = grads[input_id] + input_grad

    if wrt is None:
        wanted = range(len(nodes))
    else:
        wanted = []
        for tensor in wrt:
            if tensor.record is not record:
                raise RefSRError("backward() wrt tensor is not on the root's computation record")
            tensor.ensure_valid()
            wanted.append(tensor.node_id)

    result: Dict[int, Tensor] = {}
    for node_id in wanted:
        grad = grads[node_id]
        result[node_id] = Tensor(grad if grad is not None else np.zeros(nodes[node_id].shape))
    return result


def grad_of(root: Tensor, leaf: Tensor) -> np.ndarray:
    """便捷函数：返回 root 对单个叶子的梯度数组"""
    return backward(root, wrt=[leaf])[leaf.node_id].data
