"""张量与反向求导模块"""

from .base_primitive import BasePrimitive, OpKind
from .registry import PrimitiveRegistry, register_primitive
from .tensor import ComputationRecord, Node, Tensor, backward, forward_primitive, grad_of
from .gradcheck import check_primitive, finite_diff_grad, random_case, relative_error

__all__ = [
    "BasePrimitive",
    "OpKind",
    "PrimitiveRegistry",
    "register_primitive",
    "ComputationRecord",
    "Node",
    "Tensor",
    "backward",
    "forward_primitive",
    "grad_of",
    "check_primitive",
    "finite_diff_grad",
    "random_case",
    "relative_error",
]
