"""原语注册中心"""

from typing import Dict, List, Optional, Type

from .base_primitive import BasePrimitive, OpKind


class PrimitiveRegistry:
    """原语注册中心

    管理 OpKind 到原语实例的映射，前向分发与反向传播都从这里取规则。
    """

    _instance: Optional["PrimitiveRegistry"] = None
    _primitives: Dict[OpKind, BasePrimitive] = {}

    def __new__(cls):
        """单例模式"""
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._primitives = {}
        return cls._instance

    @classmethod
    def register(cls, primitive: BasePrimitive) -> None:
        """注册原语

        Args:
            primitive: 原语实例
        """
        instance = cls()
        instance._primitives[primitive.kind] = primitive

    @classmethod
    def get(cls, kind: OpKind) -> BasePrimitive:
        """获取原语

        Args:
            kind: 原语种类

        Returns:
            原语实例

        Raises:
            ValueError: 种类未知或未注册
        """
        instance = cls()
        try:
            return instance._primitives[OpKind(kind)]
        except (KeyError, ValueError):
            raise ValueError(f"no primitive registered for op kind '{kind}'") from None

    @classmethod
    def kinds(cls) -> List[OpKind]:
        """获取所有已注册原语的种类"""
        instance = cls()
        return list(instance._primitives.keys())

    @classmethod
    def missing(cls) -> List[OpKind]:
        """返回尚未注册的种类（用于自检）"""
        registered = set(cls.kinds())
        return [kind for kind in OpKind if kind not in registered]


def register_primitive(cls: Type[BasePrimitive]) -> Type[BasePrimitive]:
    """原语注册装饰器

    使用示例:
        @register_primitive
        class Relu(BasePrimitive):
            kind = OpKind.RELU
            ...
    """
    PrimitiveRegistry.register(cls())
    return cls
