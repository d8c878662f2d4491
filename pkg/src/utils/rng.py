"""可复现随机数流

所有随机性都从 ``SeedSequence`` 派生，键相同则流相同，与生成顺序、并行度无关。
"""

import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def key_to_int(key: Key) -> int:
    """把字符串键映射为稳定的整数（进程间一致，不使用加盐的 hash()）"""
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"stream keys must be non-negative, got {key}")
    return int(key)


def stream(*keys: Key) -> np.random.Generator:
    """由键序列构造独立随机数发生器"""
    return np.random.default_rng(np.random.SeedSequence([key_to_int(k) for k in keys]))
