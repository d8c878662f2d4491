"""检查点二进制格式

布局（小端）：
    b"RFSA" | u32 version=1 | u32 tensor_count
    每个张量: u32 name_len | UTF-8 name | u32 ndim | u32 dims[ndim] | f8 data[prod(dims)]（行主序）
"""

import struct
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.model.schemas import ModelConfig, ModelParams
from src.utils.errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from src.utils.logger import logger

PathLike = Union[str, Path]

MAGIC = b"RFSA"
VERSION = 1
_U32 = struct.Struct("<I")


def checkpoint_size(params: ModelParams) -> int:
    """按格式计算文件字节数"""
    size = len(MAGIC) + 2 * _U32.size
    for name, arr in params.items():
        size += _U32.size + len(name.encode("utf-8")) + _U32.size + _U32.size * arr.ndim + 8 * arr.size
    return size


def encode_checkpoint(params: ModelParams) -> bytes:
    chunks = [MAGIC, _U32.pack(VERSION), _U32.pack(len(params))]
    for name, arr in params.items():
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(arr.ndim))
        chunks.extend(_U32.pack(dim) for dim in arr.shape)
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.payload):
            raise CheckpointTruncatedError(
                f"truncated checkpoint: need {n} bytes for {what} at offset {self.pos}, file has {len(self.payload)}"
            )
        chunk = self.payload[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(_U32.size, what))[0]


def decode_checkpoint(payload: bytes) -> ModelParams:
    """解析检查点字节流

    Raises:
        CheckpointMagicError: 魔数不是 RFSA
        CheckpointVersionError: 版本号不是 1
        CheckpointTruncatedError: 数据不完整
        CheckpointError: 文件尾部有多余字节或名称重复
    """
    reader = _Reader(payload)
    magic = reader.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise CheckpointMagicError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
    version = reader.u32("version")
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}, expected {VERSION}")

    arrays: Dict[str, np.ndarray] = {}
    for _ in range(reader.u32("tensor count")):
        name = reader.take(reader.u32("name length"), "name").decode("utf-8")
        ndim = reader.u32(f"{name} ndim")
        shape: Tuple[int, ...] = tuple(reader.u32(f"{name} dims") for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(reader.take(8 * count, f"{name} data"), dtype="<f8")
        if name in arrays:
            raise CheckpointError(f"duplicate tensor name in checkpoint: {name}")
        arrays[name] = data.reshape(shape).astype(np.float64)
    if reader.pos != len(payload):
        raise CheckpointError(f"checkpoint has {len(payload) - reader.pos} trailing bytes")
    return ModelParams.from_arrays(arrays)


def save_checkpoint(params: ModelParams, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(params))
    logger.info(f"Saved checkpoint {path} ({params.num_parameters} parameters)")
    return path


def load_checkpoint(path: PathLike, config: Optional[ModelConfig] = None) -> ModelParams:
    """读取检查点；给定 config 时校验形状表

    Raises:
        CheckpointError: 文件不存在或格式错误（各子类见 decode_checkpoint）
        CheckpointShapeError: 形状表与 config 不一致
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    params = decode_checkpoint(path.read_bytes())
    if config is not None:
        expected = dict(ModelParams.shape_table(config))
        actual = {name: tuple(arr.shape) for name, arr in params.items()}
        if actual != expected:
            diff = sorted(set(expected.items()) ^ set(actual.items()))
            raise CheckpointShapeError(f"checkpoint {path} does not match the model config: {diff}")
    return params
