"""图像编解码：PPM P6（必选）与 8 位 RGB PNG（可选，依赖 pypng）

ImagePlane 在内存中是 H×W×3 的 float64 数组，取值 [0, 1]；
8 位值 v 映射为 v/255，保存时按四舍五入（half-up）量化。
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.utils.errors import ImageFormatError
from src.utils.logger import logger

PathLike = Union[str, Path]

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_WHITESPACE = b" \t\n\r\x0b\x0c"


def check_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    """校验 ImagePlane 不变量：H×W×3 且取值在 [0, 1]"""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageFormatError(f"{name} must be an H×W×3 image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ImageFormatError(f"{name} values must lie in [0, 1]")
    return arr


def quantize(image: np.ndarray) -> np.ndarray:
    """[0, 1] 浮点 → uint8（round-half-up）"""
    return np.clip(np.floor(np.asarray(image, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def dequantize(raw: np.ndarray) -> np.ndarray:
    """uint8 → [0, 1] 浮点"""
    return raw.astype(np.float64) / 255.0


# =============================================================================
# PPM P6
# =============================================================================

def _read_token(payload: bytes, pos: int) -> Tuple[bytes, int]:
    """读取 PPM 头中的下一个字段，跳过空白与注释"""
    n = len(payload)
    while pos < n:
        ch = payload[pos:pos + 1]
        if ch == b"#":
            while pos < n and payload[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and payload[pos:pos + 1] not in _WHITESPACE and payload[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError("malformed PPM header: unexpected end of header")
    return payload[start:pos], pos


def decode_ppm(payload: bytes) -> np.ndarray:
    """解码 P6 字节流"""
    magic, pos = _read_token(payload, 0)
    if magic != b"P6":
        raise ImageFormatError(f"malformed PPM header: magic {magic!r} is not P6")
    fields = []
    for _ in range(3):
        token, pos = _read_token(payload, pos)
        if not token.isdigit():
            raise ImageFormatError(f"malformed PPM header: {token!r} is not a number")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageFormatError(f"malformed PPM header: size {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"unsupported PPM bit depth: maxval {maxval} (only 255 is supported)")
    if pos >= len(payload) or payload[pos:pos + 1] not in _WHITESPACE:
        raise ImageFormatError("malformed PPM header: missing separator before pixel data")
    pos += 1
    expected = width * height * 3
    data = payload[pos:pos + expected]
    if len(data) < expected:
        raise ImageFormatError(f"truncated PPM payload: expected {expected} bytes, got {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(height, width, 3)
    return dequantize(raw)


def encode_ppm(image: np.ndarray) -> bytes:
    """编码为 P6 字节流"""
    arr = check_image(image)
    height, width = arr.shape[:2]
    return f"P6\n{width} {height}\n255\n".encode("ascii") + quantize(arr).tobytes()


# =============================================================================
# PNG (pypng)
# =============================================================================

def _decode_png(path: Path) -> np.ndarray:
    try:
        import png
    except ImportError as e:
        raise ImageFormatError(f"PNG support needs the 'pypng' package: {e}") from e
    try:
        width, height, rows, info = png.Reader(filename=str(path)).read()
        if info.get("bitdepth") != 8 or info.get("greyscale") or info.get("alpha"):
            raise ImageFormatError(
                f"unsupported PNG format in {path}: bitdepth={info.get('bitdepth')} "
                f"greyscale={info.get('greyscale')} alpha={info.get('alpha')} (need 8-bit RGB)"
            )
        raw = np.vstack([np.asarray(row, dtype=np.uint8) for row in rows]).reshape(height, width, 3)
    except png.Error as e:
        raise ImageFormatError(f"malformed PNG {path}: {e}") from e
    return dequantize(raw)


def _encode_png(image: np.ndarray, path: Path) -> None:
    try:
        import png
    except ImportError as e:
        raise ImageFormatError(f"PNG support needs the 'pypng' package: {e}") from e
    raw = quantize(check_image(image))
    height, width = raw.shape[:2]
    writer = png.Writer(width=width, height=height, greyscale=False, bitdepth=8)
    with open(path, "wb") as f:
        writer.write(f, raw.reshape(height, width * 3).tolist())


# =============================================================================
# 对外接口
# =============================================================================

def load_image(path: PathLike) -> np.ndarray:
    """读取图像（按文件签名识别 PPM / PNG）

    Args:
        path: 文件路径

    Returns:
        H×W×3 浮点图像

    Raises:
        ImageFormatError: 文件头损坏、数据截断或格式不支持
    """
    path = Path(path)
    payload = path.read_bytes()
    if payload.startswith(PNG_SIGNATURE):
        return _decode_png(path)
    return decode_ppm(payload)


def save_image(image: np.ndarray, path: PathLike) -> Path:
    """保存图像（扩展名 .png 走 PNG，其余一律写 PPM P6）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".png":
        _encode_png(image, path)
    else:
        path.write_bytes(encode_ppm(image))
    logger.debug(f"Saved image {path} ({image.shape[1]}x{image.shape[0]})")
    return path
