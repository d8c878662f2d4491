"""程序化数据集：纹理生成与 (GT, LR, Ref) 三元组合成

相似度等级 1..5 通过参考图与 GT 的几何重叠比例 {0.9, 0.7, 0.5, 0.3, 0.1}
加上光度增益抖动来刻画；等级 1 最相似。
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from src.tensor.kernels import resize_array
from src.utils.errors import DataError
from src.utils.rng import stream

from .resample import degrade

OVERLAP_BY_LEVEL: Dict[int, float] = {1: 0.9, 2: 0.7, 3: 0.5, 4: 0.3, 5: 0.1}
CANVAS_FACTOR = 2.5
GT_MARGIN = 0.3
GAIN_RANGE = (0.95, 1.05)
TEXTURE_RANGE = (0.05, 0.95)


@dataclass(frozen=True)
class SampleTriplet:
    """一个样本：GT (sH×sW)、LR (H×W)、Ref (sH×sW)"""

    gt: np.ndarray
    lr: np.ndarray
    ref: np.ndarray
    similarity_level: int
    sample_id: str
    overlap_fraction: float = float("nan")

    @property
    def scale(self) -> int:
        return self.gt.shape[0] // self.lr.shape[0]


def sample_id_for(sample_index: int, level: int) -> str:
    return f"s{sample_index:04d}_l{level}"


def generate_texture(seed: int, size: int) -> np.ndarray:
    """生成确定性纹理图

    6 个方向正弦波（每图 4–24 个周期，随机相位 / 方向 / 通道幅度）
    叠加 8×8 随机值网格的双三次上采样，再仿射归一化到 [0.05, 0.95]。
    """
    if size < 16:
        raise DataError(f"texture size must be >= 16, got {size}")
    rng = stream("texture", seed)
    coords = (np.arange(size, dtype=np.float64) + 0.5) / size
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    image = np.zeros((size, size, 3), dtype=np.float64)
    for _ in range(6):
        freq = rng.uniform(4.0, 24.0)
        theta = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amplitude = rng.uniform(0.2, 1.0, size=3)
        wave = np.sin(2.0 * np.pi * freq * (xx * np.cos(theta) + yy * np.sin(theta)) + phase)
        image += wave[:, :, None] * amplitude
    grid = rng.uniform(0.0, 1.0, size=(8, 8, 3))
    image += 2.0 * resize_array(grid, size, size, "cubic")

    lo, hi = TEXTURE_RANGE
    span = image.max() - image.min()
    image = lo + (hi - lo) * (image - image.min()) / span
    return np.clip(image, lo, hi)


def _placement(canvas: int, gt_size: int, axis: int, sign: int, shift: int) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """返回 GT 与 Ref 在画布上的左上角坐标"""
    margin = int(round(GT_MARGIN * gt_size))
    along = margin if sign > 0 else canvas - gt_size - margin
    ortho = (canvas - gt_size) // 2
    gt_pos = [0, 0]
    gt_pos[axis] = along
    gt_pos[1 - axis] = ortho
    ref_pos = list(gt_pos)
    ref_pos[axis] = along + sign * shift
    return (gt_pos[0], gt_pos[1]), (ref_pos[0], ref_pos[1])


def synthesize_triplet(
    master_seed: int,
    sample_index: int,
    similarity_level: int,
    gt_size: int = 64,
    scale: int = 4,
) -> SampleTriplet:
    """合成一个三元组

    每个样本的随机流只由 (master_seed, sample_index) 决定，与生成顺序无关；
    纹理、位移方向与光度增益都与等级无关，等级只改变位移长度。

    Raises:
        DataError: 等级不在 1..5 或 gt_size 不是 scale 的倍数
    """
    if similarity_level not in OVERLAP_BY_LEVEL:
        raise DataError(f"similarity level must be in 1..5, got {similarity_level}")
    if gt_size % scale != 0 or gt_size < 16:
        raise DataError(f"gt_size must be a multiple of {scale} and >= 16, got {gt_size}")

    rng = stream(master_seed, sample_index)
    texture_seed = int(rng.integers(0, 2**31 - 1))
    filler_seed = int(rng.integers(0, 2**31 - 1))
    axis = int(rng.integers(0, 2))
    sign = 1 if rng.integers(0, 2) == 1 else -1
    gain = float(rng.uniform(*GAIN_RANGE))

    canvas = int(round(CANVAS_FACTOR * gt_size))
    texture = generate_texture(texture_seed, canvas)
    filler = generate_texture(filler_seed, canvas)

    overlap = OVERLAP_BY_LEVEL[similarity_level]
    shift = int(round((1.0 - overlap) * gt_size))
    (gy, gx), (ry, rx) = _placement(canvas, gt_size, axis, sign, shift)

    gt = texture[gy:gy + gt_size, gx:gx + gt_size].copy()

    rows = np.arange(ry, ry + gt_size)[:, None]
    cols = np.arange(rx, rx + gt_size)[None, :]
    inside = (rows >= gy) & (rows < gy + gt_size) & (cols >= gx) & (cols < gx + gt_size)
    ref = np.where(
        inside[:, :, None],
        texture[ry:ry + gt_size, rx:rx + gt_size],
        filler[ry:ry + gt_size, rx:rx + gt_size],
    )
    ref = np.clip(ref * gain, 0.0, 1.0)

    return SampleTriplet(
        gt=gt,
        lr=degrade(gt, scale),
        ref=ref,
        similarity_level=similarity_level,
        sample_id=sample_id_for(sample_index, similarity_level),
        overlap_fraction=float(inside.mean()),
    )
