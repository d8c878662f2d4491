"""数据集清单：JSON 读写、三元组物化与用户图像目录扫描"""

import re
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.utils.errors import DataError, ManifestError
from src.utils.logger import logger

from .image_io import load_image, save_image
from .resample import center_crop, degrade
from .synth import SampleTriplet, sample_id_for, synthesize_triplet

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.json"
IMAGE_SUFFIXES = (".ppm", ".png")
_FOLDER_PATTERN = re.compile(r"^(?P<id>.+)_(?P<role>gt|ref)$")
_LEVEL_PATTERN = re.compile(r"_l(?P<level>[1-5])$")


class ManifestEntry(BaseModel):
    """清单条目；gt / ref 为 null 表示按种子合成"""

    id: str = Field(..., min_length=1, description="样本 ID，清单内唯一")
    level: int = Field(..., ge=1, le=5, description="相似度等级 1..5")
    gt: Optional[str] = Field(default=None, description="GT 图像路径（相对清单目录）")
    ref: Optional[str] = Field(default=None, description="参考图像路径（相对清单目录）")
    lr: Optional[str] = Field(default=None, description="LR 图像路径，仅供查看；读取时总是由 GT 重新退化")
    index: Optional[int] = Field(default=None, ge=0, description="合成用的样本序号")

    @model_validator(mode="after")
    def _check_source(self) -> "ManifestEntry":
        if (self.gt is None) != (self.ref is None):
            raise ValueError(f"entry {self.id}: gt and ref must both be paths or both be null")
        if self.gt is None and self.index is None:
            raise ValueError(f"entry {self.id}: synthesized entries need an index")
        return self

    @property
    def synthesized(self) -> bool:
        return self.gt is None


class DatasetManifest(BaseModel):
    """数据集清单"""

    master_seed: int = Field(..., description="合成数据的主种子")
    scale: int = Field(default=4, ge=2, description="超分倍率 s")
    gt_size: int = Field(default=64, ge=16, description="合成 GT 边长")
    crop_size: Optional[int] = Field(default=None, ge=16, description="用户图像的中心裁剪尺寸")
    entries: List[ManifestEntry] = Field(default_factory=list)

    @field_validator("entries")
    @classmethod
    def _unique_ids(cls, entries: List[ManifestEntry]) -> List[ManifestEntry]:
        seen = set()
        for entry in entries:
            if entry.id in seen:
                raise ValueError(f"duplicate sample id: {entry.id}")
            seen.add(entry.id)
        return entries

    @model_validator(mode="after")
    def _check_geometry(self) -> "DatasetManifest":
        if self.gt_size % self.scale != 0:
            raise ValueError(f"gt_size {self.gt_size} is not a multiple of scale {self.scale}")
        return self

    def filter_levels(self, levels: Iterable[int]) -> "DatasetManifest":
        wanted = set(levels)
        return self.model_copy(update={"entries": [e for e in self.entries if e.level in wanted]})


# =============================================================================
# 清单构建与读写
# =============================================================================

def build_synthetic_manifest(
    master_seed: int,
    count_per_level: int,
    gt_size: int = 64,
    scale: int = 4,
    levels: Sequence[int] = (1, 2, 3, 4, 5),
    start_index: int = 0,
) -> DatasetManifest:
    """构建纯合成清单：每个样本序号在每个等级各出一个三元组（同一 GT 配不同参考图）"""
    if count_per_level < 1:
        raise ManifestError(f"count per level must be >= 1, got {count_per_level}")
    entries = [
        ManifestEntry(id=sample_id_for(index, level), level=level, index=index)
        for index in range(start_index, start_index + count_per_level)
        for level in sorted(set(levels))
    ]
    try:
        return DatasetManifest(master_seed=master_seed, scale=scale, gt_size=gt_size, entries=entries)
    except ValidationError as e:
        raise ManifestError(f"invalid synthetic manifest: {e}") from e


def save_manifest(manifest: DatasetManifest, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_manifest(path: PathLike) -> DatasetManifest:
    """读取清单 JSON

    Raises:
        ManifestError: 文件不存在或内容不符合清单结构
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ManifestError(f"invalid manifest {path}: {e}") from e


def write_dataset(manifest: DatasetManifest, out_dir: PathLike) -> DatasetManifest:
    """把合成清单物化为 PPM 文件并写出 manifest.json

    Returns:
        指向已写文件的新清单（路径相对 out_dir）
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    written: List[ManifestEntry] = []
    for entry in manifest.entries:
        triplet = load_triplet(manifest, entry)
        paths = {}
        for role, image in (("gt", triplet.gt), ("ref", triplet.ref), ("lr", triplet.lr)):
            target = images_dir / f"{entry.id}_{role}.ppm"
            save_image(image, target)
            paths[role] = target.relative_to(out_dir).as_posix()
        written.append(entry.model_copy(update=paths))

    result = manifest.model_copy(update={"entries": written})
    save_manifest(result, out_dir / MANIFEST_NAME)
    logger.info(f"Wrote {len(written)} triplets ({3 * len(written)} images) to {out_dir}")
    return result


# =============================================================================
# 三元组物化
# =============================================================================

def _square_to_scale(image: np.ndarray, size: int, scale: int) -> np.ndarray:
    side = size - size % scale
    if side < scale:
        raise DataError(f"image too small for scale {scale}: {image.shape[1]}x{image.shape[0]}")
    return center_crop(image, side)


def load_triplet(
    manifest: DatasetManifest,
    entry: ManifestEntry,
    base_dir: Optional[PathLike] = None,
) -> SampleTriplet:
    """物化一个清单条目

    文件条目读取 GT / Ref（必要时中心裁剪到 crop_size 并修整到 s 的倍数），
    合成条目按 (master_seed, index, level) 生成；LR 一律由 GT 重新退化。
    """
    if entry.synthesized:
        return synthesize_triplet(manifest.master_seed, entry.index, entry.level, manifest.gt_size, manifest.scale)

    base = Path(base_dir) if base_dir is not None else Path(".")
    gt = load_image(base / entry.gt)
    ref = load_image(base / entry.ref)
    side = min(gt.shape[0], gt.shape[1], ref.shape[0], ref.shape[1])
    if manifest.crop_size is not None:
        side = min(side, manifest.crop_size)
    gt = _square_to_scale(gt, side, manifest.scale)
    ref = _square_to_scale(ref, side, manifest.scale)
    return SampleTriplet(
        gt=gt,
        lr=degrade(gt, manifest.scale),
        ref=ref,
        similarity_level=entry.level,
        sample_id=entry.id,
    )


def load_dataset(path: PathLike, levels: Optional[Iterable[int]] = None) -> List[SampleTriplet]:
    """读取清单并物化全部条目（可按等级过滤）"""
    path = Path(path)
    manifest = load_manifest(path)
    if levels is not None:
        manifest = manifest.filter_levels(levels)
    return [load_triplet(manifest, entry, path.parent) for entry in manifest.entries]


def load_folder_manifest(folder: PathLike, crop_size: int = 600, scale: int = 4) -> DatasetManifest:
    """扫描用户图像目录，按 ``<id>_gt`` / ``<id>_ref`` 配对

    ID 以 ``_l<level>`` 结尾时取该等级，否则记为等级 1。
    返回的清单路径是相对 folder 的。
    """
    folder = Path(folder)
    if not folder.is_dir():
        raise ManifestError(f"image folder not found: {folder}")
    pairs = {}
    for path in sorted(folder.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES:
            continue
        match = _FOLDER_PATTERN.match(path.stem)
        if match is None:
            continue
        pairs.setdefault(match.group("id"), {})[match.group("role")] = path.name

    entries = []
    for sample_id, roles in sorted(pairs.items()):
        if set(roles) != {"gt", "ref"}:
            logger.warning(f"Skipping {sample_id}: missing {'ref' if 'gt' in roles else 'gt'} image")
            continue
        level_match = _LEVEL_PATTERN.search(sample_id)
        level = int(level_match.group("level")) if level_match else 1
        entries.append(ManifestEntry(id=sample_id, level=level, gt=roles["gt"], ref=roles["ref"]))
    if not entries:
        raise ManifestError(f"no <id>_gt / <id>_ref image pairs found in {folder}")
    logger.info(f"Found {len(entries)} image pairs in {folder}")
    return DatasetManifest(master_seed=0, scale=scale, crop_size=crop_size, entries=entries)
