"""图像编解码、退化管线与合成数据集"""

from .image_io import load_image, save_image, quantize, dequantize
from .resample import bicubic_resize, center_crop, degrade, resize_to
from .synth import OVERLAP_BY_LEVEL, SampleTriplet, generate_texture, synthesize_triplet
from .manifest import (
    DatasetManifest,
    ManifestEntry,
    build_synthetic_manifest,
    load_dataset,
    load_folder_manifest,
    load_manifest,
    load_triplet,
    save_manifest,
    write_dataset,
)

__all__ = [
    "load_image",
    "save_image",
    "quantize",
    "dequantize",
    "bicubic_resize",
    "center_crop",
    "degrade",
    "resize_to",
    "OVERLAP_BY_LEVEL",
    "SampleTriplet",
    "generate_texture",
    "synthesize_triplet",
    "DatasetManifest",
    "ManifestEntry",
    "build_synthetic_manifest",
    "load_dataset",
    "load_folder_manifest",
    "load_manifest",
    "load_triplet",
    "save_manifest",
    "write_dataset",
]
