"""合成数据集与清单测试"""

import pytest
import sys
import os
import json

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from src.data import (
    OVERLAP_BY_LEVEL,
    DatasetManifest,
    ManifestEntry,
    build_synthetic_manifest,
    degrade,
    generate_texture,
    load_dataset,
    load_folder_manifest,
    load_manifest,
    load_triplet,
    save_image,
    synthesize_triplet,
    write_dataset,
)
from src.metrics import psnr
from src.utils.errors import DataError, ManifestError


class TestTexture:
    """纹理生成测试类"""

    def test_range_and_determinism(self):
        """测试取值范围与确定性"""
        a = generate_texture(3, 40)
        b = generate_texture(3, 40)
        assert a.shape == (40, 40, 3)
        assert np.array_equal(a, b)
        assert a.min() >= 0.05 and a.max() <= 0.95

    def test_different_seeds_differ(self):
        """测试不同种子产生不同纹理"""
        assert not np.array_equal(generate_texture(1, 32), generate_texture(2, 32))

    def test_has_visible_structure(self):
        """测试纹理不是近似常数：水平方向平均绝对梯度大于 0.01"""
        for seed in range(10):
            texture = generate_texture(seed, 64)
            assert np.mean(np.abs(np.diff(texture, axis=1))) > 0.01

    def test_too_small(self):
        """测试尺寸下限"""
        with pytest.raises(DataError):
            generate_texture(0, 8)


class TestSynthesizeTriplet:
    """三元组合成测试类"""

    def test_shapes(self):
        """测试三元组尺寸"""
        t = synthesize_triplet(2024, 0, 3, gt_size=32, scale=4)
        assert t.gt.shape == (32, 32, 3)
        assert t.ref.shape == (32, 32, 3)
        assert t.lr.shape == (8, 8, 3)
        assert t.scale == 4
        assert t.sample_id == "s0000_l3"

    def test_lr_is_degraded_gt(self):
        """测试 LR 由 GT 退化得到"""
        t = synthesize_triplet(2024, 1, 2, gt_size=32)
        assert np.array_equal(t.lr, degrade(t.gt, 4))

    def test_overlap_follows_level(self):
        """测试重叠比例随等级单调递减并接近目标值"""
        overlaps = []
        for level in range(1, 6):
            t = synthesize_triplet(7, 5, level, gt_size=32)
            assert abs(t.overlap_fraction - OVERLAP_BY_LEVEL[level]) <= 1.0 / 32
            overlaps.append(t.overlap_fraction)
        assert overlaps == sorted(overlaps, reverse=True)

    def test_level_one_reference_closer_than_level_five(self):
        """测试 32 个样本上等级 1 的 PSNR(GT, Ref) 均值高于等级 5"""
        mean_psnr = {
            level: np.mean([psnr(t.gt, t.ref) for t in (synthesize_triplet(2024, i, level, 64) for i in range(32))])
            for level in (1, 5)
        }
        assert mean_psnr[1] > mean_psnr[5]

    def test_same_gt_across_levels(self):
        """测试同一样本序号在不同等级共享 GT"""
        a = synthesize_triplet(7, 5, 1, gt_size=32)
        b = synthesize_triplet(7, 5, 5, gt_size=32)
        assert np.array_equal(a.gt, b.gt)
        assert not np.array_equal(a.ref, b.ref)

    def test_independent_of_generation_order(self):
        """测试样本与生成顺序无关"""
        first = synthesize_triplet(11, 3, 4, gt_size=32)
        synthesize_triplet(11, 0, 1, gt_size=32)
        again = synthesize_triplet(11, 3, 4, gt_size=32)
        assert np.array_equal(first.ref, again.ref)

    def test_invalid_level(self):
        """测试非法等级"""
        with pytest.raises(DataError):
            synthesize_triplet(0, 0, 6)

    def test_gt_size_must_divide(self):
        """测试 GT 尺寸必须是倍率的整数倍"""
        with pytest.raises(DataError):
            synthesize_triplet(0, 0, 1, gt_size=30, scale=4)


class TestManifest:
    """清单测试类"""

    def test_build_every_index_at_every_level(self):
        """测试每个样本序号在每个等级各一条"""
        manifest = build_synthetic_manifest(5, count_per_level=2, gt_size=32, levels=(1, 3))
        assert [e.id for e in manifest.entries] == ["s0000_l1", "s0000_l3", "s0001_l1", "s0001_l3"]
        assert all(e.synthesized for e in manifest.entries)

    def test_filter_levels(self):
        """测试按等级过滤"""
        manifest = build_synthetic_manifest(5, count_per_level=2, gt_size=32)
        assert {e.level for e in manifest.filter_levels([2]).entries} == {2}

    def test_duplicate_ids_rejected(self):
        """测试重复 ID"""
        entry = ManifestEntry(id="a", level=1, index=0)
        with pytest.raises(ValueError):
            DatasetManifest(master_seed=0, entries=[entry, entry])

    def test_entry_needs_both_paths(self):
        """测试 gt / ref 必须同时给出"""
        with pytest.raises(ValueError):
            ManifestEntry(id="a", level=1, gt="a_gt.ppm")

    def test_write_and_load(self, tmp_path):
        """测试物化数据集后重新读取"""
        manifest = build_synthetic_manifest(9, count_per_level=1, gt_size=32, levels=(1, 5))
        written = write_dataset(manifest, tmp_path)
        assert (tmp_path / "manifest.json").is_file()
        assert (tmp_path / "images" / "s0000_l1_gt.ppm").is_file()
        assert written.entries[0].gt == "images/s0000_l1_gt.ppm"

        dataset = load_dataset(tmp_path / "manifest.json")
        assert [t.sample_id for t in dataset] == ["s0000_l1", "s0000_l5"]
        original = synthesize_triplet(9, 0, 1, gt_size=32)
        assert np.max(np.abs(dataset[0].gt - original.gt)) <= 0.5 / 255 + 1e-12

        only_five = load_dataset(tmp_path / "manifest.json", levels=[5])
        assert [t.similarity_level for t in only_five] == [5]

    def test_manifest_json_is_plain(self, tmp_path):
        """测试清单 JSON 结构"""
        write_dataset(build_synthetic_manifest(1, 1, gt_size=32, levels=(2,)), tmp_path)
        data = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
        assert data["master_seed"] == 1
        assert data["entries"][0]["level"] == 2

    def test_missing_manifest(self, tmp_path):
        """测试清单不存在"""
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "nope.json")

    def test_invalid_manifest(self, tmp_path):
        """测试清单内容非法"""
        path = tmp_path / "manifest.json"
        path.write_text('{"entries": 3}', encoding="utf-8")
        with pytest.raises(ManifestError):
            load_manifest(path)


class TestFolderManifest:
    """用户图像目录测试类"""

    def test_pairs_and_levels(self, tmp_path):
        """测试 <id>_gt / <id>_ref 配对与等级后缀"""
        rng = np.random.default_rng(0)
        for name in ("cat_l3_gt", "cat_l3_ref", "dog_gt", "dog_ref", "lonely_gt"):
            save_image(rng.integers(0, 256, size=(40, 36, 3)) / 255.0, tmp_path / f"{name}.ppm")
        manifest = load_folder_manifest(tmp_path, crop_size=32, scale=4)
        assert [(e.id, e.level) for e in manifest.entries] == [("cat_l3", 3), ("dog", 1)]

        triplet = load_triplet(manifest, manifest.entries[0], tmp_path)
        assert triplet.gt.shape == (32, 32, 3)
        assert triplet.lr.shape == (8, 8, 3)

    def test_crop_trims_to_scale_multiple(self, tmp_path):
        """测试裁剪边长修整为倍率的整数倍"""
        rng = np.random.default_rng(1)
        save_image(rng.uniform(size=(30, 30, 3)), tmp_path / "x_gt.ppm")
        save_image(rng.uniform(size=(30, 30, 3)), tmp_path / "x_ref.ppm")
        manifest = load_folder_manifest(tmp_path, crop_size=600, scale=4)
        triplet = load_triplet(manifest, manifest.entries[0], tmp_path)
        assert triplet.gt.shape == (28, 28, 3)

    def test_empty_folder(self, tmp_path):
        """测试空目录"""
        with pytest.raises(ManifestError):
            load_folder_manifest(tmp_path)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
