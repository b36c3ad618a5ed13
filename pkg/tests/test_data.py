import logging

import numpy as np
import pytest

from dnseg.data import CLASS_NAMES, DatasetHandle, SceneSpec, generate_scenes, ingest, load_layout, render_scene, split, split_sizes
from dnseg.errors import ConfigError, EmptyDataset, EmptyRequest, InvalidInput, SplitError
from dnseg.imio import load_image, save_image, save_mask
from dnseg.colorcore import ColorSpace, PlanarImage


LAYOUT = {"images_dir": "images", "masks_dir": "masks"}


class TestScenes:
    def test_byte_identical_rerun(self, tmp_path):
        spec = SceneSpec(resolution=(32, 32), seed=4)
        generate_scenes(spec, 1, tmp_path / "a")
        generate_scenes(spec, 1, tmp_path / "b")
        for sub in ("images", "masks", "depth"):
            name = f"{sub}/scene_00000.png"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a/dataset.csv").read_bytes() == (tmp_path / "b/dataset.csv").read_bytes()

    def test_every_class_in_thousand(self):
        spec = SceneSpec(resolution=(32, 32))
        seen = np.zeros(5, dtype=int)
        for i in range(1000):
            _, mask, _ = render_scene(spec, i)
            seen += np.bincount(mask.ravel(), minlength=5) > 0
        assert np.all(seen >= 1)

    def test_labels_depth_range(self):
        spec = SceneSpec(resolution=(24, 40))
        for i in range(30):
            img, mask, depth = render_scene(spec, i)
            assert mask.shape == (24, 40) and mask.min() >= 0 and mask.max() < 5
            assert np.all(depth > 0)
            assert img.data.min() >= 0 and img.data.max() <= 1

    def test_scenes_differ(self):
        spec = SceneSpec(resolution=(16, 16))
        a, b = render_scene(spec, 0)[0], render_scene(spec, 1)[0]
        assert not np.array_equal(a.data, b.data)
        c = render_scene(SceneSpec(resolution=(16, 16), seed=1), 0)[0]
        assert not np.array_equal(a.data, c.data)

    def test_handle_round_trip(self, tmp_path):
        handle, freq = generate_scenes(SceneSpec(resolution=(16, 16)), 3, tmp_path)
        assert freq["classes"] == list(CLASS_NAMES) and sum(freq["pixel_counts"]) == 3 * 256
        back = DatasetHandle.from_manifest(tmp_path)
        assert back.entries == handle.entries and back.class_count == 5
        img, mask, depth = back.load(0)
        ref_img, ref_mask, ref_depth = render_scene(SceneSpec(resolution=(16, 16)), 0)
        np.testing.assert_array_equal(mask, ref_mask)
        # half an 8-bit sRGB step is at most ~0.0045 in linear light
        np.testing.assert_allclose(img.data, ref_img.data, atol=5e-3)
        np.testing.assert_allclose(depth, ref_depth, atol=5e-3)

    def test_errors(self, tmp_path):
        with pytest.raises(EmptyRequest):
            generate_scenes(SceneSpec(), 0, tmp_path)
        with pytest.raises(InvalidInput):
            SceneSpec(class_count=4)


def make_pairs(root, n, size=(8, 8)):
    (root / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    for i in range(n):
        img = PlanarImage(rng.uniform(0, 1, (*size, 3)), ColorSpace.LINEAR_RGB)
        save_image(root / "images" / f"p{i:02d}.png", img)
        save_mask(root / "masks" / f"p{i:02d}.png", rng.integers(0, 3, size))


class TestIngest:
    def test_well_formed(self, tmp_path):
        make_pairs(tmp_path, 10)
        h = ingest(tmp_path, LAYOUT, class_count=5)
        assert len(h) == 10 and h.excluded == []

    def test_orphan(self, tmp_path, caplog):
        make_pairs(tmp_path, 10)
        (tmp_path / "masks/p03.png").unlink()
        with caplog.at_level(logging.WARNING):
            h = ingest(tmp_path, LAYOUT)
        assert len(h) == 9
        assert h.excluded == [("images/p03.png", "missing mask")]
        assert "p03" in caplog.text

    def test_label_out_of_range(self, tmp_path):
        make_pairs(tmp_path, 3)
        save_mask(tmp_path / "masks/p01.png", np.full((8, 8), 7))
        h = ingest(tmp_path, LAYOUT, class_count=5)
        assert len(h) == 2
        assert "7 >= class count 5" in h.excluded[0][1]

    def test_size_mismatch(self, tmp_path):
        make_pairs(tmp_path, 3)
        save_mask(tmp_path / "masks/p02.png", np.zeros((8, 9), int))
        h = ingest(tmp_path, LAYOUT)
        assert len(h) == 2 and "size mismatch" in h.excluded[0][1]

    def test_empty(self, tmp_path):
        (tmp_path / "images").mkdir()
        with pytest.raises(EmptyDataset):
            ingest(tmp_path, LAYOUT)
        with pytest.raises(EmptyDataset):
            ingest(tmp_path / "nope", LAYOUT)

    def test_layout_yaml(self, tmp_path):
        p = tmp_path / "layout.yaml"
        p.write_text("images_dir: im\nmasks_dir: ma\ndepth_scale: 0.01\n")
        lay = load_layout(p)
        assert lay["depth_scale"] == 0.01 and lay["depth_dir"] is None
        p.write_text("images_dir: im\nmasks_dir: ma\ncolour: red\n")
        with pytest.raises(ConfigError):
            load_layout(p)
        with pytest.raises(ConfigError):
            load_layout({"images_dir": "im"})

    def test_sixteen_bit_image(self, tmp_path):
        img = PlanarImage(np.random.default_rng(1).uniform(0, 1, (4, 5, 3)), ColorSpace.LINEAR_RGB)
        save_image(tmp_path / "x.png", img, bits=16)
        np.testing.assert_allclose(load_image(tmp_path / "x.png").data, img.data, atol=1e-4)


class TestSplit:
    def test_paper_sizes(self):
        assert split_sizes(20000, (0.8, 0.1, 0.1)) == (16000, 2000, 2000)

    def test_ten(self):
        assert split_sizes(10, (0.8, 0.1, 0.1)) == (8, 1, 1)

    def test_too_small(self):
        with pytest.raises(SplitError):
            split_sizes(3, (0.8, 0.1, 0.1))
        with pytest.raises(SplitError):
            split_sizes(10, (0.8, 0.1, 0.2))

    def test_membership(self, tmp_path):
        make_pairs(tmp_path, 20)
        h = ingest(tmp_path, LAYOUT)
        a = split(h, seed=3)
        b = split(h, seed=3)
        assert [x.entries for x in a] == [x.entries for x in b]
        assert [len(x) for x in a] == [16, 2, 2]
        assert [x.split for x in a] == ["train", "val", "test"]
        names = [e.image for x in a for e in x.entries]
        assert sorted(names) == sorted(e.image for e in h.entries)
        c = split(h, seed=4)
        assert [x.entries for x in c] != [x.entries for x in a]
