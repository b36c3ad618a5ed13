import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnseg.colorcore import ColorSpace, PlanarImage, atd_to_rgb_array, rgb_to_atd_array, visual_stats
from dnseg.csvio import read_csv
from dnseg.envmod import (
    FOG_PRESETS,
    FogSpec,
    ModFactors,
    apply_fog,
    build_mod_grid,
    grid_center,
    grid_factors,
    iter_grid,
    modify_atd,
    modify_lum_contrast,
    transmission,
)
from dnseg.errors import DegenerateImage, DepthRequired, InvalidSpec


def rgb(arr):
    return PlanarImage(np.asarray(arr, dtype=float), ColorSpace.LINEAR_RGB)


def random_image(seed, h=12, w=12, lo=0.3, hi=0.6):
    return rgb(np.random.default_rng(seed).uniform(lo, hi, (h, w, 3)))


def stats_tuple(img):
    s = visual_stats(img)
    return np.array([s.mean_lum, s.achro_ctr, s.chro_ctr])


class TestFog:
    def test_presets(self):
        assert FOG_PRESETS == {"low": 0.005, "middle": 0.1, "high": 0.2}
        assert FogSpec.preset("high").attenuation == 0.2

    def test_vanishing_attenuation_is_identity(self):
        img = random_image(0)
        out = apply_fog(img, FogSpec(1e-12, constant_depth=100.0))
        np.testing.assert_allclose(out.data, img.data, atol=1e-9)

    def test_infinite_depth_gives_airlight(self):
        out = apply_fog(random_image(1), FogSpec(0.1, airlight=0.7, constant_depth=1e6))
        np.testing.assert_allclose(out.data, 0.7, atol=1e-12)

    def test_transmission_value(self):
        assert transmission(0.005, 600.0) == pytest.approx(math.exp(-3.0))
        assert transmission(0.005, 600.0) == pytest.approx(0.0498, abs=1e-4)

    def test_per_pixel_blend(self):
        img = random_image(2, 3, 4)
        depth = np.random.default_rng(2).uniform(1, 50, (3, 4))
        out = apply_fog(img, FogSpec(0.05, airlight=0.8), depth)
        t = np.exp(-0.05 * depth)[..., None]
        np.testing.assert_allclose(out.data, img.data * t + 0.8 * (1 - t), rtol=1e-13)

    def test_depth_required(self):
        with pytest.raises(DepthRequired):
            apply_fog(random_image(0), FogSpec(0.1))
        with pytest.raises(DepthRequired):
            apply_fog(random_image(0, 4, 4), FogSpec(0.1), np.zeros((4, 4)))
        with pytest.raises(DepthRequired):
            apply_fog(random_image(0, 4, 4), FogSpec(0.1), np.ones((3, 4)))

    @pytest.mark.parametrize("beta", [0.0, -0.1, float("nan")])
    def test_bad_attenuation(self, beta):
        with pytest.raises(InvalidSpec):
            FogSpec(beta)

    def test_bad_airlight(self):
        with pytest.raises(InvalidSpec):
            FogSpec(0.1, airlight=0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.floats(1.0, 200.0))
    def test_monotone_in_attenuation(self, seed, d):
        img = random_image(seed, 6, 6, 0.05, 0.75)
        lum = []
        ctr = []
        for beta in (0.001, 0.005, 0.02, 0.1, 0.2):
            out = apply_fog(img, FogSpec(beta, constant_depth=d))
            lum.append(rgb_to_atd_array(out.data)[..., 0])
            ctr.append(visual_stats(out).achro_ctr)
        lum = np.stack(lum)
        assert np.all(np.diff(lum, axis=0) >= -1e-12)
        assert np.all(np.diff(ctr) <= 1e-12)


class TestLumContrast:
    def test_identity_bit_exact(self):
        img = random_image(3)
        out = modify_lum_contrast(img, ModFactors(1.0, 1.0, 1.0))
        np.testing.assert_array_equal(out.data, img.data)

    @pytest.mark.parametrize(
        "f, axis",
        [((0.6, 1, 1), 0), ((1, 1.4, 1), 1), ((1, 1, 0.7), 2), ((1.3, 1, 1), 0), ((1, 0.5, 1), 1), ((1, 1, 1.4), 2)],
    )
    def test_single_axis(self, f, axis):
        img = random_image(4)
        before = stats_tuple(img)
        raw = modify_lum_contrast(img, ModFactors(*f), clip=False)
        ratio = stats_tuple(raw) / before
        expected = np.ones(3)
        expected[axis] = f[axis]
        np.testing.assert_allclose(ratio, expected, atol=1e-6)

    def test_in_gamut_case_needs_no_clip(self):
        img = random_image(5, lo=0.3, hi=0.5)
        a = modify_lum_contrast(img, ModFactors(1, 1.4, 1), clip=False)
        assert a.data.min() >= 0 and a.data.max() <= 1
        b = modify_lum_contrast(img, ModFactors(1, 1.4, 1))
        np.testing.assert_array_equal(a.data, b.data)
        assert visual_stats(b).achro_ctr / visual_stats(img).achro_ctr == pytest.approx(1.4, abs=1e-6)

    def test_output_clipped(self):
        out = modify_lum_contrast(random_image(6, lo=0.0, hi=1.0), ModFactors(1.4, 1.4, 1.4))
        assert out.data.min() >= 0 and out.data.max() <= 1

    def test_range_enforced(self):
        with pytest.raises(InvalidSpec):
            ModFactors(0.4, 1, 1)
        with pytest.raises(InvalidSpec):
            ModFactors(1, 1.5, 1)
        assert ModFactors(2.0, 1, 1, allow_out_of_range=True).f_lum == 2.0
        with pytest.raises(InvalidSpec):
            ModFactors(0.0, 1, 1, allow_out_of_range=True)

    def test_degenerate(self):
        with pytest.raises(DegenerateImage):
            modify_lum_contrast(rgb(np.zeros((3, 3, 3))), ModFactors(0.8, 1, 1))

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(0, 2**31 - 1),
        st.floats(0.5, 1.0),
        st.floats(0.5, 1.0),
        st.floats(0.5, 1.0),
    )
    def test_axes_commute(self, seed, fl, fa, fc):
        atd = rgb_to_atd_array(random_image(seed, 5, 7).data)

        def lum(x):
            return x * fl

        def actr(x):
            x = x.copy()
            m = x[..., 0].mean()
            x[..., 0] = m + fa * (x[..., 0] - m)
            return x

        def cctr(x):
            x = x.copy()
            m = x[..., 1:].reshape(-1, 2).mean(0)
            x[..., 1:] = m + fc * (x[..., 1:] - m)
            return x

        ref = modify_atd(atd, ModFactors(fl, fa, fc))
        for order in itertools.permutations((lum, actr, cctr)):
            x = atd
            for op in order:
                x = op(x)
            np.testing.assert_allclose(x, ref, atol=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.sampled_from([0, 1, 2]), st.floats(0.5, 1.4))
    def test_axis_independence(self, seed, axis, f):
        img = random_image(seed, 6, 6)
        fs = [1.0, 1.0, 1.0]
        fs[axis] = f
        before = stats_tuple(img)
        after = stats_tuple(modify_lum_contrast(img, ModFactors(*fs), clip=False))
        expected = before.copy()
        expected[axis] *= f
        np.testing.assert_allclose(after, expected, atol=1e-6)


class TestGrid:
    def test_ten_steps(self):
        f = grid_factors(10)
        np.testing.assert_allclose(f, [0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4], atol=1e-12)
        assert sum(1 for _ in iter_grid(10)) == 1000
        assert grid_center(10) == 1.0

    def test_two_steps(self):
        assert grid_factors(2).tolist() == [0.5, 1.4]
        assert sum(1 for _ in iter_grid(2)) == 8

    def test_steps_checked(self):
        with pytest.raises(InvalidSpec):
            grid_factors(1)

    def test_build(self, tmp_path):
        imgs = [("a", random_image(0, 8, 8)), ("b", random_image(1, 8, 8))]
        m = build_mod_grid(imgs, 2, tmp_path)
        rows = read_csv(tmp_path / "manifest.csv")
        assert len(rows) == len(m.rows) == 16
        assert list(rows[0]) == ["image_id", "f_lum", "f_actr", "f_cctr", "out_path", "clipped_fraction"]
        assert all((tmp_path / r["out_path"]).exists() for r in rows)
        assert sum(m.is_center(r) for r in m.rows) == 2
        with pytest.raises(FileExistsError):
            build_mod_grid(imgs, 2, tmp_path)
        build_mod_grid(imgs, 2, tmp_path, force=True)

    def test_build_ten_steps_row_count(self, tmp_path):
        m = build_mod_grid([("only", random_image(2, 8, 8))], 10, tmp_path)
        assert len(m.rows) == 1000
        centre = [r for r in m.rows if m.is_center(r)]
        assert len(centre) == 1 and (centre[0].f_lum, centre[0].f_actr, centre[0].f_cctr) == (1.0, 1.0, 1.0)
