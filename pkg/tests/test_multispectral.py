from __future__ import annotations

import numpy as np
import pytest

from pushframe.capture_sim.model import CaptureSettings, Image, ShapeMismatchError
from pushframe.capture_sim.scanner import capture, to_complex
from pushframe.multispectral.fusion import (
    PanSharpeningStudy,
    best_pan_rows,
    capture_bands,
    effective_rate,
    ihs_sharpen,
    pan_grid,
    retain,
    sample_savings,
    savings_fraction,
    synthesize_pan,
)
from pushframe.multispectral.model import PanSweepRow
from pushframe.noiselet.transform import PairingError
from pushframe.scenes import colour_scene
from pushframe.sensing_plan.planner import SensingPlanner, build_slm, draw_rows


class TestSynthesizePan:
    def test_equal_bands_give_the_same_samples(self, rng):
        band = capture(Image(rng.uniform(size=(8, 4))), build_slm(8))
        pan = synthesize_pan(band, band, band)
        np.testing.assert_allclose(pan.cropped, band.cropped, atol=1e-12)

    def test_single_bright_band(self, rng):
        slm = build_slm(8)
        bright = rng.uniform(size=(8, 4)) / 3.0
        dark = capture(Image(np.zeros((8, 4))), slm)
        pan = synthesize_pan(capture(Image(3.0 * bright), slm), dark, dark)
        np.testing.assert_allclose(pan.cropped, capture(Image(bright), slm).cropped, atol=1e-12)

    def test_pan_commutes_with_complex_conversion(self, planner, rng):
        plan = planner.plan(16, 8, 2, seed=0)
        bands = capture_bands(Image(rng.uniform(size=(16, 4, 3))), plan.slm)
        per_band = [to_complex(samples, plan, 2) for samples in bands.bands]
        np.testing.assert_allclose(to_complex(bands.pan, plan, 2), np.mean(per_band, axis=0), atol=1e-12)

    def test_rejects_mismatched_captures(self):
        slm = build_slm(8)
        narrow = capture(Image(np.ones((8, 3))), slm)
        wide = capture(Image(np.ones((8, 4))), slm)
        with pytest.raises(ShapeMismatchError):
            synthesize_pan(narrow, wide, wide)
        backward = capture(Image(np.ones((8, 3))), slm, CaptureSettings(direction="reversed"))
        with pytest.raises(ShapeMismatchError):
            synthesize_pan(narrow, narrow, backward)

    def test_capture_bands_needs_colour(self):
        with pytest.raises(ShapeMismatchError):
            capture_bands(Image(np.ones((8, 3))), build_slm(8))


class TestRetain:
    def test_full_retention_keeps_everything(self, planner, rng):
        plan = planner.plan(8, 8, 2, seed=4)
        samples = capture(Image(rng.uniform(size=(8, 5))), plan.slm)
        kept = retain(samples, 8, plan)
        np.testing.assert_array_equal(kept.samples.cropped, samples.cropped)
        assert kept.kept_fraction == 1.0

    def test_zero_retention_keeps_only_the_ones_column(self, planner, rng):
        plan = planner.plan(8, 8, 2, seed=4)
        samples = capture(Image(rng.uniform(size=(8, 5))), plan.slm)
        cropped = retain(samples, 0, plan).samples.cropped
        assert np.all(np.isnan(cropped[:, :8]))
        np.testing.assert_array_equal(cropped[:, 8], samples.cropped[:, 8])

    def test_half_retention_follows_the_first_draw(self, planner, rng):
        plan = planner.plan(8, 8, 2, seed=4)
        samples = capture(Image(rng.uniform(size=(8, 4))), plan.slm)
        kept = retain(samples, 4, plan)
        rows = draw_rows(8, 4, 2, seed=4)
        assert [list(r) for r in kept.plan.assignments] == rows
        for column in range(4):
            present = set(np.flatnonzero(~np.isnan(kept.samples.cropped[column])).tolist())
            assert present == set(kept.plan.patterns_for_column(column))
        # Retained samples still convert for every block.
        to_complex(kept.samples, kept.plan, 0)
        to_complex(kept.samples, kept.plan, 2)

    def test_reversed_capture_keeps_acquisition_order(self, planner, rng):
        plan = planner.plan(8, 8, 4, seed=1)
        pixels = rng.uniform(size=(8, 4))
        forward = retain(capture(Image(pixels), plan.slm), 4, plan)
        backward = retain(capture(Image(pixels), plan.slm, CaptureSettings(direction="reversed")), 4, plan)
        np.testing.assert_allclose(backward.samples.scene_rows(), forward.samples.cropped, atol=1e-12)

    def test_odd_row_count_is_rejected(self, planner):
        plan = planner.plan(8, 8, 1, seed=0)
        samples = capture(Image(np.ones((8, 2))), plan.slm)
        with pytest.raises(PairingError):
            retain(samples, 3, plan)


class TestIhsSharpen:
    def test_zero_detail_leaves_bands_unchanged(self, rng):
        r, g, b = (rng.uniform(size=(4, 4)) for _ in range(3))
        pan = (r + g + b) / 3.0
        for before, after in zip((r, g, b), ihs_sharpen(pan, r, g, b)):
            np.testing.assert_allclose(after, before, atol=1e-15)

    def test_gray_world_offset(self):
        level = np.full((4, 4), 0.4)
        sharpened = ihs_sharpen(level + 0.1, level, level, level, clamp=False)
        for band in sharpened:
            np.testing.assert_allclose(band, 0.5)

    def test_band_mean_matches_pan_before_clamping(self, rng):
        r, g, b, pan = (rng.uniform(size=(6, 6)) for _ in range(4))
        sharpened = ihs_sharpen(pan, r, g, b, clamp=False)
        np.testing.assert_allclose(np.mean(sharpened, axis=0), pan, atol=1e-12)

    def test_clamping(self):
        ones = np.ones((2, 2))
        for band in ihs_sharpen(ones * 2.0, ones, ones, ones):
            np.testing.assert_array_equal(band, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            ihs_sharpen(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 3)), np.ones((2, 2)))


def test_effective_rate():
    assert effective_rate(0, 64) == 64
    assert effective_rate(96, 32) == 64
    with pytest.raises(ValueError):
        effective_rate(-2, 4)


def test_pan_grid_skips_infeasible_points():
    assert pan_grid(64, 256, (0.25, 0.5, 0.75, 1.0)) == [(64, 42), (128, 22), (192, 0)]


def test_default_pan_grid_reaches_low_pan_rates():
    assert pan_grid(64, 256) == [(32, 54), (64, 42), (96, 32), (128, 22), (192, 0)]


def test_savings_fraction_interpolates():
    assert savings_fraction([0.1, 0.2, 0.3], [0.5, 0.7, 0.9], 0.8, 0.4) == pytest.approx(0.625)
    assert savings_fraction([0.1, 0.2], [0.5, 0.6], 0.8, 0.4) is None
    assert savings_fraction([0.1, 0.2], [0.9, 0.95], 0.8, 0.4) == pytest.approx(0.25)


def test_sample_savings_uses_best_pan_rows():
    rows = [
        PanSweepRow(mbar=20, mbar_rate=0.1, route="pan", m_pan=30, m_band=10, psnr=20, ssim=0.5, best_by="both"),
        PanSweepRow(mbar=40, mbar_rate=0.2, route="pan", m_pan=60, m_band=20, psnr=24, ssim=0.7, best_by="both"),
        PanSweepRow(mbar=40, mbar_rate=0.2, route="independent", m_pan=0, m_band=40, psnr=22, ssim=0.6),
    ]
    assert len(best_pan_rows(rows)) == 2
    (entry,) = sample_savings(rows, "ssim")
    assert entry.fraction == pytest.approx(0.75)
    assert entry.matching_rate == pytest.approx(0.15)


def test_curve_points_below_the_reference_locate_the_crossing():
    rows = [
        PanSweepRow(
            mbar=20, mbar_rate=0.1, route="pan", m_pan=30, m_band=10, psnr=30, ssim=0.85, best_by="both", requested=False
        ),
        PanSweepRow(mbar=40, mbar_rate=0.2, route="pan", m_pan=60, m_band=20, psnr=33, ssim=0.9, best_by="both"),
        PanSweepRow(mbar=40, mbar_rate=0.2, route="independent", m_pan=0, m_band=40, psnr=31, ssim=0.87),
    ]
    (ssim_entry,) = sample_savings(rows, "ssim")
    (psnr_entry,) = sample_savings(rows, "psnr")
    assert ssim_entry.fraction == pytest.approx(0.7)
    assert psnr_entry.fraction == pytest.approx(0.6667, abs=1e-4)
    assert sample_savings(rows[1:], "ssim")[0].fraction == pytest.approx(1.0)


class TestPanSharpeningStudy:
    def test_equal_bands_reduce_to_mono_route(self, planner, quick_recon):
        grey = colour_scene(16, 8).pixels.mean(axis=-1)
        scene = Image(np.stack([grey] * 3, axis=-1))
        plan = planner.plan(16, 16, 4, seed=2)
        study = PanSharpeningStudy(capture_bands(scene, plan.slm), plan, quick_recon)
        sharpened = study.pan_route(8, 4)
        mono = study.pan_image(8)
        for band in sharpened.split():
            np.testing.assert_allclose(band.pixels, mono, atol=1e-9)

    def test_full_rate_routes_are_exact(self, planner):
        scene = colour_scene(16, 8)
        plan = planner.plan(16, 16, 4, seed=0)
        study = PanSharpeningStudy(capture_bands(scene, plan.slm), plan)
        np.testing.assert_allclose(study.independent_route(16).pixels, scene.pixels, atol=1e-9)
        np.testing.assert_allclose(study.pan_route(16, 16).pixels, scene.pixels, atol=1e-9)

    def test_sweep_marks_one_best_row(self, planner, quick_recon):
        scene = colour_scene(16, 16)
        plan = planner.plan(16, 16, 4, seed=0)
        study = PanSharpeningStudy(capture_bands(scene, plan.slm), plan, quick_recon, grid=(0.5, 1.0))
        rows = study.sweep(scene, [0.5])
        pan_rows = [row for row in rows if row.route == "pan" and row.requested]
        assert [(row.m_pan, row.m_band) for row in pan_rows] == [(8, 6), (16, 2)]
        assert sum(row.best_by == "both" for row in pan_rows) + sum(row.best_by == "ssim" for row in pan_rows) == 1
        assert rows[-1].route == "independent" and rows[-1].m_band == 8

    def test_sweep_traces_the_pan_curve_below_each_rate(self, planner, quick_recon):
        scene = colour_scene(16, 16)
        plan = planner.plan(16, 16, 4, seed=0)
        study = PanSharpeningStudy(capture_bands(scene, plan.slm), plan, quick_recon, grid=(0.5, 1.0), curve=(0.5, 0.8))
        rows = study.sweep(scene, [0.5])
        traced = [row for row in rows if row.route == "pan" and not row.requested]
        assert traced and all(row.mbar < 8 for row in traced)
        assert sum(row.route == "independent" for row in rows) == 1
        assert len(best_pan_rows(rows)) == 3

    def test_curve_fractions_must_lie_below_one(self, planner):
        plan = planner.plan(16, 16, 4, seed=0)
        bands = capture_bands(colour_scene(16, 8), plan.slm)
        with pytest.raises(ValueError):
            PanSharpeningStudy(bands, plan, curve=(0.5, 1.0))


@pytest.mark.slow
class TestPanSharpeningBenefit:
    """Desk-scale comparison on a 256 x 256 colour scene."""

    @pytest.fixture(scope="class")
    def sweep(self):
        scene = colour_scene(256, 256)
        plan = SensingPlanner().plan(256, 256, 16, seed=0)
        study = PanSharpeningStudy(capture_bands(scene, plan.slm), plan, workers=4)
        return study.sweep(scene, [0.15, 0.25, 0.4])

    def test_pan_route_matches_or_beats_independent_bands(self, sweep):
        independent = [row for row in sweep if row.route == "independent"]
        best = [row for row in best_pan_rows(sweep, "ssim") if row.requested]
        assert len(best) == len(independent) == 3
        for pan_row, band_row in zip(best, independent):
            assert pan_row.ssim >= band_row.ssim

    def test_pan_route_needs_fewer_samples(self, sweep):
        savings = sample_savings(sweep, "ssim")
        assert len(savings) == 3
        assert all(entry.fraction is not None and entry.fraction < 0.85 for entry in savings)
