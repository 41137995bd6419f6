from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from pushframe.capture_sim.model import FlatField
from pushframe.capture_sim.netpbm import load_samples, read_image
from pushframe.orchestrator import THREADS_ENV, PushframeConfig, PushframeOrchestrator
from pushframe.recon.model import ReconConfig
from pushframe.sensing_plan.model import SensingPlan


@pytest.fixture
def config(tmp_path) -> PushframeConfig:
    return PushframeConfig(
        output_root=tmp_path / "runs",
        n=16,
        rate=1.0,
        block_width=4,
        recon=ReconConfig(mu_schedule=(0.1, 0.01), max_iters_per_stage=40),
        sweep_rates=(0.5,),
        sweep_block_widths=(1, 4),
        pan_mbar_rates=(0.5,),
        pan_grid=(0.5, 1.0),
    )


@pytest.fixture
def orchestrator(config) -> PushframeOrchestrator:
    return PushframeOrchestrator.default(config)


class TestConfig:
    def test_from_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"n": 64, "rate": 0.25, "capture": {"direction": "reversed"}}), encoding="utf-8")
        config = PushframeConfig.from_file(path)
        assert config.n == 64 and config.rate == 0.25
        assert config.capture.direction.value == "reversed"

    def test_from_yaml(self, tmp_path):
        pytest.importorskip("yaml")
        path = tmp_path / "config.yaml"
        path.write_text("n: 32\nrecon:\n  max_iters_per_stage: 50\n", encoding="utf-8")
        config = PushframeConfig.from_file(path)
        assert config.n == 32 and config.recon.max_iters_per_stage == 50

    def test_thread_override(self, monkeypatch):
        config = PushframeConfig(workers=2)
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert config.effective_workers() == 2
        monkeypatch.setenv(THREADS_ENV, "6")
        assert config.effective_workers() == 6
        monkeypatch.setenv(THREADS_ENV, "many")
        assert config.effective_workers() == 2

    def test_digest_tracks_content(self):
        assert PushframeConfig().digest() == PushframeConfig().digest()
        assert PushframeConfig(seed=1).digest() != PushframeConfig().digest()


def test_make_plan_writes_plan_mask_and_manifest(orchestrator, tmp_path):
    plan = orchestrator.make_plan(tmp_path / "plan", m=8, block_width=2, seed=5)
    assert SensingPlan.load(tmp_path / "plan" / "plan.json") == plan
    assert read_image(tmp_path / "plan" / "slm.pgm").pixels.shape == (16, 17)
    manifest = json.loads((tmp_path / "plan" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "plan"
    assert manifest["plan"]["slm_hash"] == plan.slm_hash


def test_write_pattern_returns_digest(orchestrator, tmp_path):
    digest = orchestrator.write_pattern(tmp_path / "mask" / "slm.pgm", n=8)
    assert len(digest) == 64
    assert read_image(tmp_path / "mask" / "slm.pgm").pixels.shape == (8, 9)


class TestCapture:
    def test_capture_writes_samples(self, orchestrator, tmp_path):
        samples = orchestrator.capture_scene("natural", tmp_path / "cap", width=6)
        loaded = load_samples(tmp_path / "cap" / "samples.npz")
        np.testing.assert_array_equal(loaded.cropped, samples.cropped)
        assert samples.cropped.shape == (6, 17)
        assert (tmp_path / "cap" / "samples_raw.csv").exists()

    def test_zero_scene_gives_zero_samples(self, orchestrator, tmp_path):
        samples = orchestrator.capture_scene("zero", tmp_path / "cap", width=4)
        np.testing.assert_array_equal(samples.cropped, 0.0)

    def test_white_capture_writes_gains(self, orchestrator, tmp_path):
        orchestrator.capture_scene("white", tmp_path / "cap", width=4, white=True)
        gains = FlatField.load(tmp_path / "cap" / "flatfield.json")
        np.testing.assert_allclose(gains.as_array(), 1.0, atol=1e-12)

    def test_colour_scene_is_rejected(self, orchestrator, tmp_path):
        with pytest.raises(ValueError):
            orchestrator.capture_scene("colour", tmp_path / "cap", width=4)


def test_reconstruct_full_rate(orchestrator, tmp_path):
    orchestrator.capture_scene("natural", tmp_path / "cap", width=16)
    result = orchestrator.reconstruct(tmp_path / "cap" / "samples.npz", tmp_path / "rec", truth="natural")
    assert result.report.converged
    assert result.quality is not None and result.quality.psnr_db > 40.0
    assert read_image(result.image_path).pixels.shape == (16, 16)
    assert json.loads(result.report_path.read_text(encoding="utf-8"))["converged"] is True


def test_reconstruct_at_lower_rate(orchestrator, tmp_path):
    orchestrator.capture_scene("natural", tmp_path / "cap", width=8, direction="reversed")
    result = orchestrator.reconstruct(tmp_path / "cap" / "samples.npz", tmp_path / "rec", rate=0.5)
    assert result.report.shape == (16, 8)
    assert len(result.report.blocks) == 2


def test_sweep_rows(orchestrator, tmp_path):
    out = tmp_path / "sweep" / "sweep.csv"
    rows = orchestrator.sweep("natural", out)
    methods = {row.method for row in rows}
    assert methods == {"single", "naive", "pooled", "whole_frame"}
    assert len(rows) == 8
    single = [row for row in rows if row.method == "single"]
    assert single[0].ssim == single[1].ssim
    with out.open(encoding="utf-8") as handle:
        assert len(list(csv.DictReader(handle))) == 8


def test_sweep_rejects_unknown_method(orchestrator, tmp_path):
    with pytest.raises(ValueError):
        orchestrator.sweep("natural", tmp_path / "sweep.csv", methods=["magic"])


def test_pan_study(orchestrator, tmp_path):
    result = orchestrator.pan("colour", tmp_path / "pan" / "pan.csv")
    assert {row.route for row in result.rows} == {"pan", "independent"}
    assert result.savings_path.name == "pan_savings.csv"
    assert result.savings_path.exists()
    assert {entry.metric for entry in result.savings} == {"ssim", "psnr"}
    assert any(row.route == "pan" and not row.requested for row in result.rows)
