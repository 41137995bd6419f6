from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from dotenv import find_dotenv, load_dotenv
from pydantic import BaseModel, Field

from pushframe.capture_sim.model import CaptureSettings, Direction, FlatField, Image, SampleMatrix
from pushframe.capture_sim.netpbm import (
    load_samples,
    read_image,
    save_samples,
    write_image,
    write_mask,
    write_samples_csv,
)
from pushframe.capture_sim.scanner import capture, flatfield, measure_whole_frame
from pushframe.metrics.model import QualityReport
from pushframe.metrics.quality import assess
from pushframe.multispectral.fusion import CURVE_FRACTIONS, PAN_GRID, PanSharpeningStudy, capture_bands, retain, sample_savings
from pushframe.multispectral.model import PanSweepRow, SampleSavings
from pushframe.noiselet.transform import order_exponent
from pushframe.recon.assembler import reconstruct_image, reconstruct_whole_frame
from pushframe.recon.model import ReconConfig, ReconReport
from pushframe.recon.solver import constraint_noise
from pushframe.scenes import scene_for
from pushframe.sensing_plan.model import Ordering, SensingPlan
from pushframe.sensing_plan.planner import SensingPlanner, build_slm, draw_rows, even_rows, slm_digest

_dotenv_path = find_dotenv(usecwd=True)
if _dotenv_path:
    load_dotenv(_dotenv_path, override=False)

logger = logging.getLogger(__name__)

THREADS_ENV = "PUSHFRAME_THREADS"
SWEEP_METHODS = ("single", "naive", "pooled", "whole_frame")


class PushframeConfig(BaseModel):
    output_root: Path = Path("data/runs")
    seed: int = Field(default=0, ge=0)
    scene_seed: int = Field(default=7, ge=0)
    n: int = Field(default=256, ge=2)
    rate: float = Field(default=0.4, ge=0.0, le=1.0)
    block_width: int = Field(default=16, ge=1)
    ordering: Ordering = Ordering.MIRRORED
    naive: bool = False
    capture: CaptureSettings = Field(default_factory=CaptureSettings)
    recon: ReconConfig = Field(default_factory=ReconConfig)
    workers: int = Field(default=1, ge=1)
    sweep_rates: Tuple[float, ...] = (0.2, 0.4, 0.6)
    sweep_block_widths: Tuple[int, ...] = (1, 4, 16, 64)
    sweep_methods: Tuple[str, ...] = SWEEP_METHODS
    pan_mbar_rates: Tuple[float, ...] = (0.15, 0.25, 0.4)
    pan_grid: Tuple[float, ...] = PAN_GRID
    pan_curve: Tuple[float, ...] = CURVE_FRACTIONS

    @classmethod
    def from_file(cls, path: Path) -> "PushframeConfig":
        text = path.read_text(encoding="utf-8")
        try:
            payload = json.loads(text)
        except json.JSONDecodeError:
            import yaml  # type: ignore[import-not-found]

            payload = yaml.safe_load(text)
        return cls.model_validate(payload or {})

    def effective_workers(self) -> int:
        override = os.getenv(THREADS_ENV)
        if override:
            try:
                return max(1, int(override))
            except ValueError:
                logger.warning("⚠️  Ignoring non-integer %s=%r", THREADS_ENV, override)
        return self.workers

    def digest(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RunManifest(BaseModel):
    command: str
    config_digest: str
    seed: int
    plan: Optional[Dict[str, Any]] = None
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    parameters: Dict[str, Any] = Field(default_factory=dict)
    wall_time_sec: float = 0.0
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def save(self, run_dir: Path) -> Path:
        run_dir.mkdir(parents=True, exist_ok=True)
        path = run_dir / "manifest.json"
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        return path


class ReconstructionResult(BaseModel):
    image_path: Path
    report_path: Path
    report: ReconReport
    quality: Optional[QualityReport] = None


class SweepRow(BaseModel):
    rate: float
    m: int
    b: int
    method: str
    psnr: float
    ssim: float
    converged: bool


class PanResult(BaseModel):
    rows: list[PanSweepRow]
    savings: list[SampleSavings]
    csv_path: Path
    savings_path: Path


def _plan_reference(plan: SensingPlan, path: Path | None = None) -> Dict[str, Any]:
    reference: Dict[str, Any] = {
        "n": plan.n,
        "m": plan.m,
        "b": plan.b,
        "seed": plan.seed,
        "ordering": plan.ordering.value,
        "naive": plan.naive,
        "slm_hash": plan.slm_hash,
    }
    if path is not None:
        reference["path"] = str(path)
    return reference


def _write_rows(path: Path, rows: Sequence[BaseModel]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [row.model_dump(mode="json") for row in rows]
    fields = list(payload[0].keys()) if payload else []
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        writer.writerows(payload)
    return path


@dataclass
class PushframeOrchestrator:
    config: PushframeConfig
    planner: SensingPlanner

    @classmethod
    def from_file(cls, path: Path) -> "PushframeOrchestrator":
        return cls.default(PushframeConfig.from_file(path))

    @classmethod
    def default(cls, config: PushframeConfig | None = None) -> "PushframeOrchestrator":
        return cls(config=config or PushframeConfig(), planner=SensingPlanner())

    # Inputs -------------------------------------------------------------------

    def load_scene(self, source: str | Path, height: int | None = None, width: int | None = None) -> Image:
        """Read an image file, or build a synthetic scene by name (natural, colour, white, zero)."""
        path = Path(source)
        if path.exists():
            return read_image(path)
        height = height or self.config.n
        return scene_for(str(source), height, width or height, self.config.scene_seed)

    def load_plan(self, path: Path | None) -> SensingPlan:
        if path is not None:
            return SensingPlan.load(path)
        cfg = self.config
        return self.planner.plan_for_rate(cfg.n, cfg.rate, cfg.block_width, cfg.seed, cfg.ordering, cfg.naive)

    def _prepare_run_environment(self, output_dir: Path) -> Path:
        output_dir.mkdir(parents=True, exist_ok=True)
        return output_dir

    def _manifest(self, command: str, started: float, **fields: Any) -> RunManifest:
        return RunManifest(
            command=command,
            config_digest=self.config.digest(),
            seed=self.config.seed,
            wall_time_sec=time.perf_counter() - started,
            **fields,
        )

    # Workflows ----------------------------------------------------------------

    def make_plan(
        self,
        output_dir: Path,
        n: int | None = None,
        m: int | None = None,
        rate: float | None = None,
        block_width: int | None = None,
        ordering: Ordering | str | None = None,
        naive: bool | None = None,
        seed: int | None = None,
    ) -> SensingPlan:
        started = time.perf_counter()
        cfg = self.config
        n = n or cfg.n
        m = m if m is not None else even_rows(cfg.rate if rate is None else rate, n)
        plan = self.planner.plan(
            n,
            m,
            block_width or cfg.block_width,
            cfg.seed if seed is None else seed,
            ordering=ordering or cfg.ordering,
            naive=cfg.naive if naive is None else naive,
        )
        run_dir = self._prepare_run_environment(output_dir)
        plan_path = plan.save(run_dir / "plan.json")
        mask_path = write_mask(run_dir / "slm.pgm", plan.slm)
        logger.info("🗺️  Wrote sensing plan (n=%d, m=%d, b=%d) to %s", plan.n, plan.m, plan.b, plan_path)
        self._manifest(
            "plan",
            started,
            plan=_plan_reference(plan, plan_path),
            outputs={"plan": str(plan_path), "slm": str(mask_path)},
        ).save(run_dir)
        return plan

    def write_pattern(self, output: Path, n: int | None = None, ordering: Ordering | str | None = None) -> str:
        started = time.perf_counter()
        n = n or self.config.n
        ordering = Ordering(ordering or self.config.ordering)
        slm = build_slm(n, ordering)
        write_mask(output, slm)
        digest = slm_digest(slm)
        logger.info("🎭  Wrote %dx%d %s mask to %s (sha256 %s...)", slm.shape[0], slm.shape[1], ordering.value, output, digest[:12])
        self._manifest(
            "pattern",
            started,
            outputs={"slm": str(output)},
            parameters={"n": n, "ordering": ordering.value, "slm_hash": digest},
        ).save(output.parent)
        return digest

    def capture_scene(
        self,
        scene_source: str | Path,
        output_dir: Path,
        plan_path: Path | None = None,
        direction: Direction | str | None = None,
        noise_sigma: float | None = None,
        width: int | None = None,
        white: bool = False,
        flatfield_path: Path | None = None,
    ) -> SampleMatrix:
        """Scan a mono scene with the full mask and write the sample matrix.

        With ``white`` the scene is replaced by a uniform white field and the
        derived flat-field gains are written next to the samples.
        """
        started = time.perf_counter()
        plan = self.load_plan(plan_path)
        overrides: dict[str, Any] = {}
        if direction is not None:
            overrides["direction"] = Direction(direction)
        if noise_sigma is not None:
            overrides["noise_sigma"] = float(noise_sigma)
        settings = CaptureSettings.model_validate({**self.config.capture.model_dump(), **overrides})
        if white:
            scene = scene_for("white", plan.n, width or plan.n, self.config.scene_seed)
        else:
            scene = self.load_scene(scene_source, plan.n, width)
        if scene.bands != 1:
            raise ValueError("capture takes a mono scene; use the pan command for colour scenes")
        if scene.height != plan.n:
            raise ValueError(f"Scene height {scene.height} does not match the plan column height {plan.n}")

        flat = FlatField.load(flatfield_path) if flatfield_path else None
        run_dir = self._prepare_run_environment(output_dir)
        logger.info("📸  Scanning %dx%d scene (%s, sigma=%.3g)", scene.height, scene.width, settings.direction.value, settings.noise_sigma)
        samples = capture(scene, plan.slm, settings, flat=flat)

        outputs = {
            "samples": str(save_samples(run_dir / "samples.npz", samples)),
            "cropped_csv": str(write_samples_csv(run_dir / "samples.csv", samples.cropped)),
            "raw_csv": str(write_samples_csv(run_dir / "samples_raw.csv", samples.raw)),
        }
        if white:
            gains = flatfield(samples, plan.slm)
            outputs["flatfield"] = str(gains.save(run_dir / "flatfield.json"))
            logger.info("⚪  Flat-field gains written to %s", outputs["flatfield"])
        inputs = {"scene": str(scene_source)}
        if flatfield_path:
            inputs["flatfield"] = str(flatfield_path)
        self._manifest(
            "capture",
            started,
            plan=_plan_reference(plan, plan_path),
            inputs=inputs,
            outputs=outputs,
            parameters=settings.model_dump(mode="json"),
        ).save(run_dir)
        return samples

    def reconstruct(
        self,
        samples_path: Path,
        output_dir: Path,
        plan_path: Path | None = None,
        rate: float | None = None,
        block_width: int | None = None,
        report_path: Path | None = None,
        truth: str | Path | None = None,
    ) -> ReconstructionResult:
        started = time.perf_counter()
        samples = load_samples(samples_path)
        plan = self.load_plan(plan_path)
        m = plan.m if rate is None else even_rows(rate, plan.n)
        base = self.planner.with_rows(plan, plan.m, block_width) if block_width else plan
        retained = retain(samples, m, base)
        cfg = self._recon_config(retained.plan)

        run_dir = self._prepare_run_environment(output_dir)
        image, report = reconstruct_image(retained.samples, retained.plan, cfg, workers=self.config.effective_workers())
        image_path = write_image(run_dir / "reconstruction.pgm", image)
        report_path = report.save(report_path or run_dir / "report.json")

        quality: QualityReport | None = None
        inputs = {"samples": str(samples_path)}
        if truth is not None:
            reference = self.load_scene(truth, plan.n, samples.width)
            quality = assess(image, reference)
            inputs["truth"] = str(truth)
            logger.info("📏  PSNR %.2f dB, SSIM %.4f", quality.psnr_db, quality.ssim)
        self._manifest(
            "reconstruct",
            started,
            plan=_plan_reference(retained.plan, plan_path),
            inputs=inputs,
            outputs={"image": str(image_path), "report": str(report_path)},
            parameters={"converged": report.converged, **({"quality": quality.model_dump()} if quality else {})},
        ).save(run_dir)
        return ReconstructionResult(image_path=image_path, report_path=report_path, report=report, quality=quality)

    def sweep(
        self,
        scene_source: str | Path,
        out_csv: Path,
        rates: Iterable[float] | None = None,
        block_widths: Iterable[int] | None = None,
        methods: Iterable[str] | None = None,
    ) -> list[SweepRow]:
        """Quality of every (rate, block width, method) combination on one scene."""
        started = time.perf_counter()
        cfg = self.config
        rates = tuple(rates or cfg.sweep_rates)
        block_widths = tuple(block_widths or cfg.sweep_block_widths)
        methods = tuple(methods or cfg.sweep_methods)
        unknown = [name for name in methods if name not in SWEEP_METHODS]
        if unknown:
            raise ValueError(f"Unknown sweep methods {unknown}; expected a subset of {SWEEP_METHODS}")

        scene = self.load_scene(scene_source, cfg.n)
        if scene.bands != 1 or scene.height != cfg.n:
            raise ValueError(f"Sweeps need a mono scene of height {cfg.n}")
        full_plan = self.planner.plan(cfg.n, cfg.n, 1, cfg.seed, cfg.ordering)
        samples = capture(scene, full_plan.slm, cfg.capture)
        workers = cfg.effective_workers()

        cache: dict[tuple[str, int, int], tuple[QualityReport, bool]] = {}

        def evaluate(method: str, m: int, b: int) -> tuple[QualityReport, bool]:
            key = (method, m, 1 if method in ("single", "whole_frame") else b)
            if key in cache:
                return cache[key]
            if method == "whole_frame":
                image, report = self._whole_frame(scene, m)
            else:
                width = 1 if method == "single" else b
                plan = self.planner.plan(cfg.n, m, width, cfg.seed, cfg.ordering, naive=method == "naive")
                retained = retain(samples, m, plan)
                image, report = reconstruct_image(
                    retained.samples, retained.plan, self._recon_config(retained.plan), workers=workers, method=method
                )
            cache[key] = (assess(image, scene), report.converged)
            return cache[key]

        rows: list[SweepRow] = []
        whole_frame_ok = self._whole_frame_supported(scene)
        for rate in rates:
            m = even_rows(rate, cfg.n)
            for b in block_widths:
                for method in methods:
                    if method == "whole_frame" and not whole_frame_ok:
                        continue
                    quality, converged = evaluate(method, m, b)
                    rows.append(
                        SweepRow(
                            rate=m / cfg.n,
                            m=m,
                            b=b,
                            method=method,
                            psnr=quality.psnr_db,
                            ssim=quality.ssim,
                            converged=converged,
                        )
                    )
                    logger.info("📈  rate=%.0f%% b=%d %-11s SSIM %.4f PSNR %.2f dB", 100 * m / cfg.n, b, method, quality.ssim, quality.psnr_db)

        csv_path = _write_rows(out_csv, rows)
        self._manifest(
            "sweep",
            started,
            inputs={"scene": str(scene_source)},
            outputs={"csv": str(csv_path)},
            parameters={"rates": list(rates), "block_widths": list(block_widths), "methods": list(methods)},
        ).save(out_csv.parent)
        return rows

    def pan(
        self,
        scene_source: str | Path,
        out_csv: Path,
        mbar_rates: Iterable[float] | None = None,
        grid: Sequence[float] | None = None,
        block_width: int | None = None,
    ) -> PanResult:
        """Pan-sharpened versus independent colour recovery across effective rates."""
        started = time.perf_counter()
        cfg = self.config
        mbar_rates = tuple(mbar_rates or cfg.pan_mbar_rates)
        scene = self.load_scene(scene_source, cfg.n)
        if scene.bands != 3 or scene.height != cfg.n:
            raise ValueError(f"The pan study needs a colour scene of height {cfg.n}")

        full_plan = self.planner.plan(cfg.n, cfg.n, block_width or cfg.block_width, cfg.seed, cfg.ordering, cfg.naive)
        bands = capture_bands(scene, full_plan.slm, cfg.capture)
        study = PanSharpeningStudy(
            bands,
            full_plan,
            self._recon_config(full_plan),
            workers=cfg.effective_workers(),
            grid=tuple(grid or cfg.pan_grid),
            curve=cfg.pan_curve,
        )
        rows = study.sweep(scene, mbar_rates)
        savings = sample_savings(rows, "ssim") + sample_savings(rows, "psnr")

        csv_path = _write_rows(out_csv, rows)
        savings_path = _write_rows(out_csv.with_name(out_csv.stem + "_savings.csv"), savings)
        for entry in savings:
            if entry.fraction is not None:
                logger.info("💾  m̄=%.0f%% (%s): pan route needs %.2f of the samples", 100 * entry.mbar_rate, entry.metric, entry.fraction)
        self._manifest(
            "pan",
            started,
            plan=_plan_reference(full_plan),
            inputs={"scene": str(scene_source)},
            outputs={"csv": str(csv_path), "savings": str(savings_path)},
            parameters={
                "mbar_rates": list(mbar_rates),
                "grid": list(grid or cfg.pan_grid),
                "curve": list(cfg.pan_curve),
            },
        ).save(out_csv.parent)
        return PanResult(rows=rows, savings=savings, csv_path=csv_path, savings_path=savings_path)

    # Helpers ------------------------------------------------------------------

    def _recon_config(self, plan: SensingPlan) -> ReconConfig:
        updates: dict[str, Any] = {"block_width": plan.b}
        recon = self.config.recon
        if recon.epsilon is None and self.config.capture.noise_sigma > 0 and recon.noise_sigma == 0:
            updates["noise_sigma"] = constraint_noise(self.config.capture.noise_sigma, plan.n)
        return recon.model_copy(update=updates)

    @staticmethod
    def _whole_frame_supported(scene: Image) -> bool:
        try:
            order_exponent(scene.height * scene.width)
        except ValueError:
            logger.warning("⚠️  Skipping whole-frame baseline: %dx%d is not a supported power of two", scene.height, scene.width)
            return False
        return True

    def _whole_frame(self, scene: Image, m_per_column: int) -> tuple[Image, ReconReport]:
        total = scene.height * scene.width
        m = min(total, 2 * int(round(m_per_column * scene.width / 2)))
        rows = draw_rows(total, m, 1, self.config.seed)[0]
        # Noise matched to what a binary-pattern capture of the same order would carry.
        per_constraint = constraint_noise(self.config.capture.noise_sigma, total)
        y = measure_whole_frame(scene, rows, noise_sigma=per_constraint / np.sqrt(2.0), seed=self.config.capture.seed)
        recon = self.config.recon
        if per_constraint > 0 and recon.epsilon is None and recon.noise_sigma == 0:
            recon = recon.model_copy(update={"noise_sigma": per_constraint})
        return reconstruct_whole_frame(y, rows, (scene.height, scene.width), recon)
