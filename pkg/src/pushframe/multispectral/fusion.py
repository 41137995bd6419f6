"""Pan-sharpened colour recovery from a single set of full-rate band captures.

The pan sample set is the mean of the band sample sets (every map from scene to
samples is linear, so this equals capturing the mean band). Compression happens
only when samples are retained: the pan set keeps ``m_pan`` complex rows per
column, each colour band ``m_band``. The bands are then sharpened with the
detail of the better-sampled pan image.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Iterable, Sequence

import numpy as np

from pushframe.capture_sim.model import CaptureSettings, Direction, Image, SampleMatrix, ShapeMismatchError
from pushframe.capture_sim.scanner import capture
from pushframe.metrics.quality import assess
from pushframe.recon.assembler import reconstruct_image
from pushframe.recon.model import ReconConfig
from pushframe.sensing_plan.model import SensingPlan
from pushframe.sensing_plan.planner import SensingPlanner, even_rows

from .model import BandSamples, PanSweepRow, RetainedSamples, SampleSavings

logger = logging.getLogger(__name__)

PAN_GRID = (0.125, 0.25, 0.375, 0.5, 0.75, 1.0)
CURVE_FRACTIONS = (0.5, 0.6, 0.7, 0.8, 0.9)


def synthesize_pan(red: SampleMatrix, green: SampleMatrix, blue: SampleMatrix) -> SampleMatrix:
    """Elementwise mean of three band captures taken under the same mask."""
    if not (red.pattern_index == green.pattern_index == blue.pattern_index):
        raise ShapeMismatchError("Band captures used different pattern columns")
    if not (red.direction == green.direction == blue.direction):
        raise ShapeMismatchError("Band captures were scanned in different directions")
    if not (red.raw.shape == green.raw.shape == blue.raw.shape):
        raise ShapeMismatchError("Band captures have different shapes")
    return replace(
        red,
        raw=(red.raw + green.raw + blue.raw) / 3.0,
        cropped=(red.cropped + green.cropped + blue.cropped) / 3.0,
    )


def capture_bands(
    scene: Image,
    slm: np.ndarray,
    settings: CaptureSettings | None = None,
) -> BandSamples:
    """Capture all three bands with the full mask (every complex row plus all-ones)."""
    if scene.bands != 3:
        raise ShapeMismatchError(f"Colour capture needs a 3-band scene, got {scene.bands} band(s)")
    settings = settings or CaptureSettings()
    captured = []
    for index, band in enumerate(scene.split()):
        band_settings = settings.model_copy(update={"seed": settings.seed + index})
        captured.append(capture(band, slm, band_settings))
    red, green, blue = captured
    return BandSamples(red=red, green=green, blue=blue, pan=synthesize_pan(red, green, blue))


def retain(
    samples: SampleMatrix,
    k: int,
    plan: SensingPlan,
    seed: int | None = None,
    planner: SensingPlanner | None = None,
) -> RetainedSamples:
    """Discard every binary sample not needed for ``k`` complex rows per scene column.

    The rows come from a plan drawn like ``plan`` (same size, ordering, mode and,
    unless overridden, seed) at ``k`` rows. The all-ones column is always kept.
    """
    planner = planner or SensingPlanner()
    derived = planner.plan(
        plan.n,
        k,
        plan.b,
        plan.seed if seed is None else seed,
        ordering=plan.ordering,
        naive=plan.naive,
    )
    scene_rows = samples.scene_rows()
    kept = np.full_like(scene_rows, np.nan)
    column_of = {pattern: column for column, pattern in enumerate(samples.pattern_index)}
    for j in range(samples.width):
        needed = [column_of[p] for p in derived.patterns_for_column(j) if p in column_of]
        kept[j, needed] = scene_rows[j, needed]
    if samples.direction is Direction.REVERSED:
        kept = kept[::-1]
    return RetainedSamples(samples=samples.with_cropped(kept), plan=derived)


def ihs_sharpen(
    pan: Image | np.ndarray,
    red: Image | np.ndarray,
    green: Image | np.ndarray,
    blue: Image | np.ndarray,
    clamp: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Add ``pan - mean(bands)`` to every band, then clamp to [0, 1]."""
    planes = [p.pixels if isinstance(p, Image) else np.asarray(p, dtype=np.float64) for p in (pan, red, green, blue)]
    if len({plane.shape for plane in planes}) != 1:
        raise ShapeMismatchError("Pan and colour bands must share one shape")
    intensity, r, g, b = planes
    detail = intensity - (r + g + b) / 3.0
    sharpened = [band + detail for band in (r, g, b)]
    if clamp:
        sharpened = [np.clip(band, 0.0, 1.0) for band in sharpened]
    return sharpened[0], sharpened[1], sharpened[2]


def effective_rate(m_pan: int, m_band: int) -> float:
    if m_pan < 0 or m_band < 0:
        raise ValueError("Row counts must be nonnegative")
    return m_pan / 3 + m_band


def pan_grid(mbar: float, n: int, fractions: Sequence[float] = PAN_GRID) -> list[tuple[int, int]]:
    """``(m_pan, m_band)`` pairs near effective rate ``mbar``; infeasible points are skipped."""
    points: list[tuple[int, int]] = []
    for fraction in fractions:
        m_pan = even_rows(fraction, n)
        m_band = 2 * int(round((mbar - m_pan / 3) / 2))
        if m_band < 0 or m_band > n:
            continue
        points.append((m_pan, m_band))
    return points


class PanSharpeningStudy:
    """Reconstruct a colour scene by the pan route and the independent route, caching solves."""

    def __init__(
        self,
        bands: BandSamples,
        plan: SensingPlan,
        cfg: ReconConfig | None = None,
        workers: int = 1,
        grid: Sequence[float] = PAN_GRID,
        curve: Sequence[float] = CURVE_FRACTIONS,
    ) -> None:
        if any(not 0.0 < fraction < 1.0 for fraction in curve):
            raise ValueError(f"Curve fractions must lie strictly between 0 and 1, got {tuple(curve)}")
        self.bands = bands
        self.plan = plan
        self.cfg = cfg or ReconConfig(block_width=plan.b)
        self.workers = workers
        self.grid = tuple(grid)
        self.curve = tuple(sorted(curve))
        self._cache: dict[tuple[str, int], np.ndarray] = {}

    def _solve(self, key: str, samples: SampleMatrix, m: int) -> np.ndarray:
        # Pan and bands share the plan seed, so band rows are a prefix of the pan rows.
        cached = self._cache.get((key, m))
        if cached is not None:
            return cached
        retained = retain(samples, m, self.plan)
        image, report = reconstruct_image(retained.samples, retained.plan, self.cfg, workers=self.workers)
        if not report.converged:
            logger.warning("⚠️  %s reconstruction at m=%d has non-converged blocks", key, m)
        self._cache[(key, m)] = image.pixels
        return image.pixels

    def pan_image(self, m_pan: int) -> np.ndarray:
        return self._solve("pan", self.bands.pan, m_pan)

    def band_images(self, m_band: int) -> list[np.ndarray]:
        return [
            self._solve(name, samples, m_band)
            for name, samples in zip(("red", "green", "blue"), self.bands.bands)
        ]

    def pan_route(self, m_pan: int, m_band: int) -> Image:
        red, green, blue = self.band_images(m_band)
        return Image.from_bands(ihs_sharpen(self.pan_image(m_pan), red, green, blue))

    def independent_route(self, m: int) -> Image:
        return Image.from_bands(self.band_images(m))

    def _pan_points(self, truth: Image, target: float, requested: bool) -> list[PanSweepRow]:
        """Every grid point near effective row count ``target``, with the best ones marked."""
        n = self.plan.n
        candidates: list[PanSweepRow] = []
        for m_pan, m_band in pan_grid(target, n, self.grid):
            quality = assess(self.pan_route(m_pan, m_band), truth)
            mbar = effective_rate(m_pan, m_band)
            candidates.append(
                PanSweepRow(
                    mbar=mbar,
                    mbar_rate=mbar / n,
                    route="pan",
                    m_pan=m_pan,
                    m_band=m_band,
                    psnr=quality.psnr_db,
                    ssim=quality.ssim,
                    requested=requested,
                )
            )
        if candidates:
            best_ssim = max(range(len(candidates)), key=lambda i: candidates[i].ssim)
            best_psnr = max(range(len(candidates)), key=lambda i: candidates[i].psnr)
            for index, row in enumerate(candidates):
                if index == best_ssim == best_psnr:
                    row.best_by = "both"
                elif index == best_ssim:
                    row.best_by = "ssim"
                elif index == best_psnr:
                    row.best_by = "psnr"
        return candidates

    def sweep(self, truth: Image, mbar_rates: Iterable[float]) -> list[PanSweepRow]:
        """Pan grid and independent route at each requested rate.

        The pan curve is also traced at ``curve`` fractions of each requested rate,
        so the rate where it meets the independent route can be located even when
        the pan route already wins at the requested rate itself.
        """
        n = self.plan.n
        rows: list[PanSweepRow] = []
        traced: set[float] = set()
        for rate in mbar_rates:
            target = rate * n
            for fraction in self.curve:
                point = round(fraction * target, 9)
                if point in traced:
                    continue
                traced.add(point)
                rows.extend(self._pan_points(truth, point, requested=False))

            candidates = self._pan_points(truth, target, requested=True)
            rows.extend(candidates)

            m = even_rows(rate, n)
            quality = assess(self.independent_route(m), truth)
            rows.append(
                PanSweepRow(
                    mbar=float(m),
                    mbar_rate=m / n,
                    route="independent",
                    m_pan=0,
                    m_band=m,
                    psnr=quality.psnr_db,
                    ssim=quality.ssim,
                )
            )
            logger.info(
                "🎨  m̄=%.0f%%: pan grid of %d point(s), %d curve point(s) and independent route assessed",
                100 * rate,
                len(candidates),
                len(self.curve),
            )
        return rows


def best_pan_rows(rows: Sequence[PanSweepRow], metric: str = "ssim") -> list[PanSweepRow]:
    """Best pan-route row per requested effective rate, in sweep order."""
    flag = {"ssim": ("ssim", "both"), "psnr": ("psnr", "both")}[metric]
    return [row for row in rows if row.route == "pan" and row.best_by in flag]


def savings_fraction(
    pan_rates: Sequence[float],
    pan_scores: Sequence[float],
    target: float,
    reference_rate: float,
) -> float | None:
    """Rate at which the pan curve first reaches ``target`` (linear interpolation), over ``reference_rate``.

    Returns ``None`` when the pan curve never reaches the target.
    """
    order = np.argsort(pan_rates)
    rates = np.asarray(pan_rates, dtype=np.float64)[order]
    scores = np.asarray(pan_scores, dtype=np.float64)[order]
    if rates.size == 0 or reference_rate <= 0:
        return None
    if scores[0] >= target:
        return float(rates[0] / reference_rate)
    for index in range(1, rates.size):
        low, high = scores[index - 1], scores[index]
        if high >= target > low:
            t = (target - low) / (high - low)
            matching = rates[index - 1] + t * (rates[index] - rates[index - 1])
            return float(matching / reference_rate)
    return None


def sample_savings(rows: Sequence[PanSweepRow], metric: str = "ssim") -> list[SampleSavings]:
    """For each independent-route point, the pan route's sample fraction for equal quality."""
    best = best_pan_rows(rows, metric)
    rates = [row.mbar_rate for row in best]
    scores = [getattr(row, metric) for row in best]
    savings: list[SampleSavings] = []
    for row in rows:
        if row.route != "independent":
            continue
        target = getattr(row, metric)
        fraction = savings_fraction(rates, scores, target, row.mbar_rate)
        savings.append(
            SampleSavings(
                mbar_rate=row.mbar_rate,
                metric=metric,
                target=target,
                matching_rate=None if fraction is None else fraction * row.mbar_rate,
                fraction=fraction,
            )
        )
    return savings
