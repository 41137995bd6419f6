"""Pushframe acquisition: the scene steps across the column mask one column per exposure.

Each exposure sums scene-times-mask down every mask column, giving one binary
coefficient per pattern column. Coefficient ``c`` of exposure ``t`` lands at
``raw[t + c, c]`` so that every complete row of ``raw`` collects all patterns
for a single scene column.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from pushframe.noiselet.transform import fast_noiselet, order_exponent
from pushframe.sensing_plan.model import SensingPlan

from .model import CaptureSettings, Direction, FlatField, Image, SampleMatrix, ShapeMismatchError

logger = logging.getLogger(__name__)


class ScanIncompleteError(ValueError):
    """Raised when rows kept by cropping still contain unset entries."""


class CalibrationError(ValueError):
    """Raised when a white reference cannot produce usable gains."""


class ConversionError(ValueError):
    """Raised when binary samples needed for a complex coefficient are missing."""


def expose(scene_window: np.ndarray, mask_cols: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Column sums of ``scene_window * mask_cols``, optionally scaled per column."""
    window = np.asarray(scene_window, dtype=np.float64)
    mask = np.asarray(mask_cols, dtype=np.float64)
    if window.shape != mask.shape:
        raise ShapeMismatchError(f"Scene window {window.shape} and mask {mask.shape} differ")
    coefficients = np.einsum("ij,ij->j", window, mask)
    if weights is not None:
        coefficients = coefficients * np.asarray(weights, dtype=np.float64)
    return coefficients


def vignetting_profile(width: int, power: float, half_angle: float = np.pi / 6) -> np.ndarray:
    """Cosine-power transmission falloff across ``width`` mask columns (1 at the centre)."""
    if width < 1:
        raise ValueError("Vignetting profile needs at least one column")
    if power == 0 or width == 1:
        return np.ones(width)
    offsets = np.linspace(-1.0, 1.0, width)
    return np.cos(half_angle * offsets) ** power


def _pixels(scene: Image | np.ndarray) -> np.ndarray:
    pixels = scene.pixels if isinstance(scene, Image) else np.asarray(scene, dtype=np.float64)
    if pixels.ndim != 2:
        raise ShapeMismatchError(f"Scans take a single band, got shape {pixels.shape}")
    return pixels


def _forward_scan(
    pixels: np.ndarray,
    mask: np.ndarray,
    gains: np.ndarray | None,
    noise_sigma: float,
    rng: np.random.Generator | None,
) -> np.ndarray:
    h, w = pixels.shape
    pattern_width = mask.shape[1]
    exposures = w + pattern_width - 1
    padded = np.zeros((h, w + 2 * (pattern_width - 1)))
    padded[:, pattern_width - 1 : pattern_width - 1 + w] = pixels
    raw = np.full((exposures + pattern_width - 1, pattern_width), np.nan)
    columns = np.arange(pattern_width)
    for t in range(exposures):
        coefficients = expose(padded[:, t : t + pattern_width], mask, gains)
        if noise_sigma > 0 and rng is not None:
            coefficients = coefficients + rng.normal(0.0, noise_sigma, size=pattern_width)
        raw[t + columns, columns] = coefficients
    return raw


def scan(
    scene: Image | np.ndarray,
    slm: np.ndarray,
    direction: Direction | str = Direction.FORWARD,
    gains: np.ndarray | None = None,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Staggered raw sample matrix of a single-band scene moving past ``slm``.

    The scene is zero-padded by ``W-1`` columns on each side so that all
    ``w + W - 1`` exposures are defined; rows touched by padding are incomplete
    and removed by :func:`crop`. A reversed scan sees the mirrored scene through
    the mirrored mask; its columns are flipped back to pattern order.
    """
    pixels = _pixels(scene)
    mask = np.asarray(slm, dtype=np.float64)
    if mask.ndim != 2 or mask.shape[0] != pixels.shape[0]:
        raise ShapeMismatchError(f"Scene height {pixels.shape[0]} does not match mask shape {mask.shape}")
    if gains is not None:
        gains = np.asarray(gains, dtype=np.float64)
        if gains.shape != (mask.shape[1],):
            raise ShapeMismatchError(f"Expected {mask.shape[1]} column gains, got shape {gains.shape}")
    rng = np.random.default_rng(seed) if noise_sigma > 0 else None

    direction = Direction(direction)
    if direction is Direction.FORWARD:
        return _forward_scan(pixels, mask, gains, noise_sigma, rng)
    flipped_gains = None if gains is None else gains[::-1]
    raw = _forward_scan(pixels[:, ::-1], mask[:, ::-1], flipped_gains, noise_sigma, rng)
    return raw[:, ::-1].copy()


def crop(raw: np.ndarray) -> np.ndarray:
    """Keep the ``w`` fully populated rows of a raw sample matrix."""
    raw = np.asarray(raw, dtype=np.float64)
    pattern_width = raw.shape[1]
    width = raw.shape[0] - 2 * (pattern_width - 1)
    if width < 1:
        raise ScanIncompleteError(f"Raw matrix of shape {raw.shape} holds no complete rows")
    cropped = raw[pattern_width - 1 : pattern_width - 1 + width]
    if np.isnan(cropped).any():
        raise ScanIncompleteError("Cropped sample rows still contain unset entries")
    return cropped.copy()


def capture(
    scene: Image | np.ndarray,
    slm: np.ndarray,
    settings: CaptureSettings | None = None,
    pattern_index: Sequence[int] | None = None,
    flat: FlatField | None = None,
) -> SampleMatrix:
    """Scan, crop and (optionally) flat-field correct one band."""
    settings = settings or CaptureSettings()
    slm = np.asarray(slm)
    index = tuple(range(slm.shape[1])) if pattern_index is None else tuple(int(p) for p in pattern_index)
    mask = slm[:, list(index)]
    gains = None
    if settings.vignetting_power > 0:
        gains = vignetting_profile(mask.shape[1], settings.vignetting_power, settings.vignetting_half_angle)
    raw = scan(scene, mask, settings.direction, gains, settings.noise_sigma, settings.seed)
    samples = SampleMatrix(raw=raw, cropped=crop(raw), pattern_index=index, direction=settings.direction)
    if flat is not None:
        samples = apply_flatfield(samples, flat)
    return samples


def flatfield(
    white: SampleMatrix | np.ndarray,
    slm: np.ndarray,
    pattern_index: Sequence[int] | None = None,
    intensity: float = 1.0,
) -> FlatField:
    """Gains ``w_c`` mapping a white capture back to the ideal coefficient of each column.

    The ideal coefficient of a uniform scene is ``intensity`` times the number of
    transmitting pixels in the pattern. Patterns that transmit nothing keep a
    unit gain.
    """
    cropped = white.cropped if isinstance(white, SampleMatrix) else np.asarray(white, dtype=np.float64)
    if pattern_index is None:
        pattern_index = white.pattern_index if isinstance(white, SampleMatrix) else range(cropped.shape[1])
    index = [int(p) for p in pattern_index]
    if cropped.shape[1] != len(index):
        raise ShapeMismatchError(f"White capture has {cropped.shape[1]} columns for {len(index)} patterns")
    if np.isnan(cropped).any():
        raise CalibrationError("White capture contains unset entries")

    ideal = intensity * np.asarray(slm, dtype=np.float64)[:, index].sum(axis=0)
    measured = cropped.mean(axis=0)
    weights = np.ones(len(index))
    active = ideal > 0
    degenerate = active & (measured <= 0)
    if degenerate.any():
        columns = np.flatnonzero(degenerate).tolist()
        raise CalibrationError(f"White capture recorded no light in pattern columns {columns[:8]}")
    weights[active] = ideal[active] / measured[active]
    logger.debug("Flat-field gains span [%.4f, %.4f]", weights.min(), weights.max())
    return FlatField(pattern_index=index, weights=weights.tolist())


def apply_flatfield(samples: SampleMatrix, flat: FlatField | np.ndarray) -> SampleMatrix:
    if isinstance(flat, FlatField):
        weights = flat.weights_for(samples.pattern_index)
    else:
        weights = np.asarray(flat, dtype=np.float64)
    return samples.scaled(weights)


def to_complex(
    samples: SampleMatrix | np.ndarray,
    plan: SensingPlan,
    block_start: int = 0,
    b: int | None = None,
    pattern_index: Sequence[int] | None = None,
) -> np.ndarray:
    """Stacked complex measurements for scene columns ``block_start .. block_start+b-1``.

    Column ``block_start + k`` uses assignment ``k`` of ``plan``. Binary rows are
    taken in scene order, so reversed captures need no further handling here.
    """
    if isinstance(samples, SampleMatrix):
        rows = samples.scene_rows()
        index = samples.pattern_index if pattern_index is None else tuple(pattern_index)
    else:
        rows = np.asarray(samples, dtype=np.float64)
        index = tuple(range(rows.shape[1])) if pattern_index is None else tuple(pattern_index)
    if rows.shape[1] != len(index):
        raise ShapeMismatchError(f"Samples have {rows.shape[1]} columns for {len(index)} pattern ids")
    b = plan.b if b is None else b
    if not 1 <= b <= plan.b:
        raise ValueError(f"Block width must lie in [1, {plan.b}], got {b}")
    if block_start < 0 or block_start + b > rows.shape[0]:
        raise ValueError(f"Columns {block_start}..{block_start + b - 1} fall outside a {rows.shape[0]}-column scene")

    column_of = {pattern: column for column, pattern in enumerate(index)}
    ones = column_of.get(plan.n)
    if ones is None:
        raise ConversionError("The all-ones pattern was not captured")

    pieces: list[np.ndarray] = []
    for k in range(b):
        sample_row = rows[block_start + k]
        if np.isnan(sample_row[ones]):
            raise ConversionError(f"All-ones coefficient missing for scene column {block_start + k}")
        terms = [plan.term(r) for r in plan.assignments[k]]
        try:
            re_cols = [column_of[t.re_pattern] for t in terms]
            im_cols = [column_of[t.im_pattern] for t in terms]
        except KeyError as exc:
            raise ConversionError(
                f"Pattern {exc.args[0]} needed by scene column {block_start + k} was not captured"
            ) from exc
        measured_re = sample_row[re_cols]
        measured_im = sample_row[im_cols]
        if np.isnan(measured_re).any() or np.isnan(measured_im).any():
            raise ConversionError(f"Binary samples needed by scene column {block_start + k} were discarded")
        w_re = np.array([complex(*t.w_re) for t in terms])
        w_im = np.array([complex(*t.w_im) for t in terms])
        w_one = np.array([complex(*t.w_one) for t in terms])
        pieces.append(w_re * measured_re + w_im * measured_im + w_one * sample_row[ones])
    return np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.complex128)


def measure_whole_frame(
    scene: Image | np.ndarray,
    rows: Sequence[int],
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Selected noiselet coefficients of the column-stacked scene (single-pixel baseline)."""
    pixels = _pixels(scene)
    vector = pixels.reshape(-1, order="F")
    order_exponent(vector.size)
    coefficients = fast_noiselet(vector, "forward")[np.asarray(list(rows), dtype=np.int64)]
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        coefficients = coefficients + rng.normal(0.0, noise_sigma, coefficients.shape) + 1j * rng.normal(
            0.0, noise_sigma, coefficients.shape
        )
    return coefficients
