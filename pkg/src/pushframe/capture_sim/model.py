from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, Field


class ShapeMismatchError(ValueError):
    """Raised when arrays that must line up do not."""


class Direction(str, Enum):
    FORWARD = "forward"
    REVERSED = "reversed"


@dataclass(frozen=True)
class Image:
    """Intensity grid in [0, 1]; ``(h, w)`` for mono or ``(h, w, 3)`` for colour."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 3 and pixels.shape[2] == 1:
            pixels = pixels[:, :, 0]
        if pixels.ndim not in (2, 3) or (pixels.ndim == 3 and pixels.shape[2] != 3):
            raise ShapeMismatchError(f"Images must be (h, w) or (h, w, 3), got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or np.any(pixels < 0) or np.any(pixels > 1):
            raise ValueError("Image intensities must be finite and lie in [0, 1]")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def bands(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def band(self, index: int) -> "Image":
        if self.bands == 1:
            if index != 0:
                raise IndexError("Mono images only have band 0")
            return self
        return Image(self.pixels[:, :, index])

    def split(self) -> list["Image"]:
        return [self.band(index) for index in range(self.bands)]

    @classmethod
    def from_bands(cls, bands: Sequence["Image | np.ndarray"]) -> "Image":
        planes = [band.pixels if isinstance(band, Image) else np.asarray(band, dtype=np.float64) for band in bands]
        if len(planes) == 1:
            return cls(planes[0])
        if len({plane.shape for plane in planes}) != 1:
            raise ShapeMismatchError("All bands must share one shape")
        return cls(np.stack(planes, axis=-1))

    def mirrored(self) -> "Image":
        return Image(self.pixels[:, ::-1].copy())

    def clipped(self) -> "Image":
        return Image(np.clip(self.pixels, 0.0, 1.0))


@dataclass(frozen=True)
class SampleMatrix:
    """Staggered coefficients of one scan and the fully-populated rows cut from it.

    ``raw`` is ``(2(W-1) + w) x W`` with NaN marking unset entries, where ``W``
    is the number of mask columns used. ``cropped`` holds the ``w`` complete
    rows in acquisition order; ``pattern_index[c]`` names the SLM pattern seen by
    column ``c``.
    """

    raw: np.ndarray = field(repr=False)
    cropped: np.ndarray = field(repr=False)
    pattern_index: tuple[int, ...]
    direction: Direction = Direction.FORWARD

    def __post_init__(self) -> None:
        if self.cropped.ndim != 2 or self.cropped.shape[1] != len(self.pattern_index):
            raise ShapeMismatchError(
                f"Cropped samples {self.cropped.shape} do not match {len(self.pattern_index)} pattern columns"
            )

    @property
    def width(self) -> int:
        return int(self.cropped.shape[0])

    @property
    def n_patterns(self) -> int:
        return len(self.pattern_index)

    def scene_rows(self) -> np.ndarray:
        """Cropped rows re-ordered so row ``j`` belongs to scene column ``j``."""
        if self.direction is Direction.REVERSED:
            return self.cropped[::-1]
        return self.cropped

    def column_of(self, pattern: int) -> int | None:
        try:
            return self.pattern_index.index(pattern)
        except ValueError:
            return None

    def scaled(self, weights: np.ndarray) -> "SampleMatrix":
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.n_patterns,):
            raise ShapeMismatchError(f"Expected {self.n_patterns} column weights, got shape {weights.shape}")
        return replace(self, raw=self.raw * weights, cropped=self.cropped * weights)

    def with_cropped(self, cropped: np.ndarray) -> "SampleMatrix":
        return replace(self, cropped=np.asarray(cropped, dtype=np.float64))


class CaptureSettings(BaseModel):
    direction: Direction = Direction.FORWARD
    noise_sigma: float = Field(default=0.0, ge=0.0, description="Std-dev of additive detector noise")
    vignetting_power: float = Field(default=0.0, ge=0.0, description="Cosine-power falloff exponent; 0 disables")
    vignetting_half_angle: float = Field(default=np.pi / 6, gt=0.0, lt=np.pi / 2)
    seed: int = Field(default=0, ge=0)


class FlatField(BaseModel):
    """Per-pattern-column gain correction measured from a white capture."""

    pattern_index: List[int]
    weights: List[float]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    def weights_for(self, pattern_index: Sequence[int]) -> np.ndarray:
        lookup = dict(zip(self.pattern_index, self.weights))
        missing = [p for p in pattern_index if p not in lookup]
        if missing:
            raise ShapeMismatchError(f"Flat field has no weight for pattern columns {missing[:8]}")
        return np.asarray([lookup[p] for p in pattern_index], dtype=np.float64)

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path) -> "FlatField":
        return cls.model_validate_json(path.read_text(encoding="utf-8"))
