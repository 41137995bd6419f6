"""Reading and writing scenes, masks and sample matrices.

Sample containers are ``.npz`` archives with arrays ``raw``, ``cropped`` and
``pattern_index`` plus a ``metadata`` JSON string carrying ``direction``,
``width``, ``n_patterns`` and ``format_version``.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .model import Direction, Image, SampleMatrix

logger = logging.getLogger(__name__)

SAMPLES_FORMAT_VERSION = 1
_SIXTEEN_BIT_MODES = {"I", "I;16", "I;16B", "I;16L"}


def read_image(path: Path) -> Image:
    """Load a PGM/PPM (or any Pillow-readable image) normalized to [0, 1]."""
    with PILImage.open(path) as handle:
        mode = handle.mode
        if mode in _SIXTEEN_BIT_MODES:
            pixels = np.asarray(handle, dtype=np.float64) / 65535.0
        elif mode in {"L", "RGB"}:
            pixels = np.asarray(handle, dtype=np.float64) / 255.0
        elif mode in {"1", "P", "LA"}:
            pixels = np.asarray(handle.convert("L"), dtype=np.float64) / 255.0
        else:
            pixels = np.asarray(handle.convert("RGB"), dtype=np.float64) / 255.0
    logger.debug("Read %s (%s, shape %s)", path, mode, pixels.shape)
    return Image(np.clip(pixels, 0.0, 1.0))


def write_image(path: Path, image: Image, bit_depth: int = 8) -> Path:
    """Write a mono image as PGM or a colour image as PPM.

    16-bit output is available for mono images; colour is always 8-bit.
    """
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    path.parent.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(image.pixels, 0.0, 1.0)
    if image.bands == 1 and bit_depth == 16:
        handle = PILImage.fromarray(np.round(pixels * 65535.0).astype(np.uint16))
    elif image.bands == 1:
        handle = PILImage.fromarray(np.round(pixels * 255.0).astype(np.uint8))
    else:
        if bit_depth == 16:
            logger.warning("⚠️  Colour images are written with 8-bit precision: %s", path)
        handle = PILImage.fromarray(np.round(pixels * 255.0).astype(np.uint8))
    handle.save(path, format="PPM")
    return path


def write_mask(path: Path, slm: np.ndarray) -> Path:
    """Binary mask as PGM: 0 blocks, 255 transmits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    levels = (np.asarray(slm, dtype=np.uint8) > 0).astype(np.uint8) * 255
    PILImage.fromarray(levels).save(path, format="PPM")
    return path


def write_samples_csv(path: Path, matrix: np.ndarray) -> Path:
    """Row-major CSV; NaN entries (unset in raw scans) become empty fields."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        for row in np.asarray(matrix, dtype=np.float64):
            writer.writerow(["" if np.isnan(value) else repr(float(value)) for value in row])
    return path


def read_samples_csv(path: Path) -> np.ndarray:
    matrix = np.genfromtxt(path, delimiter=",", dtype=np.float64)
    return np.atleast_2d(matrix)


def save_samples(path: Path, samples: SampleMatrix) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {
        "direction": samples.direction.value,
        "width": samples.width,
        "n_patterns": samples.n_patterns,
        "format_version": SAMPLES_FORMAT_VERSION,
    }
    with path.open("wb") as handle:
        np.savez_compressed(
            handle,
            raw=samples.raw,
            cropped=samples.cropped,
            pattern_index=np.asarray(samples.pattern_index, dtype=np.int64),
            metadata=np.asarray(json.dumps(metadata)),
        )
    return path


def load_samples(path: Path) -> SampleMatrix:
    with np.load(path, allow_pickle=False) as archive:
        metadata = json.loads(str(archive["metadata"]))
        version = metadata.get("format_version")
        if version != SAMPLES_FORMAT_VERSION:
            raise ValueError(f"Unsupported sample container version {version} in {path}")
        samples = SampleMatrix(
            raw=archive["raw"].astype(np.float64),
            cropped=archive["cropped"].astype(np.float64),
            pattern_index=tuple(int(p) for p in archive["pattern_index"]),
            direction=Direction(metadata["direction"]),
        )
    if samples.width != metadata["width"] or samples.n_patterns != metadata["n_patterns"]:
        raise ValueError(f"Sample container {path} does not match its metadata")
    return samples
