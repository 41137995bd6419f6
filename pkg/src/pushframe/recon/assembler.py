from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Sequence

import numpy as np

from pushframe.capture_sim.model import Image, SampleMatrix, ShapeMismatchError
from pushframe.capture_sim.scanner import to_complex
from pushframe.sensing_plan.model import SensingPlan
from pushframe.sensing_plan.operator import BlockOperator, build_operator

from .model import BlockReport, ReconConfig, ReconReport
from .solver import tv_min

logger = logging.getLogger(__name__)


def partition_blocks(width: int, block_width: int) -> list[tuple[int, int]]:
    """``(start, width)`` of consecutive non-overlapping blocks; the last may be narrower."""
    if width < 1 or block_width < 1:
        raise ValueError("Scene and block widths must be positive")
    blocks: list[tuple[int, int]] = []
    start = 0
    while start < width:
        current = min(block_width, width - start)
        blocks.append((start, current))
        start += current
    return blocks


def _progress_snapshot(completed: int, total: int, width: int = 20) -> str:
    total = max(1, total)
    completed = max(0, min(completed, total))
    filled = min(width, int(round((completed / total) * width)))
    return f"[{'=' * filled}{'.' * (width - filled)}] {completed}/{total}"


def _solve_block(
    samples: SampleMatrix,
    plan: SensingPlan,
    cfg: ReconConfig,
    index: int,
    start: int,
    width: int,
) -> tuple[np.ndarray, BlockReport]:
    operator = build_operator(plan, width=width)
    y = to_complex(samples, plan, block_start=start, b=width)
    return tv_min(y, operator, (plan.n, width), cfg, index=index, start_column=start)


def reconstruct_image(
    samples: SampleMatrix,
    plan: SensingPlan,
    cfg: ReconConfig | None = None,
    workers: int = 1,
    method: str | None = None,
) -> tuple[Image, ReconReport]:
    """Split the scene into ``plan.b``-wide blocks, solve each, and reassemble in order."""
    cfg = cfg or ReconConfig(block_width=plan.b)
    if cfg.block_width != plan.b:
        logger.debug("Using plan block width %d over configured %d", plan.b, cfg.block_width)
    started = time.perf_counter()
    blocks = partition_blocks(samples.width, plan.b)
    total = len(blocks)
    output = np.zeros((plan.n, samples.width))
    reports: list[BlockReport | None] = [None] * total

    logger.info("🧮  Reconstructing %d block%s of width %d (m=%d, n=%d)", total, "" if total == 1 else "s", plan.b, plan.m, plan.n)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = {
            pool.submit(_solve_block, samples, plan, cfg, index, start, width): index
            for index, (start, width) in enumerate(blocks)
        }
        completed = 0
        for future in as_completed(futures):
            index = futures[future]
            start, width = blocks[index]
            block, report = future.result()
            output[:, start : start + width] = block
            reports[index] = report
            completed += 1
            logger.debug("✅  %s  Block %d solved in %d iterations", _progress_snapshot(completed, total), index, report.iterations)

    report = ReconReport(
        method=method or ("naive" if plan.naive else "pooled"),
        shape=output.shape,
        blocks=[r for r in reports if r is not None],
        wall_time_sec=time.perf_counter() - started,
    )
    logger.info(
        "🏁  %s  Reconstruction finished in %.1fs (%s)",
        _progress_snapshot(total, total),
        report.wall_time_sec,
        "converged" if report.converged else "some blocks did not converge",
    )
    return Image(output), report


def reconstruct_whole_frame(
    y: np.ndarray,
    rows: Sequence[int],
    shape: tuple[int, int],
    cfg: ReconConfig | None = None,
) -> tuple[Image, ReconReport]:
    """Single-pixel-camera baseline: one solve over the column-stacked image."""
    cfg = cfg or ReconConfig()
    h, w = shape
    started = time.perf_counter()
    operator = BlockOperator(h * w, [sorted(int(r) for r in rows)])
    if np.asarray(y).shape != (operator.shape[0],):
        raise ShapeMismatchError(f"Expected {operator.shape[0]} whole-frame measurements")
    image, block_report = tv_min(np.asarray(y), operator, shape, cfg)
    report = ReconReport(
        method="whole_frame",
        shape=image.shape,
        blocks=[block_report],
        wall_time_sec=time.perf_counter() - started,
    )
    return Image(image), report
