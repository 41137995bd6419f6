from __future__ import annotations

import hashlib
import logging
from collections import deque
from functools import lru_cache

import numpy as np

from pushframe.noiselet.model import BinaryPatternSet
from pushframe.noiselet.transform import PairingError, binarize, conjugate_pair_map, order_exponent

from .model import Ordering, SensingPlan
from .rng import seeded_permutation

logger = logging.getLogger(__name__)


class RateError(ValueError):
    """Raised when more rows are requested than a column holds."""


def _pairs(n: int) -> list[tuple[int, int]]:
    pair = conjugate_pair_map(order_exponent(n))
    return [(r, pair[r]) for r in range(n) if r < pair[r]]


def _validate_draw(n: int, m: int, b: int) -> None:
    order_exponent(n)
    if n < 2:
        raise RateError("Column height must be at least 2")
    if m < 0 or m % 2:
        raise PairingError(f"m must be a non-negative even count (rows travel in conjugate pairs), got {m}")
    if m > n:
        raise RateError(f"Cannot retain m={m} rows from a column of height {n}")
    if b < 1:
        raise ValueError(f"Block width must be at least 1, got {b}")


def draw_rows(n: int, m: int, b: int, seed: int) -> list[list[int]]:
    """Row assignments for the ``b`` columns of a block, drawn pair by pair.

    The pool of conjugate pairs is shuffled once with the seed. Each assignment
    takes the ``m/2`` pairs at the head of the queue and sends them to the back,
    so unused pairs are drained first and least-recently-used pairs are redrawn
    after that.
    """
    _validate_draw(n, m, b)
    pairs = _pairs(n)
    queue = deque(seeded_permutation(len(pairs), seed))
    per_assignment = m // 2

    assignments: list[list[int]] = []
    for _ in range(b):
        drawn = [queue.popleft() for _ in range(per_assignment)]
        queue.extend(drawn)
        rows = sorted(row for ordinal in drawn for row in pairs[ordinal])
        assignments.append(rows)
    return assignments


def _destinations(n: int, ordering: Ordering) -> list[int]:
    # Canonical pattern order is (re, im) per pair with the all-ones pattern last.
    half = n // 2
    destination = [0] * (n + 1)
    for ordinal in range(half):
        if ordering is Ordering.PASTUSZCZAK:
            destination[2 * ordinal], destination[2 * ordinal + 1] = 2 * ordinal, 2 * ordinal + 1
        else:
            destination[2 * ordinal], destination[2 * ordinal + 1] = ordinal, n - 1 - ordinal
    destination[n] = n
    return destination


@lru_cache(maxsize=16)
def layout_patterns(n: int, ordering: Ordering) -> BinaryPatternSet:
    """Binarized patterns for every row, arranged in SLM order."""
    canonical = binarize(range(n), order_exponent(n))
    return canonical.permuted(_destinations(n, Ordering(ordering)))


@lru_cache(maxsize=16)
def _slm(n: int, ordering: Ordering) -> np.ndarray:
    mask = np.ascontiguousarray(layout_patterns(n, ordering).patterns.T)
    mask.setflags(write=False)
    return mask


def build_slm(n: int, ordering: Ordering | str = Ordering.MIRRORED) -> np.ndarray:
    """The ``n x (n+1)`` binary mask: one pattern per column, all-ones column last."""
    order_exponent(n)
    if n < 2:
        raise RateError("Column height must be at least 2")
    return _slm(n, Ordering(ordering))


def slm_digest(slm: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(slm, dtype=np.uint8).tobytes()).hexdigest()


def even_rows(rate: float, n: int) -> int:
    """Nearest even row count for a sampling rate in [0, 1]."""
    if not 0.0 <= rate <= 1.0:
        raise RateError(f"Sampling rate must lie in [0, 1], got {rate}")
    return min(n, 2 * int(round(rate * n / 2)))


class SensingPlanner:
    """Build sensing plans for pooled (block-diagonal) or naive (repeated) sampling."""

    def plan(
        self,
        n: int,
        m: int,
        b: int,
        seed: int,
        ordering: Ordering | str = Ordering.MIRRORED,
        naive: bool = False,
    ) -> SensingPlan:
        ordering = Ordering(ordering)
        assignments = draw_rows(n, m, b, seed)
        if naive:
            assignments = [list(assignments[0]) for _ in range(b)]
        layout = layout_patterns(n, ordering)
        plan = SensingPlan(
            n=n,
            b=b,
            m=m,
            ordering=ordering,
            seed=seed,
            naive=naive,
            assignments=tuple(tuple(rows) for rows in assignments),
            recovery=layout.recovery,
            slm_hash=slm_digest(build_slm(n, ordering)),
        )
        logger.debug(
            "Built %s plan n=%d m=%d b=%d seed=%d (%s ordering)",
            "naive" if naive else "pooled",
            n,
            m,
            b,
            seed,
            ordering.value,
        )
        return plan

    def plan_for_rate(
        self,
        n: int,
        rate: float,
        b: int,
        seed: int,
        ordering: Ordering | str = Ordering.MIRRORED,
        naive: bool = False,
    ) -> SensingPlan:
        return self.plan(n, even_rows(rate, n), b, seed, ordering=ordering, naive=naive)

    def with_rows(self, plan: SensingPlan, m: int, b: int | None = None) -> SensingPlan:
        """Same seed, ordering and mode at a different row count (and optionally width)."""
        return self.plan(plan.n, m, b or plan.b, plan.seed, ordering=plan.ordering, naive=plan.naive)
