"""Seeded permutations that can be replayed outside this package.

Draws come from the PCG64 bit generator (PCG XSL-RR 128/64, seeded through
``numpy.random.SeedSequence``) whose raw 64-bit stream numpy guarantees to be
stable across releases. Only raw outputs are consumed: bounded integers use
rejection sampling (``value < 2^64 - 2^64 mod bound``, then ``value % bound``)
and shuffles are a descending Fisher-Yates pass. Any PCG64 implementation with
the same seeding reproduces the plans bit for bit.
"""

from __future__ import annotations

import numpy as np

_RAW_SPAN = 1 << 64


def _bounded(bits: np.random.PCG64, bound: int) -> int:
    limit = _RAW_SPAN - (_RAW_SPAN % bound)
    while True:
        value = int(bits.random_raw())
        if value < limit:
            return value % bound


def seeded_permutation(count: int, seed: int) -> list[int]:
    bits = np.random.PCG64(seed)
    order = list(range(count))
    for i in range(count - 1, 0, -1):
        j = _bounded(bits, i + 1)
        order[i], order[j] = order[j], order[i]
    return order
