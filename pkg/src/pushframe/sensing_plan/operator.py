from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator

from pushframe.noiselet.model import NoiseletBasis
from pushframe.noiselet.transform import fast_noiselet, order_exponent

from .model import SensingPlan


class BlockOperator(LinearOperator):
    """Implicit block-diagonal sensing matrix for an ``n x width`` block.

    Column ``k`` of the block (vectorized column-major) is transformed and
    restricted to ``assignments[k]``; the complex outputs are stacked in column
    order. Nothing of size ``(width*m) x (width*n)`` is ever formed.
    """

    def __init__(self, n: int, assignments: Sequence[Sequence[int]]) -> None:
        order_exponent(n)
        self.n = n
        self.assignments = tuple(tuple(int(r) for r in rows) for rows in assignments)
        self.width = len(self.assignments)
        counts = [len(rows) for rows in self.assignments]
        self.offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._gather_rows = np.concatenate(
            [np.asarray(rows, dtype=np.int64) for rows in self.assignments] or [np.zeros(0, np.int64)]
        )
        self._gather_cols = np.repeat(np.arange(self.width), counts)
        super().__init__(dtype=np.complex128, shape=(int(self.offsets[-1]), n * self.width))

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        block = np.asarray(x).reshape(self.n, self.width, order="F")
        coefficients = fast_noiselet(block, "forward")
        return coefficients[self._gather_rows, self._gather_cols]

    def _rmatvec(self, y: np.ndarray) -> np.ndarray:
        full = np.zeros((self.n, self.width), dtype=np.complex128)
        full[self._gather_rows, self._gather_cols] = np.asarray(y).ravel()
        return fast_noiselet(full, "adjoint").reshape(-1, order="F")

    def segment(self, column: int) -> slice:
        """Slice of the measurement vector belonging to block column ``column``."""
        return slice(int(self.offsets[column]), int(self.offsets[column + 1]))

    def rows_at(self) -> np.ndarray:
        """Noiselet row index of every measurement entry."""
        return self._gather_rows


def build_operator(plan: SensingPlan, basis: NoiseletBasis | None = None, width: int | None = None) -> BlockOperator:
    """Sensing operator for one block of ``plan`` (narrower when ``width`` < b)."""
    if basis is not None and basis.order != plan.n:
        raise ValueError(f"Basis order {basis.order} does not match plan column height {plan.n}")
    width = plan.b if width is None else width
    if not 1 <= width <= plan.b:
        raise ValueError(f"Block width must lie in [1, {plan.b}], got {width}")
    return BlockOperator(plan.n, plan.assignments[:width])
