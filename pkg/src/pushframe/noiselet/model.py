from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field


def _as_pair(value: complex) -> tuple[float, float]:
    return (float(value.real), float(value.imag))


class RecoveryTerm(BaseModel):
    """Affine recipe turning three binary measurements into one complex coefficient.

    ``y[row] = w_re * m[re_pattern] + w_im * m[im_pattern] + w_one * m[ones_pattern]``
    where ``m`` are the binary-pattern measurements.
    """

    row: int = Field(ge=0, description="Complex noiselet row recovered by this term")
    re_pattern: int = Field(ge=0)
    im_pattern: int = Field(ge=0)
    ones_pattern: int = Field(ge=0)
    w_re: tuple[float, float]
    w_im: tuple[float, float]
    w_one: tuple[float, float]

    @classmethod
    def from_weights(
        cls,
        row: int,
        re_pattern: int,
        im_pattern: int,
        ones_pattern: int,
        weights: tuple[complex, complex, complex],
    ) -> "RecoveryTerm":
        w_re, w_im, w_one = weights
        return cls(
            row=row,
            re_pattern=re_pattern,
            im_pattern=im_pattern,
            ones_pattern=ones_pattern,
            w_re=_as_pair(w_re),
            w_im=_as_pair(w_im),
            w_one=_as_pair(w_one),
        )

    @property
    def weights(self) -> tuple[complex, complex, complex]:
        return (complex(*self.w_re), complex(*self.w_im), complex(*self.w_one))

    def remapped(self, destination: Sequence[int]) -> "RecoveryTerm":
        return self.model_copy(
            update={
                "re_pattern": int(destination[self.re_pattern]),
                "im_pattern": int(destination[self.im_pattern]),
                "ones_pattern": int(destination[self.ones_pattern]),
            }
        )


@dataclass(frozen=True)
class NoiseletBasis:
    """Order-2^q unitary noiselet basis, applied through the fast transform."""

    order_exponent: int
    pair_map: tuple[int, ...] = field(repr=False)

    @property
    def order(self) -> int:
        return 1 << self.order_exponent

    @classmethod
    def of(cls, q: int) -> "NoiseletBasis":
        from .transform import conjugate_pair_map

        return cls(order_exponent=q, pair_map=conjugate_pair_map(q))

    def forward(self, x: np.ndarray) -> np.ndarray:
        from .transform import fast_noiselet

        return fast_noiselet(x, "forward")

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        from .transform import fast_noiselet

        return fast_noiselet(y, "adjoint")

    def matrix(self) -> np.ndarray:
        from .transform import noiselet_matrix

        return noiselet_matrix(self.order_exponent)

    def rows(self, indices: Sequence[int]) -> np.ndarray:
        """Selected rows of the matrix, shape ``(len(indices), n)``."""
        from .transform import noiselet_rows

        return noiselet_rows(self.order_exponent, indices)


@dataclass(frozen=True)
class BinaryPatternSet:
    """{0,1} patterns (one per row) plus the map back to complex coefficients."""

    patterns: np.ndarray = field(repr=False)
    includes_ones_row: bool
    source_rows: tuple[int | None, ...]
    recovery: tuple[RecoveryTerm, ...]

    @property
    def count(self) -> int:
        return int(self.patterns.shape[0])

    @property
    def rows(self) -> list[int]:
        return [term.row for term in self.recovery]

    def recovery_matrix(self) -> np.ndarray:
        """Complex matrix ``M`` with ``y = M @ measurements``."""
        matrix = np.zeros((len(self.recovery), self.count), dtype=np.complex128)
        for index, term in enumerate(self.recovery):
            w_re, w_im, w_one = term.weights
            matrix[index, term.re_pattern] += w_re
            matrix[index, term.im_pattern] += w_im
            matrix[index, term.ones_pattern] += w_one
        return matrix

    def recover(self, measurements: np.ndarray) -> np.ndarray:
        """Complex coefficients, ordered as ``self.rows``."""
        return self.recovery_matrix() @ np.asarray(measurements, dtype=np.float64)

    def permuted(self, destination: Sequence[int]) -> "BinaryPatternSet":
        """Move pattern ``i`` to position ``destination[i]``; recovery follows."""
        destination = np.asarray(destination, dtype=np.int64)
        if sorted(destination.tolist()) != list(range(self.count)):
            raise ValueError("destination must be a permutation of the pattern indices")
        patterns = np.empty_like(self.patterns)
        patterns[destination] = self.patterns
        sources: list[int | None] = [None] * self.count
        for old, new in enumerate(destination.tolist()):
            sources[new] = self.source_rows[old]
        return BinaryPatternSet(
            patterns=patterns,
            includes_ones_row=self.includes_ones_row,
            source_rows=tuple(sources),
            recovery=tuple(term.remapped(destination) for term in self.recovery),
        )
