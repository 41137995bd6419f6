"""Discrete noiselets: dense matrix, fast transform, conjugate pairing and binarization.

The order-2n basis is built from the order-n one with the two-term recursion
(coefficients (1-i)/2 and (1+i)/2) applied to the half-resolution rows. Row
``2k+a`` of the larger matrix takes row ``k`` of the smaller one on each half
of the support, which unrolls to a Kronecker power of the 2x2 kernel with a
bit-reversed row order. That structure gives the O(n log n) butterflies below.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Iterable, Literal, Sequence

import numpy as np

from .model import BinaryPatternSet, RecoveryTerm

logger = logging.getLogger(__name__)

MAX_ORDER_EXPONENT = 16
# Above this order the pairing is checked on sample rows instead of a full search.
DENSE_SEARCH_LIMIT = 10

_KERNEL = np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]], dtype=np.complex128) / 2.0
_KERNEL_ADJOINT = _KERNEL.conj().T

Direction = Literal["forward", "adjoint"]


class NoiseletSizeError(ValueError):
    """Raised for lengths that are not a supported power of two."""


class PairingError(ValueError):
    """Raised when a row selection is not closed under conjugate pairing."""


class ConventionMismatchError(RuntimeError):
    """Raised when a row has no conjugate partner under the implemented recursion."""


def order_exponent(length: int) -> int:
    if length < 1 or length & (length - 1):
        raise NoiseletSizeError(f"Noiselet length must be a power of two, got {length}")
    q = length.bit_length() - 1
    if q > MAX_ORDER_EXPONENT:
        raise NoiseletSizeError(f"Noiselet order 2^{q} exceeds the supported 2^{MAX_ORDER_EXPONENT}")
    return q


@lru_cache(maxsize=None)
def _bit_reversal(q: int) -> np.ndarray:
    index = np.arange(1 << q)
    reversed_index = np.zeros_like(index)
    for bit in range(q):
        reversed_index |= ((index >> bit) & 1) << (q - 1 - bit)
    reversed_index.setflags(write=False)
    return reversed_index


def _kron_apply(batch: np.ndarray, kernel: np.ndarray, q: int) -> np.ndarray:
    n, width = batch.shape
    work = batch
    for stage in range(q):
        left = 1 << stage
        right = n >> (stage + 1)
        work = np.einsum("ac,icjk->iajk", kernel, work.reshape(left, 2, right, width)).reshape(n, width)
    return work


def fast_noiselet(x: np.ndarray, direction: Direction = "forward") -> np.ndarray:
    """Apply ``N`` (forward) or ``N^H`` (adjoint) along axis 0.

    Accepts a vector of length n or an ``(n, k)`` array of column vectors.
    """
    data = np.asarray(x, dtype=np.complex128)
    if data.ndim == 0:
        raise NoiseletSizeError("fast_noiselet expects a vector or a stack of column vectors")
    n = data.shape[0]
    q = order_exponent(n)
    batch = data.reshape(n, -1)
    permutation = _bit_reversal(q)
    if direction == "forward":
        out = _kron_apply(batch, _KERNEL, q)[permutation]
    elif direction == "adjoint":
        out = _kron_apply(batch[permutation], _KERNEL_ADJOINT, q)
    else:
        raise ValueError(f"Unknown transform direction '{direction}'")
    return out.reshape(data.shape)


def noiselet_matrix(q: int) -> np.ndarray:
    """Dense unitary noiselet matrix of order ``2^q``."""
    if not 1 <= q <= MAX_ORDER_EXPONENT:
        raise NoiseletSizeError(f"Order exponent must lie in [1, {MAX_ORDER_EXPONENT}], got {q}")
    return fast_noiselet(np.eye(1 << q, dtype=np.complex128), "forward")


def noiselet_rows(q: int, indices: Sequence[int]) -> np.ndarray:
    """Rows of the order-2^q matrix without forming it: row j is conj(N^H e_j)."""
    n = 1 << q
    selected = np.asarray(list(indices), dtype=np.int64)
    basis = np.zeros((n, selected.size), dtype=np.complex128)
    basis[selected, np.arange(selected.size)] = 1.0
    return fast_noiselet(basis, "adjoint").conj().T


@lru_cache(maxsize=None)
def conjugate_pair_map(q: int) -> tuple[int, ...]:
    """Involution ``p`` with row ``p(j)`` equal to the conjugate of row ``j`` (0-based)."""
    if not 1 <= q <= MAX_ORDER_EXPONENT:
        raise NoiseletSizeError(f"Order exponent must lie in [1, {MAX_ORDER_EXPONENT}], got {q}")
    n = 1 << q
    formula = n - 1 - np.arange(n)

    if q > DENSE_SEARCH_LIMIT:
        spot_rows = sorted({0, 1, n // 4, n // 2 - 1, n // 2, n - 2, n - 1})
        rows = noiselet_rows(q, spot_rows)
        partners = noiselet_rows(q, formula[spot_rows])
        if not np.allclose(partners, rows.conj(), atol=1e-12):
            raise ConventionMismatchError(
                f"Pair formula j <-> n-1-j does not hold for order 2^{q}; no conjugate partner found"
            )
        return tuple(int(p) for p in formula)

    dense = noiselet_matrix(q)
    # gram[j, l] = <N_l, conj(N_j)>, which is 1 exactly for the conjugate partner.
    gram = dense @ dense.T
    partner = np.argmax(np.abs(gram), axis=1)
    for j, p in enumerate(partner):
        if p == j or not np.allclose(dense[p], dense[j].conj(), atol=1e-12):
            raise ConventionMismatchError(f"Row {j} of the order-{n} noiselet matrix has no conjugate partner")
    if not np.array_equal(partner[partner], np.arange(n)):
        raise ConventionMismatchError(f"Conjugate pairing at order {n} is not an involution")
    if not np.array_equal(partner, formula):
        mismatched = int(np.count_nonzero(partner != formula))
        logger.warning(
            "⚠️  Conjugate search disagrees with j <-> n-1-j on %d of %d rows at order %d; using search result",
            mismatched,
            n,
            n,
        )
    return tuple(int(p) for p in partner)


def _binarizing_rotation(q: int) -> complex:
    # Entries have phase k*pi/4 with k of the parity of q; rotating even orders by
    # pi/4 makes every real and imaginary part +-1/sqrt(2n).
    return 1.0 + 0.0j if q % 2 else complex(np.exp(1j * np.pi / 4))


def binarize(rows: Iterable[int], q: int) -> BinaryPatternSet:
    """Binary {0,1} patterns for a pair-closed row set, plus an all-ones row.

    Each conjugate pair contributes two patterns (signs of the real and imaginary
    parts of its lower-index member), so ``m`` complex rows need ``m + 1``
    patterns. Patterns are ordered pair by pair (real, imaginary) with the
    all-ones pattern last.
    """
    n = 1 << q
    pair = conjugate_pair_map(q)
    row_set = sorted({int(r) for r in rows})
    if any(r < 0 or r >= n for r in row_set):
        raise PairingError(f"Row indices must lie in [0, {n})")
    members = set(row_set)
    orphans = [r for r in row_set if pair[r] not in members]
    if orphans:
        raise PairingError(f"Row selection is not pair-closed; missing partners for rows {orphans[:8]}")

    representatives = [r for r in row_set if r < pair[r]]
    ones_index = 2 * len(representatives)
    patterns = np.zeros((ones_index + 1, n), dtype=np.uint8)
    patterns[ones_index] = 1
    sources: list[int | None] = []
    terms: list[RecoveryTerm] = []

    rotation = _binarizing_rotation(q)
    back = rotation.conjugate()
    scale = 1.0 / np.sqrt(2.0 * n)
    weights = (2.0 * scale * back, 2.0j * scale * back, -(1.0 + 1.0j) * scale * back)
    conjugate_weights = tuple(w.conjugate() for w in weights)

    if representatives:
        rotated = noiselet_rows(q, representatives) * rotation
        patterns[0:ones_index:2] = rotated.real > 0
        patterns[1:ones_index:2] = rotated.imag > 0

    for ordinal, rep in enumerate(representatives):
        re_pattern, im_pattern = 2 * ordinal, 2 * ordinal + 1
        sources.extend([rep, rep])
        terms.append(RecoveryTerm.from_weights(rep, re_pattern, im_pattern, ones_index, weights))
        terms.append(
            RecoveryTerm.from_weights(pair[rep], re_pattern, im_pattern, ones_index, conjugate_weights)
        )
    sources.append(None)

    return BinaryPatternSet(
        patterns=patterns,
        includes_ones_row=True,
        source_rows=tuple(sources),
        recovery=tuple(terms),
    )
