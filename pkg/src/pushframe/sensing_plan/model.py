from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from pushframe.noiselet.model import RecoveryTerm
from pushframe.noiselet.transform import conjugate_pair_map, order_exponent


class PlanIntegrityError(ValueError):
    """Raised when a serialized plan does not match the mask it claims to describe."""


class Ordering(str, Enum):
    PASTUSZCZAK = "pastuszczak"
    MIRRORED = "mirrored"


class SensingPlan(BaseModel):
    """Per-column row assignments for one block width, plus the SLM recovery data.

    Assignment ``k`` serves the ``k``-th column of every block, counted left to
    right in scene space. Row indices are 0-based.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=2, description="Column height and noiselet order")
    b: int = Field(ge=1, description="Block width in columns")
    m: int = Field(ge=0, description="Complex rows retained per column")
    ordering: Ordering = Ordering.MIRRORED
    seed: int = Field(ge=0)
    naive: bool = False
    assignments: Tuple[Tuple[int, ...], ...]
    recovery: Tuple[RecoveryTerm, ...]
    slm_hash: str

    _terms_by_row: dict[int, RecoveryTerm] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_assignments(self) -> "SensingPlan":
        order_exponent(self.n)
        if self.m % 2 or self.m > self.n:
            raise ValueError(f"m must be even and at most n={self.n}, got {self.m}")
        if len(self.assignments) != self.b:
            raise ValueError(f"Expected {self.b} assignments, got {len(self.assignments)}")
        pair = conjugate_pair_map(order_exponent(self.n))
        for index, rows in enumerate(self.assignments):
            members = set(rows)
            if len(rows) != self.m or len(members) != self.m:
                raise ValueError(f"Assignment {index} must hold {self.m} distinct rows")
            if any(pair[r] not in members for r in rows):
                raise ValueError(f"Assignment {index} is not pair-closed")
        self._terms_by_row.update({term.row: term for term in self.recovery})
        return self

    @property
    def rate(self) -> float:
        return self.m / self.n

    @property
    def order_exponent(self) -> int:
        return order_exponent(self.n)

    @property
    def slm(self) -> np.ndarray:
        """The full ``n x (n+1)`` mask; column ``c`` is pattern ``c``."""
        from .planner import build_slm

        return build_slm(self.n, self.ordering)

    def term(self, row: int) -> RecoveryTerm:
        return self._terms_by_row[row]

    def assignment_for_column(self, column: int) -> Tuple[int, ...]:
        return self.assignments[column % self.b]

    def patterns_for_column(self, column: int) -> list[int]:
        """SLM pattern indices a scene column needs: its rows' patterns plus all-ones."""
        needed: set[int] = set()
        for row in self.assignment_for_column(column):
            term = self.term(row)
            needed.update((term.re_pattern, term.im_pattern))
        needed.add(self.n)
        return sorted(needed)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SensingPlan":
        from .planner import slm_digest

        plan = cls.model_validate_json(text)
        expected = slm_digest(plan.slm)
        if plan.slm_hash != expected:
            raise PlanIntegrityError(
                f"Plan slm_hash {plan.slm_hash[:12]}... does not match the regenerated mask {expected[:12]}..."
            )
        return plan

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path) -> "SensingPlan":
        return cls.from_json(path.read_text(encoding="utf-8"))
