from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator


def _default_schedule() -> Tuple[float, ...]:
    return tuple(float(mu) for mu in np.geomspace(0.1, 1e-4, 5))


class ReconConfig(BaseModel):
    epsilon: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="Data-fidelity radius; derived from noise_sigma when unset",
    )
    noise_sigma: float = Field(default=0.0, ge=0.0, description="Std-dev of each real measurement entry")
    mu_schedule: Tuple[float, ...] = Field(default_factory=_default_schedule)
    max_iters_per_stage: int = Field(default=500, ge=1)
    stop_tol: float = Field(default=1e-6, gt=0.0)
    block_width: int = Field(default=16, ge=1)

    @field_validator("mu_schedule")
    @classmethod
    def _check_schedule(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if not value:
            raise ValueError("mu_schedule needs at least one stage")
        if any(mu <= 0 for mu in value):
            raise ValueError("mu_schedule entries must be positive")
        if any(later >= earlier for earlier, later in zip(value, value[1:])):
            raise ValueError("mu_schedule must be strictly decreasing")
        return value

    def radius(self, constraint_count: int) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return self.noise_sigma * float(np.sqrt(constraint_count))


class BlockReport(BaseModel):
    index: int
    start_column: int
    width: int
    iterations: int
    stages: int
    residual: float = Field(description="Final ||A x - b|| before clamping")
    converged: bool
    wall_time_sec: float = 0.0


class ReconReport(BaseModel):
    method: str = "pooled"
    shape: Tuple[int, ...]
    blocks: List[BlockReport]
    wall_time_sec: float = 0.0

    @property
    def converged(self) -> bool:
        return all(block.converged for block in self.blocks)

    @property
    def total_iterations(self) -> int:
        return sum(block.iterations for block in self.blocks)

    def to_json(self) -> str:
        payload = self.model_dump(mode="json")
        payload["converged"] = self.converged
        return json.dumps(payload, indent=2)

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path
