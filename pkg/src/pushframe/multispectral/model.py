from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

from pydantic import BaseModel, Field

from pushframe.capture_sim.model import SampleMatrix
from pushframe.sensing_plan.model import SensingPlan


@dataclass(frozen=True)
class BandSamples:
    """Full-rate captures of the three colour bands and the pan set derived from them."""

    red: SampleMatrix
    green: SampleMatrix
    blue: SampleMatrix
    pan: SampleMatrix

    @property
    def bands(self) -> tuple[SampleMatrix, SampleMatrix, SampleMatrix]:
        return (self.red, self.green, self.blue)


@dataclass(frozen=True)
class RetainedSamples:
    """Samples with discarded pattern columns set to NaN, and the plan that chose what to keep."""

    samples: SampleMatrix
    plan: SensingPlan

    @property
    def kept_fraction(self) -> float:
        return self.plan.m / self.plan.n


class PanSweepRow(BaseModel):
    mbar: float = Field(description="Effective complex rows per band, m_pan/3 + m_band")
    mbar_rate: float
    route: Literal["pan", "independent"]
    m_pan: int = Field(ge=0)
    m_band: int = Field(ge=0)
    psnr: float
    ssim: float
    best_by: Optional[Literal["ssim", "psnr", "both"]] = None
    requested: bool = Field(default=True, description="False for pan points that only trace the curve below a requested rate")


class SampleSavings(BaseModel):
    """Fraction of the independent route's samples the pan route needs for equal quality."""

    mbar_rate: float
    metric: Literal["ssim", "psnr"]
    target: float
    matching_rate: Optional[float] = None
    fraction: Optional[float] = None
