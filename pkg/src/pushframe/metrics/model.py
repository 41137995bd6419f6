from __future__ import annotations

import math

from pydantic import BaseModel, Field


class QualityReport(BaseModel):
    psnr_db: float = Field(description="Peak signal-to-noise ratio; +inf for identical images")
    ssim: float = Field(ge=-1.0, le=1.0)

    @property
    def identical(self) -> bool:
        return math.isinf(self.psnr_db)

    def as_row(self) -> dict[str, float]:
        return {"psnr": self.psnr_db, "ssim": self.ssim}
