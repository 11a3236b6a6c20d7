"""
Altman ratio and Z-score schemas
"""

import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

DISTRESS_THRESHOLD = 1.81
SAFE_THRESHOLD = 2.99
BANKRUPT_95_THRESHOLD = 2.675


class Zone(str, Enum):
    DISTRESS = "DISTRESS"
    GRAY = "GRAY"
    SAFE = "SAFE"


class RatioVector(BaseModel):
    """The five Altman ratios, stored as fractions"""
    model_config = ConfigDict(frozen=True)

    x1: float  # working capital / total assets
    x2: float  # retained earnings / total assets
    x3: float  # EBIT / total assets
    x4: float  # market value equity / total liabilities
    x5: float  # sales / total assets
    # x4 used book equity because market value equity was absent
    x4_proxy: bool = False

    @field_validator("x1", "x2", "x3", "x4", "x5")
    @classmethod
    def finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Ratios must be finite")
        return v

    def as_tuple(self):
        return (self.x1, self.x2, self.x3, self.x4, self.x5)

    def as_dict(self):
        return {"x1": self.x1, "x2": self.x2, "x3": self.x3, "x4": self.x4, "x5": self.x5}


class ZScoreResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    z: float
    zone: Zone
    bankrupt_95_flag: bool

    @model_validator(mode="after")
    def zone_matches_score(self):
        if self.zone == Zone.DISTRESS and not self.z <= DISTRESS_THRESHOLD:
            raise ValueError("Distress zone requires z <= 1.81")
        if self.zone == Zone.SAFE and not self.z >= SAFE_THRESHOLD:
            raise ValueError("Safe zone requires z >= 2.99")
        if self.zone == Zone.GRAY and not DISTRESS_THRESHOLD < self.z < SAFE_THRESHOLD:
            raise ValueError("Gray zone requires 1.81 < z < 2.99")
        if self.bankrupt_95_flag != (self.z < BANKRUPT_95_THRESHOLD):
            raise ValueError("bankrupt_95_flag must equal z < 2.675")
        return self
