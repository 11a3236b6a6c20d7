"""
Pipeline schemas: run configuration and the bankruptcy report
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .mining import MiningConfig
from .statement import StatementFormat


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    MARKDOWN = "md"


class OwlMode(str, Enum):
    MERGED = "merged"
    PER_FIRM = "per_firm"


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    inputs: Tuple[Path, ...] = Field(..., min_length=1)
    # None: take the format from each file suffix
    format: Optional[StatementFormat] = None
    tolerance: float = Field(default=1e-3, ge=0)
    mining: MiningConfig = MiningConfig()
    x4_fallback: bool = False
    scope: Optional[str] = None
    out_dir: Path
    report_formats: FrozenSet[ReportFormat] = frozenset({ReportFormat.JSON})
    owl_mode: OwlMode = OwlMode.MERGED
    top_n_rules: int = Field(default=5, ge=0)
    workers: int = Field(default=1, ge=1)

    @field_validator("report_formats")
    @classmethod
    def at_least_one_format(cls, v):
        if not v:
            raise ValueError("At least one report format is required")
        return v


class ValidationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    passed: bool
    failed_checks: Tuple[str, ...] = ()
    max_relative_error: float = 0.0


class FirmReportEntry(BaseModel):
    """One firm-period row of the bankruptcy report"""
    model_config = ConfigDict(frozen=True)

    firm_id: str
    period: str
    source: str
    ratios: Optional[Dict[str, float]] = None
    z: Optional[float] = None
    zone: Optional[str] = None
    bankrupt_95_flag: Optional[bool] = None
    x4_proxy: bool = False
    validation: ValidationSummary
    cluster: Optional[int] = None
    in_scope: bool = True
    rules: Tuple[Dict[str, Any], ...] = ()
    errors: Tuple[Dict[str, Any], ...] = ()

    @property
    def scored(self) -> bool:
        return self.z is not None


class InputFailure(BaseModel):
    """A source file that produced no statement"""
    model_config = ConfigDict(frozen=True)

    source: str
    error: Dict[str, Any]


class BankruptcyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    firms: Tuple[FirmReportEntry, ...] = ()
    input_failures: Tuple[InputFailure, ...] = ()
    zone_counts: Dict[str, int] = {}
    rules: Tuple[Dict[str, Any], ...] = ()
    transactions: int = 0
    clusters: int = 0
    warnings: Tuple[str, ...] = ()

    @property
    def partial_failure(self) -> bool:
        return bool(self.input_failures) or any(not entry.scored or entry.errors for entry in self.firms)

    def as_document(self) -> Dict[str, Any]:
        return {
            "firms": [entry.model_dump(mode="json", exclude={"source"}) for entry in self.firms],
            "input_failures": [failure.model_dump(mode="json") for failure in self.input_failures],
            "zone_counts": dict(sorted(self.zone_counts.items())),
            "rules": list(self.rules),
            "transactions": self.transactions,
            "clusters": self.clusters,
            "warnings": list(self.warnings),
        }

    def firm_rows(self) -> List[Dict[str, Any]]:
        """Flat per-firm records shared by every tabular format"""
        rows = []
        for entry in self.firms:
            ratios = entry.ratios or {}
            rows.append({
                "firm_id": entry.firm_id,
                "period": entry.period,
                "x1": ratios.get("x1"),
                "x2": ratios.get("x2"),
                "x3": ratios.get("x3"),
                "x4": ratios.get("x4"),
                "x5": ratios.get("x5"),
                "z": entry.z,
                "zone": entry.zone,
                "bankrupt_95_flag": entry.bankrupt_95_flag,
                "x4_proxy": entry.x4_proxy,
                "validation_passed": entry.validation.passed,
                "failed_checks": ";".join(entry.validation.failed_checks),
                "cluster": entry.cluster,
                "errors": ";".join(error["code"] for error in entry.errors),
            })
        return rows
