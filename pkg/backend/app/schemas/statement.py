"""
Financial statement schemas: line items, totals, supplemental figures, validation reports
"""

from decimal import Decimal
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from ..utils.validation import InputValidator

ZERO = Decimal("0.00")


class StatementFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class LineItemCategory(str, Enum):
    CURRENT_ASSET = "CurrentAsset"
    LONG_TERM_ASSET = "LongTermAsset"
    CURRENT_LIABILITY = "CurrentLiability"
    LONG_TERM_LIABILITY = "LongTermLiability"
    EQUITY = "Equity"
    SUPPLEMENTAL = "Supplemental"


class LineItem(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    amount: Decimal
    category: LineItemCategory
    # Columns the computations ignore, e.g. "prior_mo", "ytd", "prior_yr"
    metadata: Dict[str, str] = {}

    @field_validator("name")
    @classmethod
    def name_not_empty(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("Line item name must not be empty")
        return v

    @field_validator("amount")
    @classmethod
    def amount_in_cents(cls, v: Decimal) -> Decimal:
        if not v.is_finite():
            raise ValueError("Line item amount must be finite")
        return v.quantize(Decimal("0.01"))


class StatementTotals(BaseModel):
    model_config = ConfigDict(frozen=True)

    total_current_assets: Decimal = ZERO
    total_long_term_assets: Decimal = ZERO
    total_assets: Decimal = ZERO
    total_current_liabilities: Decimal = ZERO
    total_long_term_liabilities: Decimal = ZERO
    total_liabilities: Decimal = ZERO
    equity: Decimal = ZERO


class DeclaredTotals(BaseModel):
    """Totals as printed on the source statement; None where no total row exists"""
    model_config = ConfigDict(frozen=True)

    total_current_assets: Optional[Decimal] = None
    total_long_term_assets: Optional[Decimal] = None
    total_assets: Optional[Decimal] = None
    total_current_liabilities: Optional[Decimal] = None
    total_long_term_liabilities: Optional[Decimal] = None
    total_liabilities: Optional[Decimal] = None
    equity: Optional[Decimal] = None

    def present(self) -> Dict[str, Decimal]:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class SupplementalFigures(BaseModel):
    """Income statement and market inputs the balance sheet cannot supply"""
    model_config = ConfigDict(frozen=True)

    sales: Optional[Decimal] = None
    ebit: Optional[Decimal] = None
    retained_earnings: Optional[Decimal] = None
    market_value_equity: Optional[Decimal] = None

    @field_validator("sales", "ebit", "retained_earnings", "market_value_equity")
    @classmethod
    def finite(cls, v: Optional[Decimal]) -> Optional[Decimal]:
        if v is not None and not v.is_finite():
            raise ValueError("Supplemental figures must be finite")
        return v

    def missing(self) -> List[str]:
        return [k for k, v in self.model_dump().items() if v is None]


# Category sums feeding each derived subtotal
_CATEGORY_TOTALS = {
    LineItemCategory.CURRENT_ASSET: "total_current_assets",
    LineItemCategory.LONG_TERM_ASSET: "total_long_term_assets",
    LineItemCategory.CURRENT_LIABILITY: "total_current_liabilities",
    LineItemCategory.LONG_TERM_LIABILITY: "total_long_term_liabilities",
    LineItemCategory.EQUITY: "equity",
}


class FinancialStatement(BaseModel):
    """One firm-period: balance-sheet line items plus supplemental figures"""
    model_config = ConfigDict(frozen=True)

    firm_id: str
    period: str
    items: Tuple[LineItem, ...] = ()
    declared_totals: DeclaredTotals = DeclaredTotals()
    supplemental: SupplementalFigures = SupplementalFigures()

    @field_validator("firm_id")
    @classmethod
    def firm_id_not_empty(cls, v: str) -> str:
        v = v.strip()
        if not v:
            raise ValueError("firm_id must not be empty")
        return v

    @field_validator("period", mode="before")
    @classmethod
    def normalize_period(cls, v) -> str:
        normalized = InputValidator.normalize_period(v)
        if normalized is None:
            raise ValueError(f"Unrecognized period: {v!r}")
        return normalized

    @model_validator(mode="after")
    def unique_items(self):
        seen = set()
        for item in self.items:
            key = (item.name, item.category)
            if key in seen:
                raise ValueError(f"Duplicate line item {item.name!r} in category {item.category.value}")
            seen.add(key)
        return self

    @property
    def key(self) -> Tuple[str, str]:
        return (self.firm_id, self.period)

    @property
    def derived_totals(self) -> StatementTotals:
        """Totals recomputed from component rows only"""
        sums = {field: ZERO for field in _CATEGORY_TOTALS.values()}
        for item in self.items:
            field = _CATEGORY_TOTALS.get(item.category)
            if field:
                sums[field] += item.amount
        return StatementTotals(
            total_assets=sums["total_current_assets"] + sums["total_long_term_assets"],
            total_liabilities=sums["total_current_liabilities"] + sums["total_long_term_liabilities"],
            **sums,
        )

    @property
    def totals(self) -> StatementTotals:
        """Effective totals: declared where a total row exists, derived otherwise"""
        derived = self.derived_totals.model_dump()
        derived.update(self.declared_totals.present())
        return StatementTotals(**derived)

    def items_in(self, category: LineItemCategory) -> List[LineItem]:
        return [item for item in self.items if item.category == category]


class ValidationCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    check_name: str
    expected: Decimal
    actual: Decimal
    relative_error: float
    passed: bool


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    firm_id: str
    period: str
    tolerance: float
    checks: Tuple[ValidationCheck, ...] = ()

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failed_checks(self) -> List[str]:
        return [check.check_name for check in self.checks if not check.passed]

    def check(self, name: str) -> ValidationCheck:
        for check in self.checks:
            if check.check_name == name:
                return check
        raise KeyError(name)
