"""
Statement Service - parses, serializes and validates firm financial statements
"""

import csv
import io
import json
import logging
from decimal import Decimal
from typing import Any, Dict, Iterable, List, Optional, TextIO, Tuple, Union

from pydantic import ValidationError

from ..schemas.statement import (
    DeclaredTotals,
    FinancialStatement,
    LineItem,
    LineItemCategory,
    StatementFormat,
    SupplementalFigures,
    ValidationCheck,
    ValidationReport,
)
from ..utils.error_handlers import (
    ContractViolationError,
    DuplicateItemError,
    StatementParseError,
    UnknownCategoryError,
)
from ..utils.validation import InputValidator

logger = logging.getLogger("bilanz.statement")

Source = Union[str, TextIO]

# Declared total rows, matched on InputValidator.label_key of the row name
TOTAL_LABELS = {
    "totalcurrentassets": "total_current_assets",
    "totallongtermassets": "total_long_term_assets",
    "totalfixedassets": "total_long_term_assets",
    "totalassets": "total_assets",
    "totalcurrentliabilities": "total_current_liabilities",
    "totallongtermliabilities": "total_long_term_liabilities",
    "totalliabilities": "total_liabilities",
    "totalequity": "equity",
    "totalownersequity": "equity",
    "totalshareholdersequity": "equity",
    "overalltotal": "equity",
}

# Canonical rows written back by serialize_statement
TOTAL_ROWS = {
    "total_current_assets": ("Total Current Assets", LineItemCategory.CURRENT_ASSET),
    "total_long_term_assets": ("Total Long-term Assets", LineItemCategory.LONG_TERM_ASSET),
    "total_assets": ("Total Assets", LineItemCategory.LONG_TERM_ASSET),
    "total_current_liabilities": ("Total Current Liabilities", LineItemCategory.CURRENT_LIABILITY),
    "total_long_term_liabilities": ("Total Long-term Liabilities", LineItemCategory.LONG_TERM_LIABILITY),
    "total_liabilities": ("Total Liabilities", LineItemCategory.LONG_TERM_LIABILITY),
    "equity": ("Total Equity", LineItemCategory.EQUITY),
}

SUPPLEMENTAL_LABELS = {
    "sales": "sales",
    "ebit": "ebit",
    "retainedearnings": "retained_earnings",
    "marketvalueequity": "market_value_equity",
    "marketvalueofequity": "market_value_equity",
}

SUPPLEMENTAL_ROWS = {
    "sales": "Sales",
    "ebit": "EBIT",
    "retained_earnings": "Retained Earnings",
    "market_value_equity": "Market Value Equity",
}

_CATEGORY_LOOKUP = {InputValidator.label_key(c.value): c for c in LineItemCategory}

# Subtotals checked against their component rows
_SUBTOTALS = (
    ("total_current_assets", LineItemCategory.CURRENT_ASSET),
    ("total_long_term_assets", LineItemCategory.LONG_TERM_ASSET),
    ("total_current_liabilities", LineItemCategory.CURRENT_LIABILITY),
    ("total_long_term_liabilities", LineItemCategory.LONG_TERM_LIABILITY),
)

CSV_HEADER = ("name", "category", "amount")


def _read(source: Source) -> str:
    return source if isinstance(source, str) else source.read()


def _amount_to_json(amount: Decimal):
    """JSON number when exact, else the decimal text (parse_amount reads both)"""
    if amount == amount.to_integral_value():
        return int(amount)
    as_float = float(amount)
    if Decimal(repr(as_float)) == amount:
        return as_float
    return str(amount)


class _StatementAssembler:
    """Collects rows in order and enforces the row-level rules"""

    def __init__(self):
        self.items: List[LineItem] = []
        self.totals: Dict[str, Decimal] = {}
        self.supplemental: Dict[str, Decimal] = {}
        self._seen: set = set()

    def add_row(self, name: str, category_label: str, amount_text: Any,
                line: Optional[int], metadata: Optional[Dict[str, str]] = None):
        if name is not None and not isinstance(name, str):
            raise StatementParseError(f"Row name must be text, got {name!r}", line=line)
        name = (name or "").strip()
        if not name:
            raise StatementParseError("Row has an empty name", line=line)

        category = _CATEGORY_LOOKUP.get(InputValidator.label_key(str(category_label or "")))
        if category is None:
            raise UnknownCategoryError(str(category_label), line=line)

        if isinstance(amount_text, Decimal):
            amount = amount_text.quantize(Decimal("0.01")) if amount_text.is_finite() else None
        else:
            amount = InputValidator.parse_amount(amount_text)
        if amount is None:
            raise StatementParseError(f"Invalid amount {amount_text!r} for {name!r}", line=line)

        key = InputValidator.label_key(name)
        if key in TOTAL_LABELS:
            field = TOTAL_LABELS[key]
            if field in self.totals:
                raise DuplicateItemError(name, category.value, line=line)
            self.totals[field] = amount
            return

        if category == LineItemCategory.SUPPLEMENTAL and key in SUPPLEMENTAL_LABELS:
            field = SUPPLEMENTAL_LABELS[key]
            if field in self.supplemental:
                raise DuplicateItemError(name, category.value, line=line)
            self.supplemental[field] = amount
            return

        if (name, category) in self._seen:
            raise DuplicateItemError(name, category.value, line=line)
        self._seen.add((name, category))
        self.items.append(LineItem(name=name, category=category, amount=amount, metadata=metadata or {}))

    def build(self, firm_id: Optional[str], period: Optional[str],
              supplemental: Optional[Dict[str, Decimal]] = None) -> FinancialStatement:
        if not firm_id:
            raise StatementParseError("Statement has no firm_id")
        if not period:
            raise StatementParseError("Statement has no period")
        figures = dict(self.supplemental)
        for field, value in (supplemental or {}).items():
            if field in figures:
                raise DuplicateItemError(SUPPLEMENTAL_ROWS[field], LineItemCategory.SUPPLEMENTAL.value)
            figures[field] = value
        try:
            return FinancialStatement(
                firm_id=firm_id,
                period=period,
                items=tuple(self.items),
                declared_totals=DeclaredTotals(**self.totals),
                supplemental=SupplementalFigures(**figures),
            )
        except ValidationError as exc:
            raise StatementParseError(exc.errors()[0]["msg"])


class StatementService:
    """Service for statement ingestion and accounting-identity validation"""

    def __init__(self, default_tolerance: float = 1e-3):
        self.default_tolerance = default_tolerance

    def parse_statement(
        self,
        source: Source,
        fmt: StatementFormat = StatementFormat.CSV,
        *,
        firm_id: Optional[str] = None,
        period: Optional[str] = None,
        default_firm_id: Optional[str] = None,
    ) -> FinancialStatement:
        """
        Parse one firm-period from a CSV or JSON source

        Args:
            source: text or text stream
            fmt: declared format
            firm_id / period: override what the document declares
            default_firm_id: used when neither the document nor firm_id names the firm

        Returns:
            FinancialStatement with declared totals preserved
        """
        text = _read(source)
        fmt = StatementFormat(fmt)
        if fmt == StatementFormat.CSV:
            stmt = self._parse_csv(text, firm_id, period, default_firm_id)
        else:
            stmt = self._parse_json(text, firm_id, period, default_firm_id)
        logger.debug(f"Parsed {stmt.firm_id} {stmt.period}: {len(stmt.items)} items")
        return stmt

    def _parse_csv(self, text: str, firm_id, period, default_firm_id) -> FinancialStatement:
        directives: Dict[str, str] = {}
        assembler = _StatementAssembler()
        header: Optional[List[str]] = None

        for line_no, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            if not stripped:
                continue
            # Directives and comments only precede the header; later "#" rows are data
            if header is None and stripped.startswith("#"):
                body = stripped.lstrip("#").strip()
                for sep in (":", "="):
                    if sep in body:
                        key, value = body.split(sep, 1)
                        directives[key.strip().lower()] = value.strip()
                        break
                continue

            try:
                row = next(csv.reader([raw], skipinitialspace=True))
            except csv.Error as exc:
                raise StatementParseError(f"Malformed CSV row: {exc}", line=line_no)

            if header is None:
                header = [cell.strip().lower() for cell in row]
                if tuple(header[:3]) != CSV_HEADER:
                    raise StatementParseError(
                        f"Expected header starting with {','.join(CSV_HEADER)}, got {','.join(header)}",
                        line=line_no,
                    )
                continue

            while len(row) > len(header) and not row[-1].strip():
                row.pop()
            if len(row) != len(header):
                raise StatementParseError(
                    f"Expected {len(header)} columns, found {len(row)}", line=line_no
                )
            metadata = {
                column: cell.strip()
                for column, cell in zip(header[3:], row[3:])
                if cell.strip()
            }
            assembler.add_row(row[0], row[1], row[2], line_no, metadata)

        return assembler.build(
            firm_id or directives.get("firm_id") or default_firm_id,
            period or directives.get("period"),
        )

    def _parse_json(self, text: str, firm_id, period, default_firm_id) -> FinancialStatement:
        try:
            document = json.loads(text, parse_float=Decimal, parse_int=Decimal)
        except json.JSONDecodeError as exc:
            raise StatementParseError(f"Malformed JSON: {exc.msg}", line=exc.lineno, details={"column": exc.colno})

        if not isinstance(document, dict):
            raise StatementParseError("Statement document must be a JSON object")
        items = document.get("items", [])
        if not isinstance(items, list):
            raise StatementParseError("'items' must be a list")

        assembler = _StatementAssembler()
        for index, row in enumerate(items):
            if not isinstance(row, dict) or "amount" not in row:
                raise StatementParseError(f"Item {index} must be an object with name, category and amount",
                                          details={"item": index})
            if row.get("name") is not None and not isinstance(row["name"], str):
                raise StatementParseError(f"Item {index} name must be a string", details={"item": index})
            metadata = row.get("metadata") or {}
            if not isinstance(metadata, dict):
                raise StatementParseError(f"Item {index} metadata must be an object", details={"item": index})
            assembler.add_row(
                row.get("name"),
                row.get("category"),
                row["amount"] if isinstance(row["amount"], Decimal) else str(row["amount"]),
                None,
                {str(k): str(v) for k, v in metadata.items()},
            )

        declared_supplemental = document.get("supplemental") or {}
        if not isinstance(declared_supplemental, dict):
            raise StatementParseError("'supplemental' must be an object")
        supplemental = {}
        for field, value in declared_supplemental.items():
            if field not in SUPPLEMENTAL_ROWS:
                raise StatementParseError(f"Unknown supplemental field {field!r}")
            if value is None:
                continue
            amount = InputValidator.parse_amount(str(value))
            if amount is None:
                raise StatementParseError(f"Invalid supplemental amount {value!r} for {field}")
            supplemental[field] = amount

        declared_period = document.get("period")
        return assembler.build(
            firm_id or document.get("firm_id") or default_firm_id,
            period or (str(declared_period) if declared_period is not None else None),
            supplemental,
        )

    def serialize_statement(self, stmt: FinancialStatement, fmt: StatementFormat = StatementFormat.CSV) -> str:
        """Inverse of parse_statement"""
        fmt = StatementFormat(fmt)
        if fmt == StatementFormat.JSON:
            return self._serialize_json(stmt)
        return self._serialize_csv(stmt)

    def _rows(self, stmt: FinancialStatement) -> Iterable[Tuple[str, LineItemCategory, Decimal, Dict[str, str]]]:
        for item in stmt.items:
            yield item.name, item.category, item.amount, item.metadata
        for field, amount in stmt.declared_totals.present().items():
            label, category = TOTAL_ROWS[field]
            yield label, category, amount, {}

    def _serialize_csv(self, stmt: FinancialStatement) -> str:
        metadata_columns = sorted({key for item in stmt.items for key in item.metadata})
        buffer = io.StringIO()
        buffer.write(f"# firm_id: {stmt.firm_id}\n")
        buffer.write(f"# period: {stmt.period}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(list(CSV_HEADER) + metadata_columns)
        for name, category, amount, metadata in self._rows(stmt):
            writer.writerow([name, category.value, str(amount)] + [metadata.get(c, "") for c in metadata_columns])
        for field, value in stmt.supplemental.model_dump().items():
            if value is not None:
                writer.writerow([SUPPLEMENTAL_ROWS[field], LineItemCategory.SUPPLEMENTAL.value, str(value)]
                                + [""] * len(metadata_columns))
        return buffer.getvalue()

    def _serialize_json(self, stmt: FinancialStatement) -> str:
        items = []
        for name, category, amount, metadata in self._rows(stmt):
            row = {"name": name, "category": category.value, "amount": _amount_to_json(amount)}
            if metadata:
                row["metadata"] = dict(sorted(metadata.items()))
            items.append(row)
        document = {
            "firm_id": stmt.firm_id,
            "period": stmt.period,
            "items": items,
            "supplemental": {
                field: (_amount_to_json(value) if value is not None else None)
                for field, value in stmt.supplemental.model_dump().items()
            },
        }
        return json.dumps(document, indent=2) + "\n"

    def validate(self, stmt: FinancialStatement, tolerance: Optional[float] = None) -> ValidationReport:
        """
        Check declared totals against component sums and the balance identity

        Inconsistencies are reported, never raised.
        """
        tolerance = self.default_tolerance if tolerance is None else tolerance
        if tolerance < 0:
            raise ContractViolationError("Validation tolerance must be non-negative", {"tolerance": tolerance})

        derived = stmt.derived_totals
        effective = stmt.totals
        declared = stmt.declared_totals
        checks: List[ValidationCheck] = []

        for field, category in _SUBTOTALS:
            declared_value = getattr(declared, field)
            if declared_value is None or not stmt.items_in(category):
                continue
            checks.append(self._check(field, getattr(derived, field), declared_value, tolerance))

        checks.append(self._check(
            "total_assets",
            effective.total_current_assets + effective.total_long_term_assets,
            effective.total_assets,
            tolerance,
        ))
        checks.append(self._check(
            "total_liabilities",
            effective.total_current_liabilities + effective.total_long_term_liabilities,
            effective.total_liabilities,
            tolerance,
        ))
        checks.append(self._check(
            "balance_identity",
            effective.total_assets - effective.total_liabilities,
            effective.equity,
            tolerance,
        ))

        report = ValidationReport(
            firm_id=stmt.firm_id,
            period=stmt.period,
            tolerance=tolerance,
            checks=tuple(checks),
        )
        if not report.passed:
            logger.warning(
                f"Statement {stmt.firm_id} {stmt.period} failed checks: {', '.join(report.failed_checks)}",
                extra={"firm_id": stmt.firm_id, "period": stmt.period},
            )
        return report

    @staticmethod
    def _check(name: str, expected: Decimal, actual: Decimal, tolerance: float) -> ValidationCheck:
        relative_error = float(abs(expected - actual) / max(abs(expected), Decimal(1)))
        return ValidationCheck(
            check_name=name,
            expected=expected,
            actual=actual,
            relative_error=relative_error,
            passed=relative_error <= tolerance,
        )

    def working_capital(self, stmt: FinancialStatement) -> Decimal:
        """Current assets minus current liabilities; may be negative"""
        totals = stmt.totals
        return totals.total_current_assets - totals.total_current_liabilities


statement_service = StatementService()
