"""
Error hierarchy and error rendering
Provides consistent error codes, report payloads and CLI exit codes
"""

import logging
from typing import Any, Dict, Optional

logger = logging.getLogger("bilanz.errors")


class BilanzException(Exception):
    """Base exception for bilanz"""
    def __init__(self, message: str, error_code: str = "BILANZ_ERROR", details: Optional[dict] = None):
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)


class StatementParseError(BilanzException):
    """Malformed statement input; details carry the offending line"""
    def __init__(self, message: str, line: Optional[int] = None, details: Optional[dict] = None):
        details = dict(details or {})
        if line is not None:
            details["line"] = line
            message = f"line {line}: {message}"
        self.line = line
        super().__init__(message, "PARSE_ERROR", details)


class UnknownCategoryError(BilanzException):
    """A line item names a category outside the closed set"""
    def __init__(self, label: str, line: Optional[int] = None):
        details = {"label": label}
        message = f"Unknown line-item category: {label!r}"
        if line is not None:
            details["line"] = line
            message = f"line {line}: {message}"
        super().__init__(message, "UNKNOWN_CATEGORY", details)


class DuplicateItemError(BilanzException):
    """Two line items share (name, category)"""
    def __init__(self, name: str, category: str, line: Optional[int] = None):
        details = {"name": name, "category": category}
        message = f"Duplicate line item {name!r} in category {category}"
        if line is not None:
            details["line"] = line
            message = f"line {line}: {message}"
        super().__init__(message, "DUPLICATE_ITEM", details)


class DivisionDomainError(BilanzException):
    """A ratio denominator is zero"""
    def __init__(self, ratio: str, denominator: str):
        super().__init__(
            f"Cannot compute {ratio}: {denominator} is zero",
            "DIVISION_DOMAIN",
            {"ratio": ratio, "denominator": denominator},
        )


class MissingInputError(BilanzException):
    """A supplemental figure required by the score is absent"""
    def __init__(self, field: str):
        super().__init__(
            f"Missing supplemental figure: {field}",
            "MISSING_INPUT",
            {"field": field},
        )


class ScoringDomainError(BilanzException):
    """Non-finite input to the discriminant"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "DOMAIN_ERROR", details)


class OntologyConstructionError(BilanzException):
    """The ontology tree cannot be built as requested"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "ONTOLOGY_ERROR", details)


class OwlParseError(BilanzException):
    """OWL document is malformed or leaves the supported subset"""
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        details = {}
        if line is not None:
            details["line"] = line
        if column is not None:
            details["column"] = column
        super().__init__(message, "OWL_PARSE_ERROR", details)


class OwlResolutionError(BilanzException):
    """OWL document references an undeclared class"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "OWL_RESOLUTION_ERROR", details)


class ClassLookupError(BilanzException):
    """Requested class id is not in the tree"""
    def __init__(self, class_id: str):
        super().__init__(f"Unknown ontology class: {class_id}", "CLASS_LOOKUP_ERROR", {"class_id": class_id})


class ConfigurationError(BilanzException):
    """Invalid run or mining configuration"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "CONFIG_ERROR", details)


class ContractViolationError(BilanzException):
    """Caller broke an operation precondition"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "CONTRACT_VIOLATION", details)


class InternalConsistencyError(BilanzException):
    """Intermediate results contradict each other"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "INTERNAL_CONSISTENCY", details)


class PipelineError(BilanzException):
    """The run cannot produce a report"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "PIPELINE_ERROR", details)


class ReportWriteError(BilanzException):
    """Report files cannot be written"""
    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message, "IO_ERROR", details)


# CLI exit codes per error code; anything unlisted is a pipeline failure
EXIT_CODE_MAP = {
    "CONFIG_ERROR": 2,
    "PIPELINE_ERROR": 2,
    "IO_ERROR": 2,
    "CLASS_LOOKUP_ERROR": 2,
}


def error_payload(exc: Exception) -> Dict[str, Any]:
    """
    Render an exception as a report annotation
    """
    if isinstance(exc, BilanzException):
        return {
            "code": exc.error_code,
            "message": exc.message,
            "details": exc.details,
        }
    if isinstance(exc, OSError):
        return {
            "code": "IO_ERROR",
            "message": exc.strerror or str(exc),
            "details": {"path": str(exc.filename) if exc.filename else None},
        }
    return {
        "code": "INTERNAL_ERROR",
        "message": str(exc),
        "details": {"error_type": type(exc).__name__},
    }


def exit_code_for(exc: Exception) -> int:
    """Map an exception escaping the pipeline to a CLI exit code"""
    if isinstance(exc, BilanzException):
        code = EXIT_CODE_MAP.get(exc.error_code, 2)
        logger.error(f"{exc.error_code} - {exc.message}", extra={"error_code": exc.error_code})
        return code
    logger.error(f"Unexpected error: {exc}", exc_info=True)
    return 2
