"""
Logging Configuration
Structured logging with JSON format and proper log levels
"""

import logging
import json
import sys
from datetime import datetime, timezone
from typing import Optional


# Structured extras copied into the JSON record when present
EXTRA_FIELDS = (
    "event",
    "firm_id",
    "period",
    "stage",
    "error_code",
    "count",
    "path",
    "duration_ms",
)


class JSONFormatter(logging.Formatter):
    """
    Custom JSON formatter for structured logging
    """

    def format(self, record: logging.LogRecord) -> str:
        """Format log record as JSON"""
        log_entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        # Add exception info if present
        if record.exc_info:
            log_entry["exception"] = self.formatException(record.exc_info)

        for field in EXTRA_FIELDS:
            if hasattr(record, field):
                log_entry[field] = getattr(record, field)

        return json.dumps(log_entry, default=str)


class PipelineLogger:
    """
    Business event logging for pipeline stages
    """

    def __init__(self):
        self.logger = logging.getLogger("bilanz.pipeline")

    def log_statement_parsed(self, firm_id: str, period: str, item_count: int, path: Optional[str] = None):
        """Log a parsed statement"""
        self.logger.info(
            f"Statement parsed: {firm_id} {period} ({item_count} items)",
            extra={
                "event": "statement_parsed",
                "firm_id": firm_id,
                "period": period,
                "count": item_count,
                "path": path,
            }
        )

    def log_validation(self, firm_id: str, period: str, failed_checks: int):
        """Log a validation outcome"""
        level = logging.WARNING if failed_checks else logging.INFO
        self.logger.log(
            level,
            f"Validation for {firm_id} {period}: {failed_checks} failed checks",
            extra={
                "event": "statement_validated",
                "firm_id": firm_id,
                "period": period,
                "count": failed_checks,
            }
        )

    def log_score(self, firm_id: str, period: str, z: float, zone: str):
        """Log a scored firm-period"""
        self.logger.info(
            f"Scored {firm_id} {period}: Z={z:.4f} ({zone})",
            extra={
                "event": "firm_scored",
                "firm_id": firm_id,
                "period": period,
            }
        )

    def log_failure(self, stage: str, error_code: str, message: str,
                    firm_id: Optional[str] = None, period: Optional[str] = None):
        """Log a per-firm failure that the run tolerates"""
        self.logger.warning(
            f"{stage} failed for {firm_id or '?'} {period or ''}: {message}",
            extra={
                "event": "firm_failed",
                "stage": stage,
                "error_code": error_code,
                "firm_id": firm_id,
                "period": period,
            }
        )

    def log_firm_processed(self, firm_id: str, period: str, duration_ms: float):
        """Log the time spent parsing, validating and scoring one firm-period"""
        self.logger.debug(
            f"Processed {firm_id} {period} in {duration_ms:.1f}ms",
            extra={
                "event": "firm_processed",
                "firm_id": firm_id,
                "period": period,
                "duration_ms": round(duration_ms, 3),
            }
        )

    def log_mining(self, scope: str, itemsets: int, rules: int):
        """Log a mining pass"""
        self.logger.info(
            f"Mining {scope}: {itemsets} frequent itemsets, {rules} rules",
            extra={
                "event": "mining_finished",
                "stage": scope,
                "count": rules,
            }
        )

    def log_report_written(self, path: str):
        """Log an output artifact"""
        self.logger.info(
            f"Wrote {path}",
            extra={"event": "report_written", "path": path}
        )


def setup_logging(debug: bool = False, log_format: str = "json"):
    """
    Setup application logging configuration
    """
    log_level = logging.DEBUG if debug else logging.INFO

    if log_format == "json":
        formatter = JSONFormatter()
    else:
        formatter = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")

    # stderr keeps stdout free for the run summary
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(log_level)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in list(root_logger.handlers):
        if getattr(handler, "_bilanz", False):
            root_logger.removeHandler(handler)
    console_handler._bilanz = True
    root_logger.addHandler(console_handler)

    app_loggers = [
        "bilanz",
        "bilanz.statement",
        "bilanz.ontology",
        "bilanz.scoring",
        "bilanz.mining",
        "bilanz.pipeline",
    ]

    for logger_name in app_loggers:
        logger = logging.getLogger(logger_name)
        logger.setLevel(log_level)
        logger.propagate = True

    return PipelineLogger()


pipeline_logger = PipelineLogger()
