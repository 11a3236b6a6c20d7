"""
Input Validation and Normalisation
Parses monetary amounts, periods and identifiers, and checks the run environment
"""

import os
import re
from datetime import datetime
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional
import logging

from .error_handlers import ConfigurationError

logger = logging.getLogger("bilanz.validation")

CENTS = Decimal("0.01")

_PERIOD_FORMATS = ("%Y-%m", "%Y-%m-%d", "%b %Y", "%B %Y", "%Y/%m", "%m/%Y")


class InputValidator:
    """
    Input parsing and sanitization for statement sources
    """

    @staticmethod
    def parse_amount(raw: str) -> Optional[Decimal]:
        """
        Parse a monetary amount such as "130,490", "(1,200)" or "-50.5"

        Returns None when the text is not a number.
        """
        if raw is None:
            return None
        text = str(raw).strip().replace(",", "").replace(" ", "").replace(" ", "")
        if not text:
            return None

        negative = False
        if text.startswith("(") and text.endswith(")"):
            negative = True
            text = text[1:-1]

        try:
            amount = Decimal(text)
        except (InvalidOperation, ValueError):
            return None

        if not amount.is_finite():
            return None
        if negative:
            amount = -amount
        return amount.quantize(CENTS)

    @staticmethod
    def normalize_period(raw: str) -> Optional[str]:
        """
        Normalize a year-month period to "YYYY-MM"
        """
        if raw is None:
            return None
        text = str(raw).strip()
        for fmt in _PERIOD_FORMATS:
            try:
                parsed = datetime.strptime(text, fmt)
            except ValueError:
                continue
            return f"{parsed.year:04d}-{parsed.month:02d}"
        return None

    @staticmethod
    def label_key(label: str) -> str:
        """Case-, space- and punctuation-insensitive key for a row label"""
        return re.sub(r"[^a-z0-9]", "", label.lower())

    @staticmethod
    def class_id_for(name: str) -> str:
        """
        CamelCase class id for a line-item name

        "Cash in Banks" -> "CashInBanks"; a leading digit gets a "C" prefix
        so the id stays a valid XML name.
        """
        words = re.findall(r"[A-Za-z0-9]+", name)
        if not words:
            return ""
        class_id = "".join(w[:1].upper() + w[1:] for w in words)
        if class_id[0].isdigit():
            class_id = "C" + class_id
        return class_id


def validate_output_directory(path) -> Path:
    """
    Create the output directory if needed and check it is writable
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"Cannot create output directory {out}: {exc}", {"path": str(out)})

    if not out.is_dir() or not os.access(out, os.W_OK):
        raise ConfigurationError(f"Output directory is not writable: {out}", {"path": str(out)})

    logger.debug(f"Output directory ready: {out}")
    return out
