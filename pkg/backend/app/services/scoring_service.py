"""
Scoring Service - Altman ratios, Z-score and distress-zone classification

Z = 0.012*X1 + 0.014*X2 + 0.033*X3 + 0.006*X4 + 0.999*X5 with X1..X4 in
percent and X5 as a raw multiple, i.e. 1.2/1.4/3.3/0.6/0.999 on fractions.

The model was fitted on publicly traded manufacturing firms; it is applied
unchanged to service and IT firms, where its zones are less reliable.
"""

import logging
import math
from decimal import Decimal
from typing import Optional, Tuple

from ..schemas.scoring import (
    BANKRUPT_95_THRESHOLD,
    DISTRESS_THRESHOLD,
    SAFE_THRESHOLD,
    RatioVector,
    Zone,
    ZScoreResult,
)
from ..schemas.statement import FinancialStatement, SupplementalFigures
from ..utils.error_handlers import DivisionDomainError, MissingInputError, ScoringDomainError
from .statement_service import statement_service

logger = logging.getLogger("bilanz.scoring")


class ScoringService:
    """Calculator for the Altman Z-score"""

    # Percent-form coefficients for X1..X4, raw coefficient for X5
    PERCENT_COEFFICIENTS = (0.012, 0.014, 0.033, 0.006)
    COEF_X5 = 0.999

    # Equivalent coefficients on fractions, used as a cross-check
    FRACTION_COEFFICIENTS = (1.2, 1.4, 3.3, 0.6, 0.999)

    def compute_ratios(
        self,
        stmt: FinancialStatement,
        supp: Optional[SupplementalFigures] = None,
        x4_fallback: bool = False,
    ) -> RatioVector:
        """
        Compute X1..X5 from a statement and its supplemental figures

        Args:
            stmt: the statement; its effective totals are used
            supp: supplemental figures, defaulting to those parsed with the statement
            x4_fallback: substitute book equity when market value equity is absent

        Returns:
            RatioVector, with x4_proxy set when the fallback was used
        """
        supp = stmt.supplemental if supp is None else supp
        totals = stmt.totals

        if totals.total_assets == 0:
            raise DivisionDomainError("x1", "total_assets")

        for field in ("retained_earnings", "ebit", "sales"):
            if getattr(supp, field) is None:
                raise MissingInputError(field)

        market_value_equity = supp.market_value_equity
        x4_proxy = False
        if market_value_equity is None:
            if not x4_fallback:
                raise MissingInputError("market_value_equity")
            market_value_equity = totals.total_assets - totals.total_liabilities
            x4_proxy = True
            logger.info(
                f"Using book equity for x4 of {stmt.firm_id} {stmt.period}",
                extra={"firm_id": stmt.firm_id, "period": stmt.period},
            )

        if totals.total_liabilities == 0:
            raise DivisionDomainError("x4", "total_liabilities")

        total_assets = totals.total_assets
        working_capital = statement_service.working_capital(stmt)

        return RatioVector(
            x1=float(working_capital / total_assets),
            x2=float(supp.retained_earnings / total_assets),
            x3=float(supp.ebit / total_assets),
            x4=float(market_value_equity / totals.total_liabilities),
            x5=float(supp.sales / total_assets),
            x4_proxy=x4_proxy,
        )

    def z_score(self, r: RatioVector) -> ZScoreResult:
        """Apply the discriminant and assign zone and 95% flag"""
        values = r.as_tuple()
        if not all(math.isfinite(v) for v in values):
            raise ScoringDomainError("Ratios must be finite", {"ratios": [repr(v) for v in values]})

        z = sum(coef * (100.0 * x) for coef, x in zip(self.PERCENT_COEFFICIENTS, values[:4]))
        z += self.COEF_X5 * values[4]
        if not math.isfinite(z):
            raise ScoringDomainError("Z-score overflowed", {"ratios": [repr(v) for v in values]})

        return ZScoreResult(z=z, zone=self.classify(z), bankrupt_95_flag=z < BANKRUPT_95_THRESHOLD)

    def z_score_fraction_form(self, r: RatioVector) -> float:
        """Same score from the 1.2/1.4/3.3/0.6/0.999 coefficients"""
        return sum(coef * x for coef, x in zip(self.FRACTION_COEFFICIENTS, r.as_tuple()))

    @staticmethod
    def classify(z: float) -> Zone:
        """Distress at or below 1.81, Safe at or above 2.99, Gray between"""
        if not math.isfinite(z):
            raise ScoringDomainError("Z-score must be finite", {"z": repr(z)})
        if z <= DISTRESS_THRESHOLD:
            return Zone.DISTRESS
        if z >= SAFE_THRESHOLD:
            return Zone.SAFE
        return Zone.GRAY

    def score_statement(
        self,
        stmt: FinancialStatement,
        supp: Optional[SupplementalFigures] = None,
        x4_fallback: bool = False,
    ) -> Tuple[RatioVector, ZScoreResult]:
        ratios = self.compute_ratios(stmt, supp, x4_fallback)
        return ratios, self.z_score(ratios)


scoring_service = ScoringService()
