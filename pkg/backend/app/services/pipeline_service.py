"""
Pipeline Service - statements in; ontology, Z-scores, rules and the bankruptcy report out

Order: parse -> validate -> ontology (+ OWL export) -> ratios -> Z-score -> mine -> report.
"""

import csv
import io
import json
import logging
import re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from jinja2 import Template

from ..schemas.mining import FirmFeatures, MiningResult, TransactionSet
from ..schemas.ontology import OntologyTree
from ..schemas.pipeline import (
    BankruptcyReport,
    FirmReportEntry,
    InputFailure,
    OwlMode,
    PipelineConfig,
    ReportFormat,
    ValidationSummary,
)
from ..schemas.scoring import RatioVector, Zone, ZScoreResult
from ..schemas.statement import FinancialStatement, StatementFormat, ValidationReport
from ..utils.error_handlers import (
    BilanzException,
    ClassLookupError,
    PipelineError,
    ReportWriteError,
    error_payload,
)
from ..utils.logging import pipeline_logger
from ..utils.validation import validate_output_directory
from .mining_service import mining_service
from .ontology_service import ontology_service
from .scoring_service import scoring_service
from .statement_service import statement_service

logger = logging.getLogger("bilanz.pipeline")

SUFFIX_FORMATS = {".csv": StatementFormat.CSV, ".json": StatementFormat.JSON}
GROWTH_FEATURE = "ASSET_GROWTH"

REPORT_COLUMNS = (
    "firm_id", "period", "x1", "x2", "x3", "x4", "x5", "z", "zone", "bankrupt_95_flag",
    "x4_proxy", "validation_passed", "failed_checks", "cluster", "errors",
)
RULE_COLUMNS = ("scope", "antecedent", "consequent", "support", "confidence", "support_count")

MARKDOWN_TEMPLATE = """# Bankruptcy report

| Zone | Firms |
|------|-------|
{% for zone, count in zone_counts.items() -%}
| {{ zone }} | {{ count }} |
{% endfor %}
## Firms

| Firm | Period | Z | Zone | 95% flag | Cluster | Validation | Errors |
|------|--------|---|------|----------|---------|------------|--------|
{% for firm in firms -%}
| {{ firm.firm_id }} | {{ firm.period }} | {{ "%.4f"|format(firm.z) if firm.z is not none else "-" }} | {{ firm.zone or "-" }} | {{ "yes" if firm.bankrupt_95_flag else ("no" if firm.bankrupt_95_flag is not none else "-") }} | {{ firm.cluster if firm.cluster is not none else "-" }} | {{ "ok" if firm.validation.passed else firm.validation.failed_checks|join(", ") }} | {{ firm.errors|map(attribute="code")|join(", ") or "-" }} |
{% endfor %}
{% if input_failures %}
## Unreadable inputs

{% for failure in input_failures -%}
- {{ failure.source }}: {{ failure.error.code }} {{ failure.error.message }}
{% endfor %}
{% endif %}
## Rules ({{ rules|length }})

{% for rule in rules -%}
- [{{ rule.scope }}] {{ rule.antecedent|join(" & ") }} => {{ rule.consequent|join(" & ") }} (support {{ "%.3f"|format(rule.support) }}, confidence {{ "%.3f"|format(rule.confidence) }})
{% else -%}
No rules met the thresholds.
{% endfor %}
{% if warnings %}
## Warnings

{% for warning in warnings -%}
- {{ warning }}
{% endfor %}
{% endif %}"""


class _FirmOutcome:
    """Per-file result of the parallel stages"""

    def __init__(self, source: str):
        self.source = source
        self.statement: Optional[FinancialStatement] = None
        self.validation: Optional[ValidationReport] = None
        self.ratios: Optional[RatioVector] = None
        self.zscore: Optional[ZScoreResult] = None
        self.errors: List[dict] = []
        self.failure: Optional[dict] = None
        self.in_scope = True


def _safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", text)


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


class PipelineService:
    """Runs the corpus through every stage and writes the artifacts"""

    @staticmethod
    def collect_inputs(paths: Iterable[Path]) -> List[Path]:
        """Files as given; directories expand to their *.csv and *.json files, sorted by name"""
        files: List[Path] = []
        for path in paths:
            path = Path(path)
            if path.is_dir():
                files.extend(sorted(
                    (child for child in path.iterdir() if child.is_file() and child.suffix.lower() in SUFFIX_FORMATS),
                    key=lambda child: child.name,
                ))
            else:
                files.append(path)
        return files

    def _process_file(self, path: Path, config: PipelineConfig) -> _FirmOutcome:
        """Parse, validate and score one file; failures land on the outcome"""
        outcome = _FirmOutcome(str(path))
        started = time.perf_counter()

        try:
            fmt = config.format or SUFFIX_FORMATS.get(path.suffix.lower(), StatementFormat.CSV)
            text = path.read_text(encoding="utf-8")
            stmt = statement_service.parse_statement(text, fmt, default_firm_id=path.stem)
        except (BilanzException, OSError, UnicodeDecodeError) as exc:
            outcome.failure = error_payload(exc)
            pipeline_logger.log_failure("parse", outcome.failure["code"], outcome.failure["message"])
            return outcome

        outcome.statement = stmt
        pipeline_logger.log_statement_parsed(stmt.firm_id, stmt.period, len(stmt.items), str(path))

        outcome.validation = statement_service.validate(stmt, config.tolerance)
        pipeline_logger.log_validation(stmt.firm_id, stmt.period, len(outcome.validation.failed_checks))

        try:
            outcome.ratios, outcome.zscore = scoring_service.score_statement(
                stmt, x4_fallback=config.x4_fallback
            )
            pipeline_logger.log_score(stmt.firm_id, stmt.period, outcome.zscore.z, outcome.zscore.zone.value)
        except BilanzException as exc:
            payload = error_payload(exc)
            outcome.errors.append(payload)
            pipeline_logger.log_failure("score", payload["code"], payload["message"], stmt.firm_id, stmt.period)

        pipeline_logger.log_firm_processed(stmt.firm_id, stmt.period, (time.perf_counter() - started) * 1000)
        return outcome

    def _process_all(self, files: Sequence[Path], config: PipelineConfig) -> List[_FirmOutcome]:
        if config.workers > 1 and len(files) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                # map keeps input order
                return list(pool.map(lambda path: self._process_file(path, config), files))
        return [self._process_file(path, config) for path in files]

    @staticmethod
    def _mark_duplicates(outcomes: List[_FirmOutcome]):
        seen: Dict[Tuple[str, str], str] = {}
        for outcome in outcomes:
            if outcome.statement is None:
                continue
            key = outcome.statement.key
            if key in seen:
                outcome.failure = error_payload(PipelineError(
                    f"Firm-period {key[0]} {key[1]} already read from {seen[key]}",
                    {"firm_id": key[0], "period": key[1], "first_source": seen[key]},
                ))
                outcome.statement = None
                continue
            seen[key] = outcome.source

    @staticmethod
    def asset_growth(statements: Iterable[FinancialStatement]) -> Dict[Tuple[str, str], float]:
        """Change in total assets against the firm's previous period in the corpus"""
        by_firm: Dict[str, List[FinancialStatement]] = {}
        for stmt in statements:
            by_firm.setdefault(stmt.firm_id, []).append(stmt)

        growth: Dict[Tuple[str, str], float] = {}
        for history in by_firm.values():
            history.sort(key=lambda s: s.period)
            for previous, current in zip(history, history[1:]):
                base = previous.totals.total_assets
                if base != 0:
                    growth[current.key] = float((current.totals.total_assets - base) / base)
        return growth

    def _build_ontology(self, outcomes: List[_FirmOutcome], config: PipelineConfig) -> OntologyTree:
        by_key = {o.statement.key: o for o in outcomes if o.statement is not None}

        def record_failure(stmt: FinancialStatement, exc: BilanzException):
            payload = error_payload(exc)
            by_key[stmt.key].errors.append(payload)
            pipeline_logger.log_failure("ontology", payload["code"], payload["message"], stmt.firm_id, stmt.period)

        entries = [(o.statement, o.validation) for o in by_key.values()]
        corpus = ontology_service.build_corpus_ontology(entries, on_error=record_failure)

        out_dir = Path(config.out_dir)
        if config.owl_mode == OwlMode.MERGED:
            self._write(out_dir / "ontology.owl", ontology_service.export_owl(corpus))
        else:
            for stmt, report in entries:
                if any(e["code"] == "ONTOLOGY_ERROR" for e in by_key[stmt.key].errors):
                    continue
                tree = ontology_service.build_financial_ontology(stmt, report=report)
                name = f"{_safe_name(stmt.firm_id)}_{stmt.period}.owl"
                self._write(out_dir / "ontology" / name, ontology_service.export_owl(tree))
        return corpus

    def _apply_scope(self, corpus: OntologyTree, outcomes: List[_FirmOutcome], scope: str):
        if scope not in corpus.classes:
            raise ClassLookupError(scope)
        keys = {
            (instance.slot_values["firm_id"], instance.slot_values["period"])
            for instance in ontology_service.query_subtree(corpus, scope)
        }
        for outcome in outcomes:
            if outcome.statement is not None:
                outcome.in_scope = outcome.statement.key in keys

    def _mine(self, outcomes: List[_FirmOutcome], config: PipelineConfig,
              warnings: List[str]) -> Optional[MiningResult]:
        growth = self.asset_growth(o.statement for o in outcomes if o.statement is not None)
        firms = [
            FirmFeatures(
                firm_id=o.statement.firm_id,
                period=o.statement.period,
                ratios=o.ratios,
                zscore=o.zscore,
                growth={GROWTH_FEATURE: growth[o.statement.key]} if o.statement.key in growth else {},
            )
            for o in outcomes
            if o.zscore is not None and o.in_scope
        ]
        if not firms:
            warnings.append("No scorable firm-periods in scope; mining skipped")
            logger.warning(warnings[-1])
            return None

        mining = config.mining
        if mining.k_clusters > len(firms):
            warnings.append(f"k={mining.k_clusters} exceeds {len(firms)} scorable firm-periods; using k={len(firms)}")
            logger.warning(warnings[-1])
            mining = mining.model_copy(update={"k_clusters": len(firms)})

        result = mining_service.mine(firms, mining)
        warnings.extend(result.transactions.warnings)
        return result

    def run(self, config: PipelineConfig) -> BankruptcyReport:
        """
        Execute the whole flow over the configured inputs

        Firms failing any per-firm stage stay in the report with their error
        payloads and are left out of mining.
        """
        out_dir = validate_output_directory(config.out_dir)
        files = self.collect_inputs(config.inputs)
        outcomes = self._process_all(files, config)
        self._mark_duplicates(outcomes)

        if not any(o.statement is not None for o in outcomes):
            raise PipelineError(
                "No parseable statements in the inputs",
                {"inputs": [str(p) for p in config.inputs], "files": len(files)},
            )

        corpus = self._build_ontology(outcomes, config)
        if config.scope:
            self._apply_scope(corpus, outcomes, config.scope)

        # Firms whose ontology failed are not mined
        for outcome in outcomes:
            if outcome.statement is not None and any(e["code"] == "ONTOLOGY_ERROR" for e in outcome.errors):
                outcome.in_scope = False

        warnings: List[str] = []
        result = self._mine(outcomes, config, warnings)

        transactions = {t.key: t for t in result.transactions.transactions} if result else {}
        all_rules = result.all_rules() if result else []
        self._write(
            out_dir / "transactions.csv",
            mining_service.export_transactions_csv(result.transactions if result else TransactionSet()),
        )

        entries: List[FirmReportEntry] = []
        failures: List[InputFailure] = []
        for outcome in outcomes:
            if outcome.statement is None:
                failures.append(InputFailure(source=outcome.source, error=outcome.failure))
                continue
            entries.append(self._entry(outcome, result, transactions, all_rules, config.top_n_rules))

        zone_counts = {zone.value: 0 for zone in Zone}
        zone_counts.update(Counter(entry.zone for entry in entries if entry.zone is not None))

        return BankruptcyReport(
            firms=tuple(entries),
            input_failures=tuple(failures),
            zone_counts=zone_counts,
            rules=tuple(rule.as_record() for rule in all_rules),
            transactions=len(result.transactions) if result else 0,
            clusters=result.cluster_model.k if result else 0,
            warnings=tuple(warnings),
        )

    @staticmethod
    def _entry(outcome: _FirmOutcome, result: Optional[MiningResult], transactions, all_rules,
               top_n: int) -> FirmReportEntry:
        stmt = outcome.statement
        validation = outcome.validation
        cluster = result.cluster_model.assignments.get(stmt.key) if result else None

        rules = ()
        transaction = transactions.get(stmt.key)
        if transaction is not None:
            candidates = [r for r in all_rules if r.scope in ("global", f"cluster:{cluster}")]
            rules = tuple(r.as_record() for r in mining_service.rules_satisfied_by(candidates, transaction, top_n))

        return FirmReportEntry(
            firm_id=stmt.firm_id,
            period=stmt.period,
            source=outcome.source,
            ratios=outcome.ratios.as_dict() if outcome.ratios else None,
            z=outcome.zscore.z if outcome.zscore else None,
            zone=outcome.zscore.zone.value if outcome.zscore else None,
            bankrupt_95_flag=outcome.zscore.bankrupt_95_flag if outcome.zscore else None,
            x4_proxy=outcome.ratios.x4_proxy if outcome.ratios else False,
            validation=ValidationSummary(
                passed=validation.passed,
                failed_checks=tuple(validation.failed_checks),
                max_relative_error=max((c.relative_error for c in validation.checks), default=0.0),
            ),
            cluster=cluster,
            in_scope=outcome.in_scope,
            rules=rules,
            errors=tuple(outcome.errors),
        )

    # Output

    @staticmethod
    def _write(path: Path, content: str) -> Path:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as handle:
                handle.write(content)
        except OSError as exc:
            raise ReportWriteError(f"Cannot write {path}: {exc.strerror or exc}", {"path": str(path)})
        pipeline_logger.log_report_written(str(path))
        return path

    @staticmethod
    def render_json(report: BankruptcyReport) -> str:
        return json.dumps(report.as_document(), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def render_csv(report: BankruptcyReport) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in report.firm_rows():
            writer.writerow([_csv_value(row[column]) for column in REPORT_COLUMNS])
        return buffer.getvalue()

    @staticmethod
    def render_rules_csv(report: BankruptcyReport) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(RULE_COLUMNS)
        for rule in report.rules:
            writer.writerow([
                rule["scope"],
                ";".join(rule["antecedent"]),
                ";".join(rule["consequent"]),
                _csv_value(rule["support"]),
                _csv_value(rule["confidence"]),
                rule["support_count"],
            ])
        return buffer.getvalue()

    @staticmethod
    def render_markdown(report: BankruptcyReport) -> str:
        return Template(MARKDOWN_TEMPLATE, keep_trailing_newline=True).render(**report.as_document())

    def emit_report(
        self,
        report: BankruptcyReport,
        formats: Iterable[Union[ReportFormat, str]],
        out_dir: Union[str, Path],
    ) -> List[Path]:
        """
        Write the report in each requested format plus rules.jsonl

        Output is byte-identical for identical reports.
        """
        out_dir = Path(out_dir)
        formats = {ReportFormat(f) for f in formats}
        written: List[Path] = []

        if ReportFormat.JSON in formats:
            written.append(self._write(out_dir / "report.json", self.render_json(report)))
        if ReportFormat.CSV in formats:
            written.append(self._write(out_dir / "report.csv", self.render_csv(report)))
            written.append(self._write(out_dir / "rules.csv", self.render_rules_csv(report)))
        if ReportFormat.MARKDOWN in formats:
            written.append(self._write(out_dir / "report.md", self.render_markdown(report)))

        written.append(self._write(out_dir / "rules.jsonl", mining_service.rules_to_jsonl(report.rules)))
        return written

    @staticmethod
    def zone_summary(report: BankruptcyReport) -> str:
        """One line per zone for stdout"""
        lines = [f"{zone}: {count}" for zone, count in sorted(report.zone_counts.items())]
        unscored = sum(1 for entry in report.firms if not entry.scored) + len(report.input_failures)
        if unscored:
            lines.append(f"UNSCORED: {unscored}")
        return "\n".join(lines) + "\n"


pipeline_service = PipelineService()
