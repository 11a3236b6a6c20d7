"""
bilanz command line

    bilanz run --input <path>... [--format csv|json] [--min-support F|N] [--min-confidence F]
               [--bins N] [--k N] [--seed N] [--tolerance F] [--x4-fallback] [--scope CLASS]
               [--out DIR] [--report json,csv,md] [--config FILE] [--top-n N] [--workers N]
               [--owl-mode merged|per_firm] [--debug]

Exit codes: 0 every firm scored, 1 partial failures, 2 the run failed.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from .config import Settings
from .schemas.mining import MiningConfig
from .schemas.pipeline import PipelineConfig
from .services.pipeline_service import pipeline_service
from .utils.error_handlers import ConfigurationError, exit_code_for
from .utils.logging import setup_logging

# config file / flag name -> Settings field
OPTION_FIELDS = {
    "input": None,
    "format": None,
    "scope": None,
    "min_support": "min_support",
    "min_confidence": "min_confidence",
    "bins": "bins",
    "k": "k_clusters",
    "seed": "seed",
    "tolerance": "tolerance",
    "x4_fallback": "x4_fallback",
    "out": "output_dir",
    "report": "report_formats",
    "top_n": "top_n_rules",
    "workers": "workers",
    "owl_mode": "owl_mode",
    "max_iterations": "max_iterations",
    "debug": "debug",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bilanz",
        description="Financial statement ontology, Z-score bankruptcy scoring and rule mining",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the full pipeline over a statement corpus")
    # Every default is None so unset flags fall through to the config file and environment
    run.add_argument("--input", nargs="+", default=None, help="Statement files or directories")
    run.add_argument("--format", choices=["csv", "json"], default=None, help="Input format (default: by suffix)")
    run.add_argument("--min-support", default=None, help="Fraction (0.2) or absolute count (3)")
    run.add_argument("--min-confidence", type=float, default=None)
    run.add_argument("--bins", type=int, default=None)
    run.add_argument("--k", type=int, default=None, help="Number of clusters")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--tolerance", type=float, default=None, help="Relative tolerance for validation checks")
    run.add_argument("--x4-fallback", action="store_true", default=None,
                     help="Use book equity when market value equity is missing")
    run.add_argument("--scope", default=None, help="Mine only firms with instances under this class")
    run.add_argument("--out", default=None, help="Output directory")
    run.add_argument("--report", default=None, help="Comma separated report formats: json,csv,md")
    run.add_argument("--config", default=None, help="JSON file mirroring these flags")
    run.add_argument("--top-n", type=int, default=None, help="Rules listed per firm")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--owl-mode", choices=["merged", "per_firm"], default=None)
    run.add_argument("--max-iterations", type=int, default=None)
    run.add_argument("--debug", action="store_true", default=None)
    return parser


def parse_min_support(value: Union[str, int, float]) -> Union[int, float]:
    """'3' is an absolute count, '0.2' a fraction"""
    if isinstance(value, bool):
        raise ConfigurationError(f"Invalid min_support {value!r}")
    if isinstance(value, (int, float)):
        return value
    text = str(value).strip()
    try:
        if any(ch in text for ch in ".eE"):
            return float(text)
        return int(text)
    except ValueError:
        raise ConfigurationError(f"Invalid min_support {value!r}", {"min_support": value})


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {exc.msg}", {"line": exc.lineno})

    if not isinstance(document, dict):
        raise ConfigurationError("Config file must hold a JSON object")
    options = {key.replace("-", "_"): value for key, value in document.items()}
    unknown = sorted(set(options) - set(OPTION_FIELDS))
    if unknown:
        raise ConfigurationError(f"Unknown config keys: {', '.join(unknown)}", {"keys": unknown})
    return options


def resolve_options(args: argparse.Namespace, settings: Optional[Settings] = None) -> Dict[str, Any]:
    """Flag > config file > environment > defaults"""
    settings = settings or Settings()
    options: Dict[str, Any] = {
        name: (getattr(settings, field) if field else None)
        for name, field in OPTION_FIELDS.items()
    }
    if args.config:
        options.update(load_config_file(args.config))
    for name in OPTION_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            options[name] = value
    return options


def build_pipeline_config(options: Dict[str, Any]) -> PipelineConfig:
    inputs = options["input"]
    if not inputs:
        raise ConfigurationError("At least one --input path is required")
    if isinstance(inputs, str):
        inputs = [inputs]
    if not options["out"]:
        raise ConfigurationError("An output directory is required (--out or BILANZ_OUTPUT_DIR)")

    report = options["report"]
    formats: List[str] = report if isinstance(report, list) else [f.strip() for f in str(report).split(",") if f.strip()]

    try:
        mining = MiningConfig(
            min_support=parse_min_support(options["min_support"]),
            min_confidence=options["min_confidence"],
            bins=options["bins"],
            k_clusters=options["k"],
            seed=options["seed"],
            max_iterations=options["max_iterations"],
        )
        return PipelineConfig(
            inputs=tuple(Path(p) for p in inputs),
            format=options["format"],
            tolerance=options["tolerance"],
            mining=mining,
            x4_fallback=bool(options["x4_fallback"]),
            scope=options["scope"],
            out_dir=Path(options["out"]),
            report_formats=frozenset(formats),
            owl_mode=options["owl_mode"],
            top_n_rules=options["top_n"],
            workers=options["workers"],
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        location = ".".join(str(part) for part in error["loc"])
        raise ConfigurationError(f"Invalid configuration {location}: {error['msg']}", {"field": location})


def run_command(args: argparse.Namespace) -> int:
    settings = Settings()
    options = resolve_options(args, settings)
    setup_logging(debug=bool(options["debug"]), log_format=settings.log_format)
    config = build_pipeline_config(options)

    report = pipeline_service.run(config)
    pipeline_service.emit_report(report, config.report_formats, config.out_dir)
    sys.stdout.write(pipeline_service.zone_summary(report))
    return 1 if report.partial_failure else 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run_command(args)
    except Exception as exc:
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
