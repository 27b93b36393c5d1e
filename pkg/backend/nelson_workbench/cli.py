"""Command line for the Nelson workbench."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from nelson_workbench.config import ReportFormat, RunConfig, Suite
from nelson_workbench.errors import WorkbenchError
from nelson_workbench.report import Report
from nelson_workbench.specfile import load_spec
from nelson_workbench.suites import run_check, run_enumerate, run_validate, suite_names

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "enumerate", "check")
LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def _family(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [name.strip() for name in text.split(",") if name.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nelson-workbench",
        description="Check Nelson's axioms on finite presheaf toposes.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="Log more (-v info, -vv debug)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, type=Path, help="Topos spec file (JSON)")
        p.add_argument("--budget", type=int, default=None,
                       help="Bound on constructed carrier sizes and enumerations")
        p.add_argument("--format", dest="report_format", default=ReportFormat.structured.value,
                       choices=[f.value for f in ReportFormat])
        p.add_argument("--output", type=Path, default=None, help="Write the report here")
        p.add_argument("--log-jsonl", type=Path, default=None,
                       help="Append a one-line summary of the run")
        if name == "enumerate":
            p.add_argument("--object", dest="object_name", default=None,
                           help="Presheaf to enumerate ultrafilters on")
        if name == "check":
            p.add_argument("--suite", default=Suite.all.value, choices=suite_names())
            p.add_argument("--family", default=None,
                           help="Comma-separated presheaf names to run over")
    return parser


def configure_logging(verbose: int) -> None:
    env = os.environ.get("NELSON_LOG_LEVEL")
    if env and not verbose:
        level = logging.getLevelName(env.upper())
        if not isinstance(level, int):
            level = logging.WARNING
    else:
        level = LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = {
        "spec_path": args.spec,
        "command": args.command,
        "budget": args.budget,
        "report_format": args.report_format,
        "output": args.output,
        "log_jsonl": args.log_jsonl,
    }
    if args.command == "enumerate":
        data["object_name"] = args.object_name
    if args.command == "check":
        data["suite"] = args.suite
        data["family"] = _family(args.family)
    return RunConfig.from_mapping(data)


def execute(config: RunConfig) -> Report:
    """Load the spec and run the configured command."""
    spec = load_spec(config.spec_path, config.budget)
    if config.command == "validate":
        return run_validate(spec)
    if config.command == "enumerate":
        return run_enumerate(spec, config.object_name)
    return run_check(spec, config.suite, config.family)


def write_report(report: Report, config: RunConfig) -> None:
    text = report.to_human() if config.report_format == ReportFormat.human else report.to_json()
    if config.output is None:
        sys.stdout.write(text)
        return
    config.output.parent.mkdir(parents=True, exist_ok=True)
    config.output.write_text(text, encoding="utf-8")


def log_run(config: RunConfig, record: dict) -> None:
    """Append one JSON line describing the run to ``config.log_jsonl``."""
    if config.log_jsonl is None:
        return
    try:
        config.log_jsonl.parent.mkdir(parents=True, exist_ok=True)
        with open(config.log_jsonl, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    except OSError as e:
        logger.warning("could not append to %s: %s", config.log_jsonl, e)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Returns:
        0 when every check passes, 1 on a failed check, 2 on bad input,
        3 when a budget is exceeded
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    config: Optional[RunConfig] = None
    try:
        config = config_from_args(args)
        report = execute(config)
    except WorkbenchError as e:
        sys.stderr.write(f"error: {e}\n")
        if config is not None:
            log_run(config, {"command": args.command, "spec": str(args.spec),
                             "error": str(e), "exit": e.exit_code})
        return e.exit_code
    write_report(report, config)
    code = report.exit_code()
    log_run(config, {"command": config.command, "spec": str(config.spec_path),
                     "suite": config.suite.value, "passed": report.passed,
                     "summary": report.summary(), "exit": code})
    return code


if __name__ == "__main__":
    sys.exit(main())
