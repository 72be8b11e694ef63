"""Command-line front-end: ``infer``, ``impute``, and ``eval`` subcommands.

Every run writes a metadata JSON capturing the full configuration, the seed,
and any association-graph edges removed to break cycles, so results can be
reproduced exactly.  Output files are written atomically (temp file + rename).

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .constraints import ConstraintSet, InferenceConfig, infer_constraints
from .engine import SchemaMismatchError, impute_table
from .evaluate import make_polynomial_benchmark, run_experiment
from .table import (
    DEFAULT_DATE_FORMATS,
    DEFAULT_MISSING_TOKENS,
    ParseOptions,
    TableError,
    load_csv,
    write_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

#: Rule refinements applied by the engine, recorded in every run's metadata.
ENGINE_NOTES = [
    "category range checks use inclusive bounds (min <= value <= max)",
    "date columns fall back to the column median",
]


@dataclasses.dataclass
class RunConfig:
    input: str | None = None
    bench: str | None = None
    output: str | None = None
    constraints: str | None = None
    explanations: str | None = None
    metadata: str | None = None
    output_dir: str = "."
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS
    date_formats: tuple[str, ...] = DEFAULT_DATE_FORMATS
    delimiter: str = ","
    max_degree: int = 3
    min_support: int = 3
    perc: tuple[float, ...] = (5.0, 10.0, 20.0, 30.0)
    iters: int = 5
    seed: int = 42
    figures: bool = True
    encode_text: bool = False

    def parse_options(self) -> ParseOptions:
        return ParseOptions(
            missing_tokens=self.missing_tokens,
            date_formats=self.date_formats,
            delimiter=self.delimiter,
        )

    def inference_config(self) -> InferenceConfig:
        return InferenceConfig(max_degree=self.max_degree, min_support=self.min_support)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["missing_tokens"] = list(self.missing_tokens)
        data["date_formats"] = list(self.date_formats)
        data["perc"] = list(self.perc)
        return data


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_metadata(path: Path, command: str, config: RunConfig, extra: dict) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "notes": ENGINE_NOTES,
    }
    payload.update(extra)
    _atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def _stem(config: RunConfig) -> str:
    if config.input:
        return Path(config.input).stem
    return config.bench or "run"


def _out_path(config: RunConfig, explicit: str | None, suffix: str) -> Path:
    if explicit:
        return Path(explicit)
    # companion files follow an explicitly placed primary output
    if config.output and config.output_dir == ".":
        return Path(config.output).parent / f"{_stem(config)}{suffix}"
    return Path(config.output_dir) / f"{_stem(config)}{suffix}"


def cmd_infer(config: RunConfig) -> int:
    table = load_csv(config.input, config.parse_options())
    constraints = infer_constraints(table, config.inference_config())
    out = _out_path(config, config.output, ".constraints.json")
    _atomic_write_text(out, constraints.to_json() + "\n")
    _write_metadata(
        _out_path(config, config.metadata, ".metadata.json"),
        "infer",
        config,
        {"associations": len(constraints.associations)},
    )
    logger.info(
        "inferred %d column constraints and %d associations -> %s",
        len(constraints.column_constraints),
        len(constraints.associations),
        out,
    )
    print(out)
    return EXIT_OK


def cmd_impute(config: RunConfig) -> int:
    options = config.parse_options()
    table = load_csv(config.input, options)
    if config.constraints:
        constraints = ConstraintSet.from_json(Path(config.constraints).read_text("utf-8"))
    else:
        constraints = infer_constraints(table, config.inference_config())

    result = impute_table(table, constraints)

    out_csv = _out_path(config, config.output, ".imputed.csv")
    buffer = io.StringIO()
    write_csv(result.table, buffer, options)
    _atomic_write_text(out_csv, buffer.getvalue())

    out_jsonl = _out_path(config, config.explanations, ".explanations.jsonl")
    lines = "".join(json.dumps(record.to_dict()) + "\n" for record in result.records)
    _atomic_write_text(out_jsonl, lines)

    out_meta = _out_path(config, config.metadata, ".metadata.json")
    _write_metadata(
        out_meta,
        "impute",
        config,
        {
            "imputed_cells": len(result.records),
            "imputation_order": result.order.columns,
            "removed_edges": [
                {"source": s, "target": t, "error": e} for s, t, e in result.order.removed_edges
            ],
        },
    )
    logger.info("imputed %d cells -> %s", len(result.records), out_csv)
    print(out_csv)
    return EXIT_OK


def cmd_eval(config: RunConfig) -> int:
    if config.bench == "polynomial":
        table = make_polynomial_benchmark(rows=1000, seed=config.seed)
        bench = "polynomial"
    else:
        table = load_csv(config.input, config.parse_options())
        bench = _stem(config)
        if config.encode_text:
            from .evaluate import encode_categorical_text

            table, _ = encode_categorical_text(table)

    report = run_experiment(
        table,
        percs=list(config.perc),
        iters=config.iters,
        seed=config.seed,
        config=config.inference_config(),
        bench=bench,
    )

    out_dir = Path(config.output_dir)
    _atomic_write_text(out_dir / f"{bench}.report.json", json.dumps(report.to_dict(), indent=2) + "\n")
    _atomic_write_text(out_dir / f"{bench}.report.txt", report.format_table())
    csv_text = "\n".join(",".join(row) for row in report.table_rows()) + "\n"
    _atomic_write_text(out_dir / f"{bench}.report.csv", csv_text)
    _write_metadata(out_dir / f"{bench}.metadata.json", "eval", config, {})

    if config.figures:
        from .figures import render_report_figures

        for path in render_report_figures(report, out_dir):
            logger.info("figure -> %s", path)

    print(report.format_table(), end="")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with defaults; flags win over it")
    parser.add_argument("--missing-tokens", help="comma-separated missing-value tokens")
    parser.add_argument("--date-format", action="append", dest="date_formats",
                        help="strptime pattern; may repeat, tried in order")
    parser.add_argument("--delimiter", help="field delimiter (default ',')")
    parser.add_argument("--max-degree", type=int, help="polynomial fit degree cap (default 3)")
    parser.add_argument("--min-support", type=int,
                        help="minimum rows behind an association (default 3)")
    parser.add_argument("--output-dir", help="directory for derived output names")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tabfill",
        description="Constraint-based, explainable missing-value imputation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_infer = sub.add_parser("infer", help="mine constraints from a CSV")
    p_infer.add_argument("input")
    p_infer.add_argument("--output", help="constraints JSON path")
    _add_common(p_infer)

    p_impute = sub.add_parser("impute", help="fill missing cells with explanations")
    p_impute.add_argument("input")
    p_impute.add_argument("--constraints", help="reuse a constraints JSON instead of inferring")
    p_impute.add_argument("--output", help="imputed CSV path")
    p_impute.add_argument("--explanations", help="explanations JSONL path")
    p_impute.add_argument("--metadata", help="run metadata JSON path")
    _add_common(p_impute)

    p_eval = sub.add_parser("eval", help="mask-impute-score experiment")
    group = p_eval.add_mutually_exclusive_group(required=True)
    group.add_argument("input", nargs="?", help="complete CSV to evaluate on")
    group.add_argument("--bench", choices=["polynomial"], help="built-in synthetic benchmark")
    p_eval.add_argument("--perc", help="comma-separated missing percentages (default 5,10,20,30)")
    p_eval.add_argument("--iters", type=int, help="iterations per percentage (default 5)")
    p_eval.add_argument("--seed", type=int, help="master RNG seed (default 42)")
    p_eval.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_eval.add_argument("--encode-text", action="store_true",
                        help="label-encode CAT_TEXT columns before evaluating")
    _add_common(p_eval)

    return parser


def _build_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        file_values = json.loads(Path(args.config).read_text("utf-8"))
        for key, value in file_values.items():
            if not hasattr(config, key):
                raise ValueError(f"unknown config key: {key!r}")
            if key in ("missing_tokens", "date_formats", "perc"):
                value = tuple(value)
            setattr(config, key, value)

    if getattr(args, "input", None):
        config.input = args.input
    if getattr(args, "bench", None):
        config.bench = args.bench
    for key in ("output", "constraints", "explanations", "metadata", "output_dir",
                "delimiter", "max_degree", "min_support", "iters", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "missing_tokens", None):
        config.missing_tokens = tuple(args.missing_tokens.split(","))
    if getattr(args, "date_formats", None):
        config.date_formats = tuple(args.date_formats)
    if getattr(args, "perc", None):
        config.perc = tuple(float(p) for p in args.perc.split(","))
    if getattr(args, "no_figures", False):
        config.figures = False
    if getattr(args, "encode_text", False):
        config.encode_text = True
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = _build_config(args)
        if args.command == "infer":
            return cmd_infer(config)
        if args.command == "impute":
            return cmd_impute(config)
        return cmd_eval(config)
    except (TableError, SchemaMismatchError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
