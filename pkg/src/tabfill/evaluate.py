"""Evaluation harness: mask cells, impute, score, repeat, average.

The protocol: hide a percentage of cells uniformly at random, rebuild
constraints from the masked table, impute with both the constraint engine and
a mean/mode baseline, then score only the hidden cells.  Numeric columns are
scored with RMSE normalized by the original column's population standard
deviation (NRMSE); categorical and text columns with macro-averaged F1.
Each experiment repeats the mask-impute-score cycle and reports the
arithmetic mean across iterations.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

import numpy as np

from .constraints import InferenceConfig, infer_constraints
from .datatypes import (
    CATEGORICAL_TYPES,
    INTEGER_TYPES,
    NUMERIC_TYPES,
    DataType,
    TypeReport,
    apply_types,
    infer_all,
)
from .engine import impute_table
from .table import Cell, Column, DateValue, Table

logger = logging.getLogger(__name__)

__all__ = [
    "EvalReport",
    "MethodScores",
    "MissingMask",
    "PercScores",
    "baseline_impute",
    "encode_categorical_text",
    "f1_categorical",
    "inject_missing",
    "make_polynomial_benchmark",
    "nrmse",
    "rmse",
    "run_experiment",
]

_MASK_RETRIES = 20

#: Column datatypes scored with RMSE/NRMSE: every integer- or real-valued one.
SCORED_NUMERIC = (DataType.NUMERIC, DataType.CAT_NUM, DataType.FLOAT)

#: Column name -> polynomial coefficients (ascending powers of the base
#: column) used by the synthetic benchmark.
BENCHMARK_COEFFICIENTS: dict[str, tuple[float, ...]] = {
    "lin_a": (3.0, 2.0),
    "quad": (1.0, -2.0, 1.0),
    "cubic": (2.0, -1.0, 0.0, 0.5),
    "lin_b": (7.0, -3.0),
}


@dataclass(frozen=True)
class MissingMask:
    """Cell positions hidden for scoring, as (row, column-name) pairs."""

    positions: frozenset[tuple[int, str]]
    perc: float
    seed: int

    def rows_for(self, column: str) -> list[int]:
        return sorted(r for r, c in self.positions if c == column)


def inject_missing(table: Table, perc: float, seed: int) -> tuple[Table, MissingMask]:
    """Hide ``round(perc/100 * cells)`` uniformly random cells of a complete table.

    Deterministic per seed.  Draws that would empty out an entire column are
    re-drawn a bounded number of times before giving up.
    """
    if not 0 < perc < 100:
        raise ValueError(f"perc must be in (0, 100), got {perc}")
    if table.has_missing():
        raise ValueError("input table already has missing cells")
    names = table.column_names
    n_rows = table.row_count
    total = n_rows * len(names)
    count = round(perc / 100.0 * total)
    rng = random.Random(seed)

    chosen: list[int] = []
    for attempt in range(_MASK_RETRIES):
        chosen = rng.sample(range(total), count)
        masked_per_column = [0] * len(names)
        for flat in chosen:
            masked_per_column[flat % len(names)] += 1
        if all(m < n_rows for m in masked_per_column) or n_rows == 0:
            break
    else:
        raise ValueError(
            f"perc={perc} keeps emptying out a column after {_MASK_RETRIES} draws"
        )

    positions = frozenset((flat // len(names), names[flat % len(names)]) for flat in chosen)
    new_columns = []
    for j, col in enumerate(table.columns):
        cells = list(col.cells)
        for flat in chosen:
            if flat % len(names) == j:
                cells[flat // len(names)] = None
        new_columns.append(Column(col.name, cells))
    return Table(new_columns), MissingMask(positions=positions, perc=perc, seed=seed)


# ---------------------------------------------------------------------------
# metrics


def rmse(original: Table, imputed: Table, mask: MissingMask, column: str) -> float:
    """Root mean square error over the masked cells of one numeric column."""
    rows = mask.rows_for(column)
    if not rows:
        raise ValueError(f"no masked cells in column {column!r}")
    truth = np.asarray([float(original.cell(r, column)) for r in rows])
    filled = np.asarray([float(imputed.cell(r, column)) for r in rows])
    return float(np.sqrt(np.mean((truth - filled) ** 2)))


def nrmse(
    original: Table,
    imputed: Table,
    mask: MissingMask,
    types: TypeReport | None = None,
) -> float | None:
    """Mean over numeric columns of RMSE divided by the column's std.

    The normalizer is the population standard deviation of the original full
    column.  Columns with zero spread are excluded with a warning; columns
    with no masked cells contribute nothing.  Returns None when no column
    qualifies.
    """
    types = types or infer_all(original)
    ratios: list[float] = []
    for name in types.columns_of_type(*SCORED_NUMERIC):
        if not mask.rows_for(name):
            continue
        values = [float(c) for c in original.column(name).cells if c is not None]
        sigma = float(np.std(np.asarray(values)))
        if sigma == 0.0:
            logger.warning("column %r has zero spread; excluded from NRMSE", name)
            continue
        ratios.append(rmse(original, imputed, mask, name) / sigma)
    if not ratios:
        return None
    return float(np.mean(ratios))


def f1_categorical(
    original: Table, imputed: Table, mask: MissingMask, column: str
) -> float | None:
    """Macro-averaged F1 over the masked cells of a categorical/text column.

    Imputation is scored as classification: each class present in the truth
    or the predictions contributes precision/recall, and classes never
    predicted nor present score zero F1.  Returns None when the column has no
    masked cells.
    """
    rows = mask.rows_for(column)
    if not rows:
        return None
    truth = [original.cell(r, column) for r in rows]
    pred = [imputed.cell(r, column) for r in rows]
    labels = sorted(set(truth) | set(pred), key=lambda v: (str(type(v)), str(v)))
    scores = []
    for label in labels:
        tp = sum(1 for t, p in zip(truth, pred) if t == label and p == label)
        fp = sum(1 for t, p in zip(truth, pred) if t != label and p == label)
        fn = sum(1 for t, p in zip(truth, pred) if t == label and p != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        scores.append(f1)
    return float(np.mean(scores))


# ---------------------------------------------------------------------------
# baseline


def baseline_impute(table: Table) -> Table:
    """Column-level baseline: mean for numeric, mode for categorical/text,
    median for dates.  Means going into integer columns are rounded."""
    report = infer_all(table)
    typed = apply_types(table, report)
    new_columns = []
    for col in typed.columns:
        datatype = report.datatype(col.name)
        present = [c for c in col.cells if c is not None]
        fill: Cell = None
        if not present or datatype is DataType.EMPTY:
            new_columns.append(Column(col.name, list(col.cells), datatype))
            continue
        if datatype in NUMERIC_TYPES:
            mean = sum(float(c) for c in present) / len(present)
            if datatype in INTEGER_TYPES:
                fill = int(np.floor(mean + 0.5)) if mean >= 0 else int(np.ceil(mean - 0.5))
            else:
                fill = float(mean)
        elif datatype is DataType.DATE:
            epochs = sorted(c.epoch for c in present)
            mid = len(epochs) // 2
            median = epochs[mid] if len(epochs) % 2 else (epochs[mid - 1] + epochs[mid]) / 2.0
            fill = DateValue(int(np.floor(median + 0.5)), present[0].fmt)
        else:
            counts: dict[Cell, int] = {}
            for c in present:
                counts[c] = counts.get(c, 0) + 1
            best = max(counts.values())
            fill = min(
                (v for v, n in counts.items() if n == best),
                key=lambda v: (str(type(v)), str(v)),
            )
        cells = [fill if c is None else c for c in col.cells]
        new_columns.append(Column(col.name, cells, datatype))
    return Table(new_columns)


# ---------------------------------------------------------------------------
# experiment protocol


@dataclass
class MethodScores:
    nrmse: float | None = None
    f1_macro: float | None = None
    rmse_per_column: dict[str, float] = field(default_factory=dict)
    f1_per_column: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "nrmse": self.nrmse,
            "f1_macro": self.f1_macro,
            "rmse_per_column": self.rmse_per_column,
            "f1_per_column": self.f1_per_column,
        }


@dataclass
class PercScores:
    perc: float
    methods: dict[str, MethodScores]

    def to_dict(self) -> dict:
        return {
            "perc": self.perc,
            "methods": {name: m.to_dict() for name, m in self.methods.items()},
        }


@dataclass
class EvalReport:
    bench: str
    seed: int
    iters: int
    rows: int
    cols: int
    percs: list[PercScores]

    def to_dict(self) -> dict:
        return {
            "bench": self.bench,
            "seed": self.seed,
            "iters": self.iters,
            "rows": self.rows,
            "cols": self.cols,
            "percs": [p.to_dict() for p in self.percs],
        }

    def table_rows(self) -> list[tuple[str, str, str, str, str]]:
        rows = [("bench", "perc", "method", "NRMSE", "F1")]
        for entry in self.percs:
            for method, scores in entry.methods.items():
                rows.append((
                    self.bench,
                    f"{entry.perc:g}",
                    method,
                    "-" if scores.nrmse is None else f"{scores.nrmse:.4f}",
                    "-" if scores.f1_macro is None else f"{scores.f1_macro:.4f}",
                ))
        return rows

    def format_table(self) -> str:
        rows = self.table_rows()
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = [
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
            for row in rows
        ]
        return "\n".join(lines) + "\n"


METHOD_CONSTRAINT = "constraint"
METHOD_BASELINE = "mean_mode"


def _iteration_seed(seed: int, perc_index: int, iteration: int) -> int:
    return (seed * 1_000_003 + perc_index * 10_007 + iteration * 101) % (2**63)


def _average(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def run_experiment(
    table: Table,
    percs: list[float],
    iters: int = 5,
    seed: int = 0,
    config: InferenceConfig | None = None,
    bench: str = "data",
) -> EvalReport:
    """Mask, impute, score ``iters`` times per percentage and average.

    The input table must be complete; constraints are re-inferred from each
    masked table so the imputer never sees the hidden truth.  Column roles for
    scoring (numeric vs categorical) come from the original table.
    """
    if table.has_missing():
        raise ValueError("run_experiment needs a complete table")
    config = config or InferenceConfig()
    report = infer_all(table)
    original = apply_types(table, report)
    numeric_cols = report.columns_of_type(*SCORED_NUMERIC)
    class_cols = report.columns_of_type(*CATEGORICAL_TYPES, DataType.TEXT)

    perc_entries: list[PercScores] = []
    for perc_index, perc in enumerate(percs):
        per_iter: dict[str, list[MethodScores]] = {METHOD_CONSTRAINT: [], METHOD_BASELINE: []}
        for iteration in range(iters):
            mask_seed = _iteration_seed(seed, perc_index, iteration)
            masked, mask = inject_missing(original, perc, mask_seed)
            constraints = infer_constraints(masked, config)
            ours = impute_table(masked, constraints).table
            base = baseline_impute(masked)
            for method, filled in ((METHOD_CONSTRAINT, ours), (METHOD_BASELINE, base)):
                scores = MethodScores()
                scores.nrmse = nrmse(original, filled, mask, types=report)
                for name in numeric_cols:
                    if mask.rows_for(name):
                        scores.rmse_per_column[name] = rmse(original, filled, mask, name)
                for name in class_cols:
                    value = f1_categorical(original, filled, mask, name)
                    if value is not None:
                        scores.f1_per_column[name] = value
                if scores.f1_per_column:
                    scores.f1_macro = float(np.mean(list(scores.f1_per_column.values())))
                per_iter[method].append(scores)

        methods: dict[str, MethodScores] = {}
        for method, iterations in per_iter.items():
            combined = MethodScores()
            combined.nrmse = _average([s.nrmse for s in iterations if s.nrmse is not None])
            combined.f1_macro = _average(
                [s.f1_macro for s in iterations if s.f1_macro is not None]
            )
            for name in numeric_cols:
                values = [
                    s.rmse_per_column[name] for s in iterations if name in s.rmse_per_column
                ]
                if values:
                    combined.rmse_per_column[name] = float(np.mean(values))
            for name in class_cols:
                values = [
                    s.f1_per_column[name] for s in iterations if name in s.f1_per_column
                ]
                if values:
                    combined.f1_per_column[name] = float(np.mean(values))
            methods[method] = combined
        perc_entries.append(PercScores(perc=perc, methods=methods))

    return EvalReport(
        bench=bench,
        seed=seed,
        iters=iters,
        rows=original.row_count,
        cols=len(original.columns),
        percs=perc_entries,
    )


# ---------------------------------------------------------------------------
# synthetic benchmark and optional encoding


def make_polynomial_benchmark(
    rows: int = 1000, seed: int = 0, noise: float = 0.02
) -> Table:
    """Synthetic table: one uniform base column plus polynomial responses.

    Each response column is a fixed low-degree polynomial of the base column
    with Gaussian noise of ``noise`` times the clean response's standard
    deviation added (0 gives exact relationships).
    """
    rng = np.random.default_rng(seed)
    base = rng.uniform(-3.0, 3.0, rows)
    columns = [Column("base", [float(v) for v in base])]
    for name, coeffs in BENCHMARK_COEFFICIENTS.items():
        clean = np.polynomial.polynomial.polyval(base, np.asarray(coeffs))
        if noise > 0:
            clean = clean + rng.standard_normal(rows) * noise * float(np.std(clean))
        columns.append(Column(name, [float(v) for v in clean]))
    return Table(columns)


def encode_categorical_text(table: Table) -> tuple[Table, dict[str, dict[str, int]]]:
    """Optional pass replacing CAT_TEXT values with integer codes.

    Codes follow sorted value order per column.  Returns the encoded table and
    the per-column value-to-code mapping so results can be decoded.
    """
    report = infer_all(table)
    typed = apply_types(table, report)
    mappings: dict[str, dict[str, int]] = {}
    new_columns = []
    for col in typed.columns:
        if report.datatype(col.name) is DataType.CAT_TEXT:
            values = sorted({c for c in col.cells if c is not None})
            mapping = {value: code for code, value in enumerate(values)}
            mappings[col.name] = mapping
            cells = [None if c is None else mapping[c] for c in col.cells]
            new_columns.append(Column(col.name, cells))
        else:
            new_columns.append(Column(col.name, list(col.cells)))
    return Table(new_columns), mappings
