"""Association-driven imputation with per-cell explanations.

Missing cells are filled row by row.  Within a row, columns are visited in an
order derived from the association graph (predictors before dependents), so a
cell imputed early in the row can serve as a predictor for later cells.  For
each datatype a fixed cascade of imputers is tried, falling back to a
column-level statistic when no association applies:

* NUMERIC / FLOAT:  num_num -> cat_num_num -> cat_num -> column mean
* CAT_NUM / CAT_TEXT:  num_cat -> cat_cat -> column most-frequent
* TEXT:  cat_text -> column most-frequent
* DATE:  date_date -> column median

Each filled cell yields an :class:`ImputationRecord` naming the method, the
predictor cells used, and a rendered human-readable explanation.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .constraints import (
    Association,
    AssociationKind,
    CategoricalConstraint,
    ConstraintSet,
    DateConstraint,
    NumericConstraint,
)
from .datatypes import (
    CATEGORICAL_TYPES,
    INTEGER_TYPES,
    NUMERIC_TYPES,
    DataType,
    apply_types,
)
from .table import Cell, Column, DateValue, Table, render_cell

logger = logging.getLogger(__name__)

__all__ = [
    "ImputationMethod",
    "ImputationOrder",
    "ImputationRecord",
    "ImputationResult",
    "Predictor",
    "SchemaMismatchError",
    "build_imputation_order",
    "impute_cat_cat",
    "impute_cat_num",
    "impute_cat_num_num",
    "impute_cat_text",
    "impute_date_date",
    "impute_num_cat",
    "impute_num_num",
    "impute_table",
    "render_explanation",
]


class SchemaMismatchError(Exception):
    """Table columns do not match the columns the constraints were built for."""


class ImputationMethod(str, Enum):
    NUM_NUM = "NUM_NUM"
    CAT_NUM_NUM = "CAT_NUM_NUM"
    CAT_NUM = "CAT_NUM"
    NUM_CAT = "NUM_CAT"
    CAT_CAT = "CAT_CAT"
    CAT_TEXT = "CAT_TEXT"
    DATE_DATE = "DATE_DATE"
    COLUMN_MEAN = "COLUMN_MEAN"
    COLUMN_MOST_FREQUENT = "COLUMN_MOST_FREQUENT"


@dataclass(frozen=True)
class Predictor:
    column: str
    value: Cell


@dataclass
class ImputationRecord:
    row: int
    column: str
    value: Cell
    method: ImputationMethod
    predictors: list[Predictor]
    error_or_prob: float
    explanation: str = ""
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "row": self.row,
            "column": self.column,
            "value": _plain_value(self.value),
            "method": self.method.value,
            "predictors": [
                {"column": p.column, "value": _plain_value(p.value)} for p in self.predictors
            ],
            "error_or_prob": self.error_or_prob,
            "explanation": self.explanation,
        }


@dataclass
class ImputationOrder:
    columns: list[str]
    removed_edges: list[tuple[str, str, float]] = field(default_factory=list)


@dataclass
class ImputationResult:
    table: Table
    records: list[ImputationRecord]
    order: ImputationOrder


def _plain_value(cell: Cell):
    if isinstance(cell, DateValue):
        return cell.render()
    return cell


def _is_number(cell: Cell) -> bool:
    return type(cell) in (int, float)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def _coerce_numeric(value: float, datatype: DataType) -> Cell:
    if datatype in INTEGER_TYPES:
        return _round_half_away(value)
    return float(value)


def _value_sort_key(value: Cell):
    if isinstance(value, str):
        return (1, value)
    return (0, value)


def _modal(frequency: Mapping) -> tuple[Cell, float]:
    """Most frequent value and its relative share; ties pick the smallest value."""
    total = sum(frequency.values())
    best_count = max(frequency.values())
    best_value = min(
        (v for v, c in frequency.items() if c == best_count), key=_value_sort_key
    )
    return best_value, best_count / total


# ---------------------------------------------------------------------------
# imputation order


_TYPE_RANK = {
    DataType.CAT_NUM: 0,
    DataType.CAT_TEXT: 0,
    DataType.NUMERIC: 1,
    DataType.FLOAT: 1,
    DataType.TEXT: 2,
    DataType.DATE: 3,
    DataType.EMPTY: 4,
}


def _find_cycle(
    nodes: Sequence[str], adjacency: dict[str, list[str]]
) -> Optional[list[tuple[str, str]]]:
    """First cycle found by DFS in node order, as a list of edges, else None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}

    def visit(start: str) -> Optional[list[str]]:
        path: list[str] = []
        stack: list[tuple[str, iter]] = [(start, iter(adjacency.get(start, ())))]
        color[start] = GRAY
        path.append(start)
        while stack:
            node, neighbors = stack[-1]
            advanced = False
            for nxt in neighbors:
                if color[nxt] == GRAY:
                    return path[path.index(nxt):]
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    path.append(nxt)
                    stack.append((nxt, iter(adjacency.get(nxt, ()))))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                path.pop()
                color[node] = BLACK
        return None

    for node in nodes:
        if color[node] == WHITE:
            cycle_nodes = visit(node)
            if cycle_nodes:
                edges = [
                    (cycle_nodes[i], cycle_nodes[i + 1]) for i in range(len(cycle_nodes) - 1)
                ]
                edges.append((cycle_nodes[-1], cycle_nodes[0]))
                return edges
    return None


def build_imputation_order(
    columns: Sequence[Column], associations: Sequence[Association]
) -> ImputationOrder:
    """Topologically sort columns along association edges.

    Each (source, target) pair with any association becomes a directed edge
    weighted by the minimum error among its associations.  Cycles are broken
    by repeatedly removing the worst (highest-error) edge on a cycle; removals
    are reported so runs can be audited.  Ties in the topological order prefer
    categorical columns, then numeric, text, and date, then column position.
    """
    names = [col.name for col in columns]
    index = {name: i for i, name in enumerate(names)}
    rank = {
        col.name: _TYPE_RANK.get(col.datatype, len(_TYPE_RANK)) for col in columns
    }

    edges: dict[tuple[str, str], float] = {}
    for assoc in associations:
        if assoc.source not in index or assoc.target not in index:
            continue
        key = (assoc.source, assoc.target)
        if key not in edges or assoc.error < edges[key]:
            edges[key] = assoc.error

    removed: list[tuple[str, str, float]] = []
    while True:
        adjacency: dict[str, list[str]] = {n: [] for n in names}
        for source, target in edges:
            adjacency[source].append(target)
        for targets in adjacency.values():
            targets.sort(key=lambda n: index[n])
        cycle = _find_cycle(names, adjacency)
        if cycle is None:
            break
        worst = max(
            cycle, key=lambda e: (edges[e], index[e[0]], index[e[1]])
        )
        removed.append((worst[0], worst[1], edges[worst]))
        logger.debug("breaking cycle: dropping edge %s->%s (error %.6g)", *worst, edges[worst])
        del edges[worst]

    indegree = {n: 0 for n in names}
    successors: dict[str, list[str]] = {n: [] for n in names}
    for source, target in edges:
        indegree[target] += 1
        successors[source].append(target)

    heap = [(rank[n], index[n], n) for n in names if indegree[n] == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        _, _, node = heapq.heappop(heap)
        order.append(node)
        for nxt in successors[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(heap, (rank[nxt], index[nxt], nxt))
    assert len(order) == len(names), "cycle breaking left a cycle behind"
    return ImputationOrder(columns=order, removed_edges=removed)


# ---------------------------------------------------------------------------
# individual imputers

# Each imputer returns an ImputationRecord with row=-1 (filled in by
# impute_table) or None when it does not apply, signalling the next stage of
# the cascade.


def impute_num_num(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Evaluate the minimum-error polynomial whose source cell is present."""
    best: Optional[tuple[Association, Cell]] = None
    for assoc in constraints.associations:
        if assoc.kind is not AssociationKind.NUM_NUM or assoc.target != column:
            continue
        source_value = row.get(assoc.source)
        if not _is_number(source_value):
            continue
        if best is None or assoc.error < best[0].error:
            best = (assoc, source_value)
    if best is None:
        return None
    assoc, source_value = best
    value = _coerce_numeric(
        assoc.payload.evaluate(float(source_value)), constraints.datatypes.datatype(column)
    )
    return ImputationRecord(
        row=-1,
        column=column,
        value=value,
        method=ImputationMethod.NUM_NUM,
        predictors=[Predictor(assoc.source, source_value)],
        error_or_prob=assoc.error,
        detail=f"polynomial {assoc.payload.format(assoc.source)}",
    )


def impute_cat_num_num(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Like num_num, but with polynomials fitted per category-column value."""
    best: Optional[tuple[Association, Cell, Cell]] = None
    for assoc in constraints.associations:
        if assoc.kind is not AssociationKind.CAT_NUM_NUM or assoc.target != column:
            continue
        conditioning = row.get(assoc.catcol)
        source_value = row.get(assoc.source)
        if conditioning is None or conditioning != assoc.src_value:
            continue
        if not _is_number(source_value):
            continue
        if best is None or assoc.error < best[0].error:
            best = (assoc, source_value, conditioning)
    if best is None:
        return None
    assoc, source_value, conditioning = best
    value = _coerce_numeric(
        assoc.payload.evaluate(float(source_value)), constraints.datatypes.datatype(column)
    )
    return ImputationRecord(
        row=-1,
        column=column,
        value=value,
        method=ImputationMethod.CAT_NUM_NUM,
        predictors=[
            Predictor(assoc.source, source_value),
            Predictor(assoc.catcol, conditioning),
        ],
        error_or_prob=assoc.error,
        detail=(
            f"polynomial {assoc.payload.format(assoc.source)} for "
            f"{assoc.catcol}={render_cell(assoc.src_value)}"
        ),
    )


def impute_cat_num(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Expected value of the minimum-error per-category distribution."""
    best: Optional[tuple[Association, Cell]] = None
    for assoc in constraints.associations:
        if assoc.kind is not AssociationKind.CAT_NUM or assoc.target != column:
            continue
        source_value = row.get(assoc.source)
        if source_value is None or source_value != assoc.src_value:
            continue
        if best is None or assoc.error < best[0].error:
            best = (assoc, source_value)
    if best is None:
        return None
    assoc, source_value = best
    value = _coerce_numeric(
        assoc.payload.dist.mean, constraints.datatypes.datatype(column)
    )
    return ImputationRecord(
        row=-1,
        column=column,
        value=value,
        method=ImputationMethod.CAT_NUM,
        predictors=[Predictor(assoc.source, source_value)],
        error_or_prob=assoc.error,
        detail=f"group mean {assoc.payload.dist.mean:.6g}",
    )


def impute_num_cat(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Vote for the category value compatible with the most numeric cells.

    A candidate category value is compatible with a numeric column when the
    observed cell falls inside the candidate group's [min, max] range
    (inclusive: values equal to an observed extremum conform).  Candidates
    seen in the most numeric columns win; remaining ties fall to the smallest
    summed |observed - group mean|, then to value order.
    """
    votes: dict[Cell, int] = {}
    deviation: dict[Cell, float] = {}
    used: dict[Cell, list[Predictor]] = {}
    for assoc in constraints.associations:
        if assoc.kind is not AssociationKind.CAT_NUM or assoc.source != column:
            continue
        observed = row.get(assoc.target)
        if not _is_number(observed):
            continue
        payload: NumericConstraint = assoc.payload
        if payload.min <= observed <= payload.max:
            value = assoc.src_value
            votes[value] = votes.get(value, 0) + 1
            deviation[value] = deviation.get(value, 0.0) + abs(observed - payload.dist.mean)
            used.setdefault(value, []).append(Predictor(assoc.target, observed))
    if not votes:
        return None
    top = max(votes.values())
    winner = min(
        (v for v, n in votes.items() if n == top),
        key=lambda v: (deviation[v], _value_sort_key(v)),
    )
    return ImputationRecord(
        row=-1,
        column=column,
        value=winner,
        method=ImputationMethod.NUM_CAT,
        predictors=used[winner],
        error_or_prob=deviation[winner],
        detail=f"value ranges of {top} numeric column(s)",
    )


def _impute_most_frequent_target(
    column: str,
    row: Mapping[str, Cell],
    constraints: ConstraintSet,
    kind: AssociationKind,
    method: ImputationMethod,
) -> Optional[ImputationRecord]:
    best: Optional[tuple[Cell, float, Association, Cell]] = None
    max_prob = 0.0
    for assoc in constraints.associations:
        if assoc.kind is not kind or assoc.target != column:
            continue
        source_value = row.get(assoc.source)
        if source_value is None or source_value != assoc.src_value:
            continue
        value, prob = _modal(assoc.payload.frequency)
        if prob > max_prob:
            max_prob = prob
            best = (value, prob, assoc, source_value)
    if best is None:
        return None
    value, prob, assoc, source_value = best
    return ImputationRecord(
        row=-1,
        column=column,
        value=value,
        method=method,
        predictors=[Predictor(assoc.source, source_value)],
        error_or_prob=prob,
        detail=f"co-occurs in {prob:.0%} of rows",
    )


def impute_cat_cat(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Modal target value over the applicable per-source-value frequency maps."""
    return _impute_most_frequent_target(
        column, row, constraints, AssociationKind.CAT_CAT, ImputationMethod.CAT_CAT
    )


def impute_cat_text(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Modal text value over the applicable per-source-value frequency maps."""
    return _impute_most_frequent_target(
        column, row, constraints, AssociationKind.CAT_TEXT, ImputationMethod.CAT_TEXT
    )


def impute_date_date(
    column: str, row: Mapping[str, Cell], constraints: ConstraintSet
) -> Optional[ImputationRecord]:
    """Source date plus mean offset, preferring the tightest-range association."""
    best: Optional[tuple[Association, DateValue]] = None
    best_width = math.inf
    for assoc in constraints.associations:
        if assoc.kind is not AssociationKind.DATE_DATE or assoc.target != column:
            continue
        source_value = row.get(assoc.source)
        if not isinstance(source_value, DateValue):
            continue
        width = assoc.payload.maxdiff - assoc.payload.mindiff
        if width < best_width:
            best_width = width
            best = (assoc, source_value)
    if best is None:
        return None
    assoc, source_value = best
    target_constraint = constraints.column_constraints.get(column)
    fmt = (
        target_constraint.fmt
        if isinstance(target_constraint, DateConstraint)
        else source_value.fmt
    )
    epoch = _round_half_away(source_value.epoch + assoc.payload.meandiff)
    return ImputationRecord(
        row=-1,
        column=column,
        value=DateValue(epoch=epoch, fmt=fmt),
        method=ImputationMethod.DATE_DATE,
        predictors=[Predictor(assoc.source, source_value)],
        error_or_prob=assoc.error,
        detail=f"mean offset {assoc.payload.meandiff / 86400.0:.6g} days",
    )


# ---------------------------------------------------------------------------
# column-level fallbacks


@dataclass
class _Fallbacks:
    """Column statistics for the terminal stage of each cascade."""

    mean: dict[str, Cell]
    mode: dict[str, Cell]
    median_date: dict[str, DateValue]

    @classmethod
    def from_table(cls, table: Table, constraints: ConstraintSet) -> "_Fallbacks":
        mean: dict[str, Cell] = {}
        mode: dict[str, Cell] = {}
        median_date: dict[str, DateValue] = {}
        for col in table.columns:
            datatype = constraints.datatypes.datatype(col.name)
            present = [c for c in col.cells if c is not None]
            if datatype in NUMERIC_TYPES:
                if present:
                    mean[col.name] = _coerce_numeric(
                        sum(float(c) for c in present) / len(present), datatype
                    )
                else:
                    stored = constraints.column_constraints.get(col.name)
                    if isinstance(stored, NumericConstraint):
                        mean[col.name] = _coerce_numeric(stored.mean, datatype)
            elif datatype in CATEGORICAL_TYPES or datatype is DataType.TEXT:
                if present:
                    counts: dict[Cell, int] = {}
                    for c in present:
                        counts[c] = counts.get(c, 0) + 1
                    mode[col.name], _ = _modal(counts)
                else:
                    stored = constraints.column_constraints.get(col.name)
                    if isinstance(stored, CategoricalConstraint) and stored.frequency:
                        mode[col.name], _ = _modal(stored.frequency)
            elif datatype is DataType.DATE:
                if present:
                    epochs = sorted(c.epoch for c in present)
                    mid = len(epochs) // 2
                    if len(epochs) % 2:
                        median = float(epochs[mid])
                    else:
                        median = (epochs[mid - 1] + epochs[mid]) / 2.0
                    fmts = {}
                    for c in present:
                        fmts[c.fmt] = fmts.get(c.fmt, 0) + 1
                    fmt = max(fmts.items(), key=lambda kv: kv[1])[0]
                    median_date[col.name] = DateValue(_round_half_away(median), fmt)
                else:
                    stored = constraints.column_constraints.get(col.name)
                    if isinstance(stored, DateConstraint):
                        middle = _round_half_away((stored.mindate + stored.maxdate) / 2.0)
                        median_date[col.name] = DateValue(middle, stored.fmt)
        return cls(mean=mean, mode=mode, median_date=median_date)


def _fallback_record(
    column: str, datatype: DataType, fallbacks: _Fallbacks
) -> Optional[ImputationRecord]:
    if datatype in NUMERIC_TYPES:
        if column not in fallbacks.mean:
            return None
        return ImputationRecord(
            row=-1,
            column=column,
            value=fallbacks.mean[column],
            method=ImputationMethod.COLUMN_MEAN,
            predictors=[],
            error_or_prob=0.0,
            detail="mean",
        )
    if datatype in CATEGORICAL_TYPES or datatype is DataType.TEXT:
        if column not in fallbacks.mode:
            return None
        return ImputationRecord(
            row=-1,
            column=column,
            value=fallbacks.mode[column],
            method=ImputationMethod.COLUMN_MOST_FREQUENT,
            predictors=[],
            error_or_prob=0.0,
            detail="most frequent",
        )
    if datatype is DataType.DATE:
        if column not in fallbacks.median_date:
            return None
        return ImputationRecord(
            row=-1,
            column=column,
            value=fallbacks.median_date[column],
            method=ImputationMethod.COLUMN_MEAN,
            predictors=[],
            error_or_prob=0.0,
            detail="median",
        )
    return None


_NUMERIC_CASCADE = (impute_num_num, impute_cat_num_num, impute_cat_num)
_CATEGORICAL_CASCADE = (impute_num_cat, impute_cat_cat)
_TEXT_CASCADE = (impute_cat_text,)
_DATE_CASCADE = (impute_date_date,)


def _cascade_for(datatype: DataType):
    if datatype in NUMERIC_TYPES:
        return _NUMERIC_CASCADE
    if datatype in CATEGORICAL_TYPES:
        return _CATEGORICAL_CASCADE
    if datatype is DataType.TEXT:
        return _TEXT_CASCADE
    if datatype is DataType.DATE:
        return _DATE_CASCADE
    return ()


# ---------------------------------------------------------------------------
# explanations


def render_explanation(record: ImputationRecord) -> str:
    """Deterministic per-method template naming predictors and the rule used."""
    shown = render_cell(record.value)
    if isinstance(record.value, str):
        shown = f"'{record.value}'"
    col = record.column

    def _pred(p: Predictor) -> str:
        text = render_cell(p.value)
        if isinstance(p.value, str):
            text = f"'{p.value}'"
        return f"{p.column}={text}"

    method = record.method
    if method in (ImputationMethod.NUM_NUM, ImputationMethod.CAT_NUM_NUM):
        because = " and ".join(_pred(p) for p in record.predictors)
        return (
            f"Imputed {col}={shown} because {because} implies {record.detail} "
            f"(fit error={record.error_or_prob:.6g})"
        )
    if method is ImputationMethod.CAT_NUM:
        because = " and ".join(_pred(p) for p in record.predictors)
        return (
            f"Imputed {col}={shown} because {because} "
            f"({record.detail}, error={record.error_or_prob:.6g})"
        )
    if method is ImputationMethod.NUM_CAT:
        because = ", ".join(_pred(p) for p in record.predictors)
        return (
            f"Imputed {col}={shown} because it conforms with {record.detail}: "
            f"{because} (total deviation={record.error_or_prob:.6g})"
        )
    if method in (ImputationMethod.CAT_CAT, ImputationMethod.CAT_TEXT):
        because = " and ".join(_pred(p) for p in record.predictors)
        return (
            f"Imputed {col}={shown} because {because} {record.detail} "
            f"(probability={record.error_or_prob:.6g})"
        )
    if method is ImputationMethod.DATE_DATE:
        because = " and ".join(_pred(p) for p in record.predictors)
        return f"Imputed {col}={shown} because {because} plus {record.detail}"
    if method is ImputationMethod.COLUMN_MEAN:
        return f"Imputed {col}={shown} as the column {record.detail or 'mean'} of {col}"
    return f"Imputed {col}={shown} as the most frequent value of {col}"


# ---------------------------------------------------------------------------
# full-table imputation


def _check_schema(table: Table, constraints: ConstraintSet) -> None:
    expected = list(constraints.datatypes.entries)
    actual = table.column_names
    if expected != actual:
        raise SchemaMismatchError(
            f"constraints were built for columns {expected}, table has {actual}"
        )


def impute_table(table: Table, constraints: ConstraintSet) -> ImputationResult:
    """Fill every missing cell of ``table`` using ``constraints``.

    Rows are processed independently and in order; inside a row, missing
    cells are visited in the imputation order so that already-imputed cells
    can act as predictors.  Columns classified EMPTY are left untouched (there
    is nothing to learn from them).  The input table is not modified.
    """
    _check_schema(table, constraints)
    typed = apply_types(table, constraints.datatypes)
    order = build_imputation_order(typed.columns, constraints.associations)
    fallbacks = _Fallbacks.from_table(typed, constraints)
    datatype_of = {name: constraints.datatypes.datatype(name) for name in typed.column_names}

    cells = {col.name: list(col.cells) for col in typed.columns}
    records: list[ImputationRecord] = []
    names = typed.column_names
    for row_idx in range(typed.row_count):
        row_state: dict[str, Cell] = {name: cells[name][row_idx] for name in names}
        pending = [
            name
            for name in order.columns
            if row_state[name] is None and datatype_of[name] is not DataType.EMPTY
        ]
        for column in pending:
            datatype = datatype_of[column]
            record: Optional[ImputationRecord] = None
            for imputer in _cascade_for(datatype):
                record = imputer(column, row_state, constraints)
                if record is not None:
                    break
            if record is None:
                record = _fallback_record(column, datatype, fallbacks)
            if record is None:
                # No statistics available anywhere; leave the cell missing.
                continue
            record.row = row_idx
            record.explanation = render_explanation(record)
            row_state[column] = record.value
            cells[column][row_idx] = record.value
            records.append(record)

    new_columns = [
        Column(name, cells[name], datatype_of[name]) for name in names
    ]
    return ImputationResult(table=Table(new_columns), records=records, order=order)
