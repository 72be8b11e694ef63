"""Seven-way column datatype classification.

A column is classified from its non-missing cells only, with branch order:
empty, real-valued numeric, date, then a uniqueness test that separates
categorical columns (few distinct values) from free-form numeric/text ones.
The categorical cutoff is ``max(ln(n), 20)`` distinct values, so for any
realistic column size the floor of 20 is what matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .table import Cell, Column, DateValue, Table, render_cell

__all__ = [
    "CATEGORICAL_TYPES",
    "DataType",
    "NUMERIC_TYPES",
    "ColumnTypeInfo",
    "TypeReport",
    "apply_types",
    "infer_all",
    "infer_datatype",
    "uniqueness_threshold",
]

UNIQUENESS_FLOOR = 20.0


class DataType(str, Enum):
    EMPTY = "EMPTY"
    DATE = "DATE"
    TEXT = "TEXT"
    CAT_TEXT = "CAT_TEXT"
    NUMERIC = "NUMERIC"
    CAT_NUM = "CAT_NUM"
    FLOAT = "FLOAT"


CATEGORICAL_TYPES = frozenset({DataType.CAT_TEXT, DataType.CAT_NUM})
NUMERIC_TYPES = frozenset({DataType.NUMERIC, DataType.FLOAT})
#: Integer-valued datatypes: imputed numeric values are rounded for these.
INTEGER_TYPES = frozenset({DataType.NUMERIC, DataType.CAT_NUM})


@dataclass(frozen=True)
class ColumnTypeInfo:
    """Classification of one column plus the counts that produced it."""

    datatype: DataType
    n_values: int
    n_unique: int
    threshold: float

    def to_dict(self) -> dict:
        return {
            "datatype": self.datatype.value,
            "n_values": self.n_values,
            "n_unique": self.n_unique,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ColumnTypeInfo":
        return cls(
            datatype=DataType(data["datatype"]),
            n_values=data["n_values"],
            n_unique=data["n_unique"],
            threshold=data["threshold"],
        )


@dataclass
class TypeReport:
    """Per-column classification for a whole table, in column order."""

    entries: dict[str, ColumnTypeInfo]

    def datatype(self, name: str) -> DataType:
        return self.entries[name].datatype

    def columns_of_type(self, *types: DataType) -> list[str]:
        wanted = set(types)
        return [name for name, info in self.entries.items() if info.datatype in wanted]

    def to_dict(self) -> dict:
        return {name: info.to_dict() for name, info in self.entries.items()}

    @classmethod
    def from_dict(cls, data: dict) -> "TypeReport":
        return cls({name: ColumnTypeInfo.from_dict(d) for name, d in data.items()})


def uniqueness_threshold(n_values: int) -> float:
    """Distinct-value cutoff below which a column counts as categorical."""
    if n_values <= 0:
        return UNIQUENESS_FLOOR
    return max(math.log(n_values), UNIQUENESS_FLOOR)


def _classify(cells: list[Cell]) -> ColumnTypeInfo:
    present = [c for c in cells if c is not None]
    n_values = len(present)
    threshold = uniqueness_threshold(n_values)
    if n_values == 0:
        return ColumnTypeInfo(DataType.EMPTY, 0, 0, threshold)
    n_unique = len(set(present))
    all_numeric = all(type(c) in (int, float) for c in present)
    if all_numeric and any(type(c) is float for c in present):
        return ColumnTypeInfo(DataType.FLOAT, n_values, n_unique, threshold)
    if all(isinstance(c, DateValue) for c in present):
        return ColumnTypeInfo(DataType.DATE, n_values, n_unique, threshold)
    all_int = all(type(c) is int for c in present)
    if n_unique < threshold:
        datatype = DataType.CAT_NUM if all_int else DataType.CAT_TEXT
    else:
        datatype = DataType.NUMERIC if all_int else DataType.TEXT
    return ColumnTypeInfo(datatype, n_values, n_unique, threshold)


def infer_datatype(column: Column) -> DataType:
    """Classify a single column; total over any cell contents."""
    return _classify(column.cells).datatype


def infer_all(table: Table) -> TypeReport:
    """Classify every column of ``table``."""
    return TypeReport({col.name: _classify(col.cells) for col in table.columns})


def _as_text(cell: Cell) -> str:
    return render_cell(cell)


def apply_types(table: Table, report: TypeReport) -> Table:
    """Return a new table with datatypes assigned and cells made consistent.

    Mixed columns degrade to text: every non-missing cell of a TEXT/CAT_TEXT
    column becomes its textual rendering, and integer cells inside a FLOAT
    column are widened to floats.  No other coercion happens.
    """
    new_columns: list[Column] = []
    for col in table.columns:
        if col.name not in report.entries:
            raise ValueError(f"type report has no entry for column {col.name!r}")
        datatype = report.entries[col.name].datatype
        if datatype is DataType.FLOAT:
            cells = [float(c) if type(c) is int else c for c in col.cells]
        elif datatype in (DataType.TEXT, DataType.CAT_TEXT):
            cells = [None if c is None else _as_text(c) for c in col.cells]
        else:
            cells = list(col.cells)
        new_columns.append(Column(col.name, cells, datatype))
    return Table(new_columns)
