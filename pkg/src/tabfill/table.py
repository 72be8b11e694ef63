"""Columnar table model: typed cells, CSV ingestion and egress, missing-value detection.

Cells are plain Python values: ``int``, ``float``, ``str``, :class:`DateValue`,
or ``None`` for a missing cell.  Each raw CSV cell is parsed in a fixed order
(missing token, integer, real, date, text) so parsing is deterministic; columns
that mix differently-parsed cells are reconciled later by type inference, not
here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, TYPE_CHECKING, Iterable, Union

if TYPE_CHECKING:
    from .datatypes import DataType

__all__ = [
    "Cell",
    "Column",
    "DateValue",
    "ParseOptions",
    "Table",
    "TableError",
    "load_csv",
    "parse_cell",
    "render_cell",
    "write_csv",
]

#: Tokens treated as a missing cell (matched case-insensitively).  The first
#: token is used when writing missing cells back out.
DEFAULT_MISSING_TOKENS = ("", "NA", "N/A", "?", "null", "NaN")

#: Date patterns tried in order; first match wins.
DEFAULT_DATE_FORMATS = ("%Y-%m-%d", "%Y-%m-%dT%H:%M:%S", "%d/%m/%Y", "%m/%d/%Y")


class TableError(Exception):
    """Raised for malformed input data (ragged rows, duplicate headers, ...)."""


@dataclass(frozen=True)
class DateValue:
    """A calendar date-time stored as epoch seconds plus its source format.

    Keeping the format pattern means egress reproduces the notation the value
    arrived in.
    """

    epoch: int
    fmt: str

    def to_datetime(self) -> datetime:
        return datetime.fromtimestamp(self.epoch, tz=timezone.utc)

    def render(self) -> str:
        return self.to_datetime().strftime(self.fmt)

    @classmethod
    def from_datetime(cls, moment: datetime, fmt: str) -> "DateValue":
        if moment.tzinfo is None:
            moment = moment.replace(tzinfo=timezone.utc)
        return cls(epoch=int(moment.timestamp()), fmt=fmt)


Cell = Union[int, float, str, DateValue, None]


@dataclass(frozen=True)
class ParseOptions:
    """Knobs for cell parsing and rendering.

    ``missing_tokens`` is ordered: matching is case-insensitive, and the first
    entry is the rendering of a missing cell on output.
    """

    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS
    date_formats: tuple[str, ...] = DEFAULT_DATE_FORMATS
    delimiter: str = ","

    def __post_init__(self) -> None:
        lookup = frozenset(tok.strip().lower() for tok in self.missing_tokens)
        object.__setattr__(self, "_missing_lookup", lookup)

    def is_missing_token(self, raw: str) -> bool:
        return raw.strip().lower() in self._missing_lookup  # type: ignore[attr-defined]


def parse_cell(raw: str, options: ParseOptions | None = None) -> Cell:
    """Parse one raw cell using the fixed precedence order.

    Precedence: missing token, integer, real, date (first matching format),
    else text.  Non-finite floats ("inf") are refused so they cannot poison
    numeric statistics.
    """
    options = options or ParseOptions()
    if options.is_missing_token(raw):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        value = float(raw)
        if math.isfinite(value):
            return value
    except ValueError:
        pass
    for fmt in options.date_formats:
        try:
            return DateValue.from_datetime(datetime.strptime(raw.strip(), fmt), fmt)
        except ValueError:
            continue
    return raw


def render_cell(cell: Cell, options: ParseOptions | None = None) -> str:
    """Inverse of :func:`parse_cell`: integers stay integers ("7", never "7.0")."""
    options = options or ParseOptions()
    if cell is None:
        return options.missing_tokens[0]
    if isinstance(cell, DateValue):
        return cell.render()
    if isinstance(cell, float):
        return repr(cell)
    return str(cell)


@dataclass
class Column:
    name: str
    cells: list[Cell]
    datatype: "DataType | None" = None


@dataclass
class Table:
    """An ordered list of equally long, uniquely named columns."""

    columns: list[Column] = field(default_factory=list)

    def __post_init__(self) -> None:
        names = [col.name for col in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise TableError(f"duplicate column name(s): {', '.join(dupes)}")
        lengths = {len(col.cells) for col in self.columns}
        if len(lengths) > 1:
            raise TableError(f"columns have unequal lengths: {sorted(lengths)}")

    @property
    def row_count(self) -> int:
        return len(self.columns[0].cells) if self.columns else 0

    @property
    def column_names(self) -> list[str]:
        return [col.name for col in self.columns]

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise KeyError(name)

    def cell(self, row: int, name: str) -> Cell:
        return self.column(name).cells[row]

    def rows(self) -> Iterable[dict[str, Cell]]:
        names = self.column_names
        for i in range(self.row_count):
            yield {name: self.column(name).cells[i] for name in names}

    def has_missing(self) -> bool:
        return any(cell is None for col in self.columns for cell in col.cells)


def _open_text(source: Union[str, Path, bytes, IO]) -> IO[str]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    # binary file-like
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def load_csv(source: Union[str, Path, bytes, IO], options: ParseOptions | None = None) -> Table:
    """Read a delimited file with a header row into a :class:`Table`.

    Raises :class:`TableError` for ragged rows (naming the offending data row)
    or duplicate header names.  A zero-byte source yields an empty table.
    """
    options = options or ParseOptions()
    stream = _open_text(source)
    try:
        reader = csv.reader(stream, delimiter=options.delimiter)
        records = list(reader)
    finally:
        if isinstance(source, (str, Path)):
            stream.close()
    if not records:
        return Table([])
    header = records[0]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise TableError(f"duplicate header column(s): {', '.join(dupes)}")
    width = len(header)
    cells_by_col: list[list[Cell]] = [[] for _ in header]
    for row_number, record in enumerate(records[1:], start=1):
        if len(record) != width:
            raise TableError(
                f"row {row_number} has {len(record)} fields, expected {width}"
            )
        for j, raw in enumerate(record):
            cells_by_col[j].append(parse_cell(raw, options))
    return Table([Column(name, cells) for name, cells in zip(header, cells_by_col)])


def write_csv(table: Table, sink: Union[str, Path, IO], options: ParseOptions | None = None) -> None:
    """Write ``table`` out so that loading the result reproduces it cell for cell."""
    options = options or ParseOptions()

    def _write(stream: IO[str]) -> None:
        writer = csv.writer(stream, delimiter=options.delimiter, lineterminator="\n")
        writer.writerow(table.column_names)
        names = table.column_names
        cols = [table.column(name).cells for name in names]
        for i in range(table.row_count):
            writer.writerow([render_cell(col[i], options) for col in cols])

    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="") as stream:
            _write(stream)
    elif isinstance(sink, io.TextIOBase):
        _write(sink)
    else:
        wrapper = io.TextIOWrapper(sink, encoding="utf-8", newline="")
        _write(wrapper)
        wrapper.flush()
        wrapper.detach()
