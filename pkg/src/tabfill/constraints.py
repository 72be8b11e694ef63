"""Constraint mining: per-column profiles and cross-column associations.

Six association families are inferred over ordered column pairs, keyed by the
datatypes of source and target:

==============  ===================  =================  ==========================
kind            source               target             payload
==============  ===================  =================  ==========================
CAT_CAT         CAT_TEXT / CAT_NUM   CAT_TEXT/CAT_NUM   target frequency map per source value
CAT_NUM         CAT_TEXT / CAT_NUM   NUMERIC / FLOAT    target min/max/mean/distribution per source value
CAT_TEXT        CAT_TEXT / CAT_NUM   TEXT               target frequency map per source value
NUM_NUM         NUMERIC / FLOAT      NUMERIC / FLOAT    least-squares polynomial
CAT_NUM_NUM     NUMERIC / FLOAT      NUMERIC / FLOAT    per-category-value polynomial
DATE_DATE       DATE                 DATE               min/max/mean date difference
==============  ===================  =================  ==========================

Every association carries a dimensionless fit error that is comparable within
its kind, because imputation selects the minimum-error association.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np

from .datatypes import (
    CATEGORICAL_TYPES,
    NUMERIC_TYPES,
    DataType,
    TypeReport,
    apply_types,
    infer_all,
)
from .table import Cell, DateValue, Table

__all__ = [
    "Association",
    "AssociationKind",
    "CategoricalConstraint",
    "ColumnConstraint",
    "ConstraintSet",
    "DateConstraint",
    "DateDiff",
    "EmptyConstraint",
    "InferenceConfig",
    "NumericConstraint",
    "NumericDistribution",
    "Polynomial",
    "fit_distribution",
    "fit_polynomial",
    "infer_associations",
    "infer_column_constraints",
    "infer_constraints",
]

#: A smaller degree wins when its fit error is within this of the best degree.
DEGREE_TOLERANCE = 0.01

CONSTRAINTS_FORMAT_VERSION = 1


@dataclass(frozen=True)
class InferenceConfig:
    max_degree: int = 3
    min_support: int = 3

    def to_dict(self) -> dict:
        return {"max_degree": self.max_degree, "min_support": self.min_support}


@dataclass(frozen=True)
class NumericDistribution:
    """Gaussian summary of a sample; the expected value is the mean."""

    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class Polynomial:
    """Coefficients in ascending power order: p(x) = sum(c[k] * x**k)."""

    coefficients: tuple[float, ...]

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, x: float) -> float:
        result = 0.0
        for coeff in reversed(self.coefficients):
            result = result * x + coeff
        return result

    def format(self, var: str = "x") -> str:
        parts = []
        for power, coeff in enumerate(self.coefficients):
            if power == 0:
                parts.append(f"{coeff:.6g}")
            elif power == 1:
                parts.append(f"{coeff:.6g}*{var}")
            else:
                parts.append(f"{coeff:.6g}*{var}^{power}")
        return " + ".join(parts)


@dataclass(frozen=True)
class DateDiff:
    """Signed second offsets of target minus source dates."""

    mindiff: float
    maxdiff: float
    meandiff: float


@dataclass(frozen=True)
class CategoricalConstraint:
    frequency: dict  # value -> count

    def __eq__(self, other):  # dicts with mixed key types still compare fine
        return isinstance(other, CategoricalConstraint) and self.frequency == other.frequency

    def __hash__(self):
        return hash(tuple(sorted((str(k), v) for k, v in self.frequency.items())))


@dataclass(frozen=True)
class NumericConstraint:
    min: float
    max: float
    mean: float
    dist: NumericDistribution


@dataclass(frozen=True)
class DateConstraint:
    mindate: int
    maxdate: int
    fmt: str


@dataclass(frozen=True)
class EmptyConstraint:
    pass


ColumnConstraint = Union[CategoricalConstraint, NumericConstraint, DateConstraint, EmptyConstraint]


class AssociationKind(str, Enum):
    CAT_CAT = "CAT_CAT"
    CAT_NUM = "CAT_NUM"
    CAT_TEXT = "CAT_TEXT"
    NUM_NUM = "NUM_NUM"
    CAT_NUM_NUM = "CAT_NUM_NUM"
    DATE_DATE = "DATE_DATE"


@dataclass(frozen=True)
class Association:
    """One cross-column constraint instance.

    ``src_value`` fixes the source category for the CAT_* kinds and the
    conditioning value for CAT_NUM_NUM (whose conditioning column is
    ``catcol``).  ``support`` is the number of complete rows the payload was
    fitted on.
    """

    kind: AssociationKind
    source: str
    target: str
    payload: Union[CategoricalConstraint, NumericConstraint, Polynomial, DateDiff]
    error: float
    support: int
    src_value: Cell = None
    catcol: str | None = None


@dataclass
class ConstraintSet:
    datatypes: TypeReport
    column_constraints: dict[str, ColumnConstraint]
    associations: list[Association]

    def to_dict(self) -> dict:
        return {
            "version": CONSTRAINTS_FORMAT_VERSION,
            "datatypes": self.datatypes.to_dict(),
            "column_constraints": {
                name: _constraint_to_dict(c) for name, c in self.column_constraints.items()
            },
            "associations": [_association_to_dict(a) for a in self.associations],
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> "ConstraintSet":
        version = data.get("version")
        if version != CONSTRAINTS_FORMAT_VERSION:
            raise ValueError(f"unsupported constraints format version: {version!r}")
        return cls(
            datatypes=TypeReport.from_dict(data["datatypes"]),
            column_constraints={
                name: _constraint_from_dict(c)
                for name, c in data["column_constraints"].items()
            },
            associations=[_association_from_dict(a) for a in data["associations"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "ConstraintSet":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# value / payload (de)serialization


def encode_cell(value: Cell) -> dict:
    if value is None:
        return {"type": "missing"}
    if type(value) is int:
        return {"type": "int", "value": value}
    if type(value) is float:
        return {"type": "float", "value": value}
    if isinstance(value, DateValue):
        return {"type": "date", "epoch": value.epoch, "format": value.fmt}
    return {"type": "str", "value": str(value)}


def decode_cell(data: dict) -> Cell:
    kind = data["type"]
    if kind == "missing":
        return None
    if kind == "int":
        return int(data["value"])
    if kind == "float":
        return float(data["value"])
    if kind == "date":
        return DateValue(epoch=data["epoch"], fmt=data["format"])
    if kind == "str":
        return data["value"]
    raise ValueError(f"unknown cell encoding: {kind!r}")


def _dist_to_dict(dist: NumericDistribution) -> dict:
    return {"mean": dist.mean, "std": dist.std, "n": dist.n}


def _dist_from_dict(data: dict) -> NumericDistribution:
    return NumericDistribution(mean=data["mean"], std=data["std"], n=data["n"])


def _constraint_to_dict(constraint: ColumnConstraint) -> dict:
    if isinstance(constraint, CategoricalConstraint):
        return {
            "kind": "categorical",
            "frequency": [[encode_cell(v), n] for v, n in constraint.frequency.items()],
        }
    if isinstance(constraint, NumericConstraint):
        return {
            "kind": "numeric",
            "min": constraint.min,
            "max": constraint.max,
            "mean": constraint.mean,
            "dist": _dist_to_dict(constraint.dist),
        }
    if isinstance(constraint, DateConstraint):
        return {
            "kind": "date",
            "mindate": constraint.mindate,
            "maxdate": constraint.maxdate,
            "format": constraint.fmt,
        }
    return {"kind": "empty"}


def _constraint_from_dict(data: dict) -> ColumnConstraint:
    kind = data["kind"]
    if kind == "categorical":
        return CategoricalConstraint({decode_cell(v): n for v, n in data["frequency"]})
    if kind == "numeric":
        return NumericConstraint(
            min=data["min"], max=data["max"], mean=data["mean"], dist=_dist_from_dict(data["dist"])
        )
    if kind == "date":
        return DateConstraint(mindate=data["mindate"], maxdate=data["maxdate"], fmt=data["format"])
    if kind == "empty":
        return EmptyConstraint()
    raise ValueError(f"unknown constraint kind: {kind!r}")


def _payload_to_dict(payload) -> dict:
    if isinstance(payload, CategoricalConstraint):
        return _constraint_to_dict(payload)
    if isinstance(payload, NumericConstraint):
        return _constraint_to_dict(payload)
    if isinstance(payload, Polynomial):
        return {"kind": "polynomial", "coefficients": list(payload.coefficients)}
    if isinstance(payload, DateDiff):
        return {
            "kind": "date_diff",
            "mindiff": payload.mindiff,
            "maxdiff": payload.maxdiff,
            "meandiff": payload.meandiff,
        }
    raise TypeError(f"unsupported payload: {payload!r}")


def _payload_from_dict(data: dict):
    kind = data["kind"]
    if kind in ("categorical", "numeric"):
        return _constraint_from_dict(data)
    if kind == "polynomial":
        return Polynomial(tuple(float(c) for c in data["coefficients"]))
    if kind == "date_diff":
        return DateDiff(mindiff=data["mindiff"], maxdiff=data["maxdiff"], meandiff=data["meandiff"])
    raise ValueError(f"unknown payload kind: {kind!r}")


def _association_to_dict(assoc: Association) -> dict:
    return {
        "kind": assoc.kind.value,
        "source": assoc.source,
        "target": assoc.target,
        "src_value": encode_cell(assoc.src_value),
        "catcol": assoc.catcol,
        "payload": _payload_to_dict(assoc.payload),
        "error": assoc.error,
        "support": assoc.support,
    }


def _association_from_dict(data: dict) -> Association:
    return Association(
        kind=AssociationKind(data["kind"]),
        source=data["source"],
        target=data["target"],
        src_value=decode_cell(data["src_value"]),
        catcol=data.get("catcol"),
        payload=_payload_from_dict(data["payload"]),
        error=data["error"],
        support=data["support"],
    )


# ---------------------------------------------------------------------------
# fitting primitives


def _population_std(values: Sequence[float]) -> float:
    return float(np.std(np.asarray(values, dtype=float)))


def fit_polynomial(
    xs: Sequence[float], ys: Sequence[float], max_degree: int = 3
) -> tuple[Polynomial, float]:
    """Least-squares polynomial fit with parsimonious degree selection.

    Candidate degrees run from 1 to ``max_degree`` (capped at ``len - 1``).
    The reported error is the residual RMSE divided by the population standard
    deviation of ``ys``, so it is dimensionless and comparable across column
    pairs; the smallest degree whose error is within ``DEGREE_TOLERANCE`` of
    the best candidate wins.  A constant target short-circuits to a degree-0
    polynomial with zero error.

    Raises ``ValueError`` for fewer than two points, constant ``xs``, or a
    non-positive ``max_degree``.
    """
    x_arr = np.asarray(xs, dtype=float)
    y_arr = np.asarray(ys, dtype=float)
    if x_arr.ndim != 1 or x_arr.shape != y_arr.shape:
        raise ValueError("xs and ys must be 1-d sequences of equal length")
    if x_arr.size < 2:
        raise ValueError("need at least 2 points to fit a polynomial")
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    if np.all(x_arr == x_arr[0]):
        raise ValueError("cannot fit a polynomial when xs are all identical")

    y_std = float(np.std(y_arr))
    if y_std == 0.0:
        return Polynomial((float(y_arr[0]),)), 0.0

    candidates: list[tuple[int, float, tuple[float, ...]]] = []
    top_degree = min(max_degree, x_arr.size - 1)
    for degree in range(1, top_degree + 1):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            coeffs = np.polynomial.polynomial.polyfit(x_arr, y_arr, degree)
        residuals = y_arr - np.polynomial.polynomial.polyval(x_arr, coeffs)
        error = float(np.sqrt(np.mean(residuals**2)) / y_std)
        candidates.append((degree, error, tuple(float(c) for c in coeffs)))

    best_error = min(error for _, error, _ in candidates)
    for _, error, coeffs in candidates:
        if error <= best_error + DEGREE_TOLERANCE:
            return Polynomial(coeffs), error
    raise AssertionError("unreachable: best candidate always satisfies the tolerance")


def fit_distribution(
    values: Sequence[float], reference_std: float = 0.0
) -> tuple[NumericDistribution, float]:
    """Gaussian summary of a subgroup plus a concentration error.

    The error is ``std(values) / reference_std`` where ``reference_std`` is
    the standard deviation of the whole target column: a subgroup that pins
    the target down tightly scores near zero, a subgroup no narrower than the
    column scores 1.  A zero reference (or zero subgroup spread) gives 0.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("need at least one value")
    mean = float(np.mean(arr))
    std = float(np.std(arr))
    error = std / reference_std if reference_std > 0 else 0.0
    return NumericDistribution(mean=mean, std=std, n=int(arr.size)), error


# ---------------------------------------------------------------------------
# column constraints


def infer_column_constraints(
    table: Table, report: TypeReport
) -> dict[str, ColumnConstraint]:
    """Profile every column according to its datatype.

    Categorical and text columns get a frequency map, numeric columns get
    min/max/mean plus a distribution summary, date columns their observed
    range and dominant format.  Statistics cover non-missing cells only.
    """
    constraints: dict[str, ColumnConstraint] = {}
    for col in table.columns:
        datatype = report.datatype(col.name)
        present = [c for c in col.cells if c is not None]
        if datatype is DataType.EMPTY:
            constraints[col.name] = EmptyConstraint()
        elif datatype in NUMERIC_TYPES:
            arr = np.asarray(present, dtype=float)
            dist = NumericDistribution(
                mean=float(np.mean(arr)), std=float(np.std(arr)), n=len(present)
            )
            constraints[col.name] = NumericConstraint(
                min=float(np.min(arr)), max=float(np.max(arr)), mean=dist.mean, dist=dist
            )
        elif datatype is DataType.DATE:
            epochs = [c.epoch for c in present]
            fmt = Counter(c.fmt for c in present).most_common(1)[0][0]
            constraints[col.name] = DateConstraint(
                mindate=min(epochs), maxdate=max(epochs), fmt=fmt
            )
        else:  # TEXT, CAT_TEXT, CAT_NUM: frequency profile
            constraints[col.name] = CategoricalConstraint(dict(Counter(present)))
    return constraints


# ---------------------------------------------------------------------------
# associations


def _complete_pairs(source_cells: list[Cell], target_cells: list[Cell]) -> list[tuple[Cell, Cell]]:
    return [
        (s, t) for s, t in zip(source_cells, target_cells) if s is not None and t is not None
    ]


def _sort_key(value: Cell):
    # Stable ordering for mixed value domains; within one column all values
    # share a type, so this reduces to numeric or lexicographic order.
    if isinstance(value, DateValue):
        return (2, value.epoch, value.fmt)
    if isinstance(value, str):
        return (1, value)
    return (0, value)


def _grouped(pairs: list[tuple[Cell, Cell]]) -> list[tuple[Cell, list[Cell]]]:
    groups: dict[Cell, list[Cell]] = {}
    for source_value, target_value in pairs:
        groups.setdefault(source_value, []).append(target_value)
    return sorted(groups.items(), key=lambda item: _sort_key(item[0]))


def _modal_share(frequency: Mapping) -> float:
    total = sum(frequency.values())
    return max(frequency.values()) / total if total else 0.0


def infer_associations(
    table: Table, report: TypeReport, config: InferenceConfig | None = None
) -> list[Association]:
    """Mine every association family over all ordered column pairs.

    Rows with a missing source or target cell never contribute to a fit, and
    associations supported by fewer than ``config.min_support`` complete rows
    are dropped.  Output order is deterministic: source column index, target
    column index, conditioning column index, then source value.
    """
    config = config or InferenceConfig()
    associations: list[Association] = []
    columns = table.columns
    categorical_names = [
        col.name for col in columns if report.datatype(col.name) in CATEGORICAL_TYPES
    ]

    for source in columns:
        source_type = report.datatype(source.name)
        for target in columns:
            if target.name == source.name:
                continue
            target_type = report.datatype(target.name)
            pairs = _complete_pairs(source.cells, target.cells)

            if source_type in CATEGORICAL_TYPES:
                if target_type in CATEGORICAL_TYPES:
                    _add_frequency_associations(
                        associations, AssociationKind.CAT_CAT, source.name, target.name,
                        pairs, config,
                    )
                elif target_type in NUMERIC_TYPES:
                    target_std = _population_std(
                        [c for c in target.cells if c is not None]
                    )
                    for value, group in _grouped(pairs):
                        if len(group) < config.min_support:
                            continue
                        arr = [float(v) for v in group]
                        dist, error = fit_distribution(arr, target_std)
                        payload = NumericConstraint(
                            min=min(arr), max=max(arr), mean=dist.mean, dist=dist
                        )
                        associations.append(Association(
                            kind=AssociationKind.CAT_NUM,
                            source=source.name,
                            target=target.name,
                            src_value=value,
                            payload=payload,
                            error=error,
                            support=len(group),
                        ))
                elif target_type is DataType.TEXT:
                    _add_frequency_associations(
                        associations, AssociationKind.CAT_TEXT, source.name, target.name,
                        pairs, config,
                    )

            elif source_type in NUMERIC_TYPES and target_type in NUMERIC_TYPES:
                _add_polynomial_association(
                    associations, source.name, target.name, pairs, config,
                )
                for cat_name in categorical_names:
                    cat_cells = table.column(cat_name).cells
                    _add_grouped_polynomials(
                        associations, source, target, cat_name, cat_cells, config,
                    )

            elif source_type is DataType.DATE and target_type is DataType.DATE:
                _add_date_association(associations, source.name, target, pairs, config)

    return associations


def _add_frequency_associations(
    associations: list[Association],
    kind: AssociationKind,
    source_name: str,
    target_name: str,
    pairs: list[tuple[Cell, Cell]],
    config: InferenceConfig,
) -> None:
    for value, group in _grouped(pairs):
        if len(group) < config.min_support:
            continue
        frequency = dict(Counter(group))
        associations.append(Association(
            kind=kind,
            source=source_name,
            target=target_name,
            src_value=value,
            payload=CategoricalConstraint(frequency),
            error=1.0 - _modal_share(frequency),
            support=len(group),
        ))


def _add_polynomial_association(
    associations: list[Association],
    source_name: str,
    target_name: str,
    pairs: list[tuple[Cell, Cell]],
    config: InferenceConfig,
) -> None:
    if len(pairs) < max(2, config.min_support):
        return
    xs = [float(s) for s, _ in pairs]
    ys = [float(t) for _, t in pairs]
    if min(xs) == max(xs):
        return
    poly, error = fit_polynomial(xs, ys, config.max_degree)
    associations.append(Association(
        kind=AssociationKind.NUM_NUM,
        source=source_name,
        target=target_name,
        payload=poly,
        error=error,
        support=len(pairs),
    ))


def _add_grouped_polynomials(
    associations: list[Association],
    source,
    target,
    cat_name: str,
    cat_cells: list[Cell],
    config: InferenceConfig,
) -> None:
    groups: dict[Cell, tuple[list[float], list[float]]] = {}
    for cat_value, s, t in zip(cat_cells, source.cells, target.cells):
        if cat_value is None or s is None or t is None:
            continue
        xs, ys = groups.setdefault(cat_value, ([], []))
        xs.append(float(s))
        ys.append(float(t))
    for cat_value in sorted(groups, key=_sort_key):
        xs, ys = groups[cat_value]
        if len(xs) < max(2, config.min_support):
            continue
        if min(xs) == max(xs):
            continue
        poly, error = fit_polynomial(xs, ys, config.max_degree)
        associations.append(Association(
            kind=AssociationKind.CAT_NUM_NUM,
            source=source.name,
            target=target.name,
            src_value=cat_value,
            catcol=cat_name,
            payload=poly,
            error=error,
            support=len(xs),
        ))


def _add_date_association(
    associations: list[Association],
    source_name: str,
    target,
    pairs: list[tuple[Cell, Cell]],
    config: InferenceConfig,
) -> None:
    if len(pairs) < config.min_support:
        return
    diffs = [float(t.epoch - s.epoch) for s, t in pairs]
    target_std = _population_std([c.epoch for c in target.cells if c is not None])
    error = _population_std(diffs) / target_std if target_std > 0 else 0.0
    associations.append(Association(
        kind=AssociationKind.DATE_DATE,
        source=source_name,
        target=target.name,
        payload=DateDiff(
            mindiff=min(diffs), maxdiff=max(diffs), meandiff=float(np.mean(diffs))
        ),
        error=error,
        support=len(pairs),
    ))


def infer_constraints(table: Table, config: InferenceConfig | None = None) -> ConstraintSet:
    """Full pipeline: classify columns, profile them, mine associations."""
    config = config or InferenceConfig()
    report = infer_all(table)
    typed = apply_types(table, report)
    return ConstraintSet(
        datatypes=report,
        column_constraints=infer_column_constraints(typed, report),
        associations=infer_associations(typed, report, config),
    )
