"""Constraint-based, explainable missing-value imputation for tabular data.

The pipeline: classify column datatypes, mine single-column constraints and
cross-column associations from the non-missing data, then fill missing cells
through a prioritized cascade of association-driven imputers, emitting an
explanation record for every imputed value.  An evaluation harness masks
cells, imputes, and scores against the hidden truth.
"""

from .constraints import (
    Association,
    AssociationKind,
    CategoricalConstraint,
    ColumnConstraint,
    ConstraintSet,
    DateConstraint,
    DateDiff,
    EmptyConstraint,
    InferenceConfig,
    NumericConstraint,
    NumericDistribution,
    Polynomial,
    fit_distribution,
    fit_polynomial,
    infer_associations,
    infer_column_constraints,
    infer_constraints,
)
from .datatypes import (
    DataType,
    TypeReport,
    apply_types,
    infer_all,
    infer_datatype,
)
from .engine import (
    ImputationMethod,
    ImputationOrder,
    ImputationRecord,
    ImputationResult,
    Predictor,
    SchemaMismatchError,
    build_imputation_order,
    impute_table,
    render_explanation,
)
from .evaluate import (
    EvalReport,
    MissingMask,
    baseline_impute,
    encode_categorical_text,
    f1_categorical,
    inject_missing,
    make_polynomial_benchmark,
    nrmse,
    rmse,
    run_experiment,
)
from .table import (
    Cell,
    Column,
    DateValue,
    ParseOptions,
    Table,
    TableError,
    load_csv,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "Association",
    "AssociationKind",
    "CategoricalConstraint",
    "Cell",
    "Column",
    "ColumnConstraint",
    "ConstraintSet",
    "DataType",
    "DateConstraint",
    "DateDiff",
    "DateValue",
    "EmptyConstraint",
    "EvalReport",
    "ImputationMethod",
    "ImputationOrder",
    "ImputationRecord",
    "ImputationResult",
    "InferenceConfig",
    "MissingMask",
    "NumericConstraint",
    "NumericDistribution",
    "ParseOptions",
    "Polynomial",
    "Predictor",
    "SchemaMismatchError",
    "Table",
    "TableError",
    "TypeReport",
    "apply_types",
    "baseline_impute",
    "build_imputation_order",
    "encode_categorical_text",
    "f1_categorical",
    "fit_distribution",
    "fit_polynomial",
    "impute_table",
    "infer_all",
    "infer_associations",
    "infer_column_constraints",
    "infer_constraints",
    "infer_datatype",
    "inject_missing",
    "load_csv",
    "make_polynomial_benchmark",
    "nrmse",
    "render_explanation",
    "rmse",
    "run_experiment",
    "write_csv",
]
