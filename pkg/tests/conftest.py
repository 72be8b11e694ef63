from pathlib import Path

import pytest

from tabfill import Column, Table, load_csv

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris_path() -> Path:
    return DATA_DIR / "iris.csv"


@pytest.fixture(scope="session")
def iris_table(iris_path) -> Table:
    return load_csv(iris_path)


def make_table(**columns) -> Table:
    """Build a table from keyword lists, preserving keyword order."""
    return Table([Column(name, list(cells)) for name, cells in columns.items()])
