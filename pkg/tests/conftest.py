from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from pairfiber import PairTable, RealPairTable, load_example
from pairfiber.table import n_cells, pair_offset

DATA = Path(__file__).parent / "data"


def _read_long(name: str, column: str, n: int = 22) -> np.ndarray:
    values = np.zeros(n_cells(n))
    with open(DATA / name) as fh:
        for row in csv.DictReader(fh):
            values[pair_offset(n, int(row["chr_a"]), int(row["chr_b"]))] = float(row[column])
    return values


@pytest.fixture(scope="session")
def table1() -> PairTable:
    return load_example()


@pytest.fixture(scope="session")
def table1_sums() -> np.ndarray:
    sums = json.loads((DATA / "table1_sums.json").read_text())
    return np.array([sums[str(k)] for k in range(1, 23)])


@pytest.fixture(scope="session")
def table2() -> RealPairTable:
    return RealPairTable(22, _read_long("table2_mle.csv", "expected"))


@pytest.fixture(scope="session")
def table3() -> np.ndarray:
    return _read_long("table3_deviation.csv", "deviation")


def tables(min_n: int = 3, max_n: int = 7, max_count: int = 6):
    """Hypothesis strategy for small PairTables."""

    @st.composite
    def build(draw):
        n = draw(st.integers(min_n, max_n))
        cells = draw(st.lists(st.integers(0, max_count), min_size=n_cells(n), max_size=n_cells(n)))
        return PairTable(n, np.array(cells, dtype=np.int64))

    return build()


def round_sig(x, digits: int = 2):
    """Round to ``digits`` significant figures, as printed in the source tables."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    nz = x != 0
    mag = np.floor(np.log10(np.abs(x[nz])))
    scale = 10.0 ** (digits - 1 - mag)
    out[nz] = np.round(x[nz] * scale) / scale
    return out


# --- acceptance reporting --------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
