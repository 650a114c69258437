"""Reading and writing pair tables.

Two text layouts are supported.

Long CSV::

    chr_a,chr_b,count
    1,2,44
    ...

with 1-based labels and ``chr_a < chr_b``; cells not listed are zero.

Matrix layout, whitespace separated, upper triangle only::

    Chr 2  3  4  Sum
    1   44 38 42 124
    2      43 37 ...

The header row is optional unless a ``Sum`` column is present. When it is,
each row's sum entry must equal that category's margin.
"""

from __future__ import annotations

import csv
import io
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ParseError
from .table import PairTable, RealPairTable, margins, n_cells, pair_list, pair_offset

__all__ = [
    "parse_table",
    "parse_csv_text",
    "parse_expected_text",
    "parse_matrix",
    "parse_matrix_text",
    "serialize_csv",
    "serialize_matrix",
    "load_example",
]

HEADER = ("chr_a", "chr_b", "count")
EXPECTED_HEADER = ("chr_a", "chr_b", "expected")


def _int(tok: str, what: str, line: int) -> int:
    try:
        value = int(tok.strip())
    except ValueError:
        raise ParseError(f"{what} {tok.strip()!r} is not an integer", line) from None
    return value


def _real(tok: str, what: str, line: int) -> float:
    try:
        value = float(tok.strip())
    except ValueError:
        raise ParseError(f"{what} {tok.strip()!r} is not a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} {tok.strip()!r} is not finite", line)
    return value


def parse_csv_text(text: str, n: int | None = None) -> PairTable:
    n, cells = _parse_long(text, n, HEADER, _int)
    values = np.zeros(n_cells(n), dtype=np.int64)
    for (a, b), c in cells.items():
        values[pair_offset(n, a, b)] = c
    return PairTable(n, values)


def parse_expected_text(text: str, n: int | None = None) -> RealPairTable:
    """Long CSV ``chr_a,chr_b,expected`` of real expected counts; unlisted cells are zero."""
    n, cells = _parse_long(text, n, EXPECTED_HEADER, _real)
    values = np.zeros(n_cells(n), dtype=np.float64)
    for (a, b), c in cells.items():
        values[pair_offset(n, a, b)] = c
    return RealPairTable(n, values)


def _parse_long(text: str, n: int | None, header: tuple[str, ...], conv) -> tuple[int, dict]:
    rows = list(csv.reader(io.StringIO(text)))
    cells: dict[tuple[int, int], float] = {}
    lines: dict[tuple[int, int], int] = {}
    header_seen = False
    max_label = 0
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            if tuple(c.strip().lower() for c in row) == header:
                continue
            raise ParseError(f"expected header {','.join(header)}", lineno)
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno)
        a = _int(row[0], "label", lineno)
        b = _int(row[1], "label", lineno)
        c = conv(row[2], header[2], lineno)
        if a == b:
            raise ParseError(f"diagonal cell ({a},{b}) is not allowed", lineno)
        if a > b:
            raise ParseError(f"cell ({a},{b}) must have chr_a < chr_b", lineno)
        if a < 1:
            raise ParseError("labels are 1-based", lineno)
        if c < 0:
            raise ParseError(f"negative {header[2]} {c}", lineno)
        if (a, b) in cells:
            raise ParseError(f"duplicate cell ({a},{b}), first given on line {lines[(a, b)]}", lineno)
        if n is not None and b > n:
            raise ParseError(f"label {b} exceeds n={n}", lineno)
        cells[(a, b)] = c
        lines[(a, b)] = lineno
        max_label = max(max_label, b)
    if not header_seen:
        raise ParseError("empty input", 1)
    n = n if n is not None else max_label
    if n < 3:
        raise ParseError(f"need at least 3 categories, got n={n}")
    return n, cells


def parse_matrix_text(text: str, n: int | None = None) -> PairTable:
    lines = [
        (i, line.split())
        for i, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise ParseError("empty input", 1)
    has_sum = False
    first_line, first = lines[0]
    try:
        int(first[0])
    except ValueError:
        # header: a corner label, then column labels 2..n, maybe "Sum"
        cols = first[1:]
        if cols and cols[-1].lower() == "sum":
            has_sum = True
            cols = cols[:-1]
        labels = [_int(c, "column label", first_line) for c in cols]
        if labels != list(range(2, len(labels) + 2)):
            raise ParseError("column labels must run 2, 3, ..., n", first_line)
        if n is not None and n != len(labels) + 1:
            raise ParseError(f"header implies n={len(labels) + 1}, but n={n} was given", first_line)
        n = len(labels) + 1
        lines = lines[1:]
    if n is None:
        if not lines:
            raise ParseError("no data rows", first_line)
        n = len(lines[0][1])  # row 1 holds its label and n - 1 values
    if n < 3:
        raise ParseError(f"need at least 3 categories, got n={n}")

    values = np.zeros(n_cells(n), dtype=np.int64)
    sums: dict[int, int] = {}
    seen: set[int] = set()
    for lineno, toks in lines:
        i = _int(toks[0], "row label", lineno)
        if not 1 <= i <= n:
            raise ParseError(f"row label {i} outside 1..{n}", lineno)
        if i in seen:
            raise ParseError(f"duplicate row {i}", lineno)
        seen.add(i)
        body = toks[1:]
        want = n - i + (1 if has_sum else 0)
        if len(body) != want:
            raise ParseError(f"row {i} needs {want} entries, got {len(body)}", lineno)
        if has_sum:
            sums[i] = _int(body[-1], "sum", lineno)
            body = body[:-1]
        for off, tok in enumerate(body):
            c = _int(tok, "count", lineno)
            if c < 0:
                raise ParseError(f"negative count {c}", lineno)
            values[pair_offset(n, i, i + 1 + off)] = c
    t = PairTable(n, values)
    if sums:
        u = margins(t)
        for i, s in sums.items():
            if u.of(i) != s:
                line = next(ln for ln, toks in lines if toks[0] == str(i))
                raise ParseError(f"row {i} sum {s} does not match margin {u.of(i)}", line)
    return t


def parse_table(path, n: int | None = None, matrix: bool = False) -> PairTable:
    """Parse a file in long CSV (default) or matrix layout."""
    text = Path(path).read_text()
    return parse_matrix_text(text, n) if matrix else parse_csv_text(text, n)


def parse_matrix(path, n: int | None = None) -> PairTable:
    return parse_table(path, n, matrix=True)


def serialize_csv(t: PairTable, include_zeros: bool = True) -> str:
    out = [",".join(HEADER)]
    for idx, c in zip(pair_list(t.n), t.values):
        if c or include_zeros:
            out.append(f"{idx.j},{idx.k},{int(c)}")
    return "\n".join(out) + "\n"


def serialize_matrix(t: PairTable, with_sum: bool = True) -> str:
    n = t.n
    u = margins(t)
    head = ["Chr"] + [str(k) for k in range(2, n + 1)] + (["Sum"] if with_sum else [])
    out = [" ".join(head)]
    for i in range(1, n + 1):
        row = [str(i)] + [str(int(t[(i, k)])) for k in range(i + 1, n + 1)]
        if with_sum:
            row.append(str(u.of(i)))
        out.append(" ".join(row))
    return "\n".join(out) + "\n"


def load_example() -> PairTable:
    """The bundled 22-category lymphocyte exchange table."""
    text = resources.files("pairfiber.data").joinpath("lymphocyte_etca.csv").read_text()
    return parse_csv_text(text)
