"""Upper-triangular pair tables, margins and move application.

Cells are indexed by unordered category pairs ``(j, k)`` with ``1 <= j < k <= n``
and stored densely in the canonical row-major order
``(1,2), (1,3), ..., (1,n), (2,3), ..., (n-1,n)``, which is the order of
``numpy.triu_indices(n, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping

import numpy as np

from .errors import NegativeCell

__all__ = [
    "PairIndex",
    "PairValues",
    "PairTable",
    "RealPairTable",
    "MarginVector",
    "n_cells",
    "pair_offset",
    "pair_at",
    "pair_list",
    "triu_arrays",
    "margins",
    "total",
    "apply_move",
]


def n_cells(n: int) -> int:
    return n * (n - 1) // 2


def pair_offset(n: int, j: int, k: int) -> int:
    """Flat offset of the 1-based pair ``(j, k)``, ``j < k``."""
    if not 1 <= j < k <= n:
        raise IndexError(f"pair ({j}, {k}) invalid for n={n}; need 1 <= j < k <= n")
    return (j - 1) * (2 * n - j) // 2 + (k - j - 1)


@lru_cache(maxsize=None)
def triu_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based ``(rows, cols)`` of every cell in canonical order (read-only)."""
    rows, cols = np.triu_indices(n, 1)
    rows = rows.astype(np.int64)
    cols = cols.astype(np.int64)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@dataclass(frozen=True, order=True)
class PairIndex:
    j: int
    k: int

    def __post_init__(self):
        if not (isinstance(self.j, (int, np.integer)) and isinstance(self.k, (int, np.integer))):
            raise TypeError("pair indices must be integers")
        if not 1 <= self.j < self.k:
            raise ValueError(f"pair ({self.j}, {self.k}) must satisfy 1 <= j < k")

    def __iter__(self) -> Iterator[int]:
        yield self.j
        yield self.k

    def __str__(self) -> str:
        return f"{{{self.j},{self.k}}}"


@lru_cache(maxsize=None)
def pair_list(n: int) -> tuple[PairIndex, ...]:
    rows, cols = triu_arrays(n)
    return tuple(PairIndex(int(a) + 1, int(b) + 1) for a, b in zip(rows, cols))


def pair_at(n: int, offset: int) -> PairIndex:
    return pair_list(n)[offset]


def _key(idx) -> tuple[int, int]:
    j, k = idx
    return int(j), int(k)


class PairValues:
    """Real-valued (possibly signed) table over the pairs of ``n`` categories.

    Instances are immutable: the backing array is flagged read-only.
    """

    _dtype = np.float64
    _min_n = 2

    __slots__ = ("n", "values")

    def __init__(self, n: int, values):
        n = int(n)
        if n < self._min_n:
            raise ValueError(f"{type(self).__name__} needs n >= {self._min_n}, got {n}")
        arr = np.array(values, dtype=self._dtype, copy=True).reshape(-1)
        if arr.shape[0] != n_cells(n):
            raise ValueError(f"expected {n_cells(n)} cells for n={n}, got {arr.shape[0]}")
        self._check(arr)
        arr.setflags(write=False)
        self.n = n
        self.values = arr

    def _check(self, arr: np.ndarray) -> None:
        if not np.all(np.isfinite(arr)):
            raise ValueError("cells must be finite")

    @classmethod
    def zeros(cls, n: int):
        return cls(n, np.zeros(n_cells(n), dtype=cls._dtype))

    @classmethod
    def from_cells(cls, n: int, cells: Mapping) -> "PairValues":
        """Build from a mapping ``{(j, k): value}``; unlisted cells are zero."""
        arr = np.zeros(n_cells(n), dtype=cls._dtype)
        for idx, v in cells.items():
            j, k = _key(idx)
            arr[pair_offset(n, j, k)] = v
        return cls(n, arr)

    @classmethod
    def from_square(cls, square) -> "PairValues":
        """Take the strict upper triangle of an ``n x n`` array."""
        sq = np.asarray(square)
        if sq.ndim != 2 or sq.shape[0] != sq.shape[1]:
            raise ValueError("square input must be an n x n array")
        n = sq.shape[0]
        rows, cols = triu_arrays(n)
        return cls(n, sq[rows, cols])

    def to_square(self) -> np.ndarray:
        """Symmetric ``n x n`` array with a zero diagonal."""
        rows, cols = triu_arrays(self.n)
        sq = np.zeros((self.n, self.n), dtype=self._dtype)
        sq[rows, cols] = self.values
        sq[cols, rows] = self.values
        return sq

    def __getitem__(self, idx):
        j, k = _key(idx)
        return self.values[pair_offset(self.n, j, k)].item()

    def items(self) -> Iterator[tuple[PairIndex, float]]:
        for p, v in zip(pair_list(self.n), self.values.tolist()):
            yield p, v

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {(p.j, p.k): v for p, v in self.items()}

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.values, other.values))

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.n, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, values={self.values.tolist()!r})"


class RealPairTable(PairValues):
    """Nonnegative real table, e.g. a fitted expected table."""

    def _check(self, arr: np.ndarray) -> None:
        super()._check(arr)
        if np.any(arr < 0):
            raise ValueError("cells must be nonnegative")

    def scaled(self, c: float) -> "RealPairTable":
        return RealPairTable(self.n, self.values * c)


class PairTable(PairValues):
    """Nonnegative integer count table over the pairs of ``n >= 3`` categories."""

    _dtype = np.int64
    _min_n = 3

    def __init__(self, n: int, values):
        raw = np.asarray(values)
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise ValueError("counts must be integral")
        elif raw.dtype.kind not in "iub" and raw.size:
            raise TypeError(f"counts must be integers, got dtype {raw.dtype}")
        super().__init__(n, raw)

    def _check(self, arr: np.ndarray) -> None:
        if np.any(arr < 0):
            raise ValueError("counts must be nonnegative")

    def __add__(self, other: "PairTable") -> "PairTable":
        if not isinstance(other, PairTable) or other.n != self.n:
            return NotImplemented
        return PairTable(self.n, self.values + other.values)

    def as_real(self) -> RealPairTable:
        return RealPairTable(self.n, self.values.astype(np.float64))


@dataclass(frozen=True, eq=False)
class MarginVector:
    """Per-category totals ``u_k``; ``u[k-1]`` is the total of category ``k``."""

    u: np.ndarray

    def __post_init__(self):
        arr = np.array(self.u, dtype=np.int64, copy=True).reshape(-1)
        if np.any(arr < 0):
            raise ValueError("margins must be nonnegative")
        if int(arr.sum()) % 2:
            raise ValueError("margins must have an even sum")
        arr.setflags(write=False)
        object.__setattr__(self, "u", arr)

    @property
    def n(self) -> int:
        return int(self.u.shape[0])

    def of(self, k: int) -> int:
        """Margin of the 1-based category ``k``."""
        return int(self.u[k - 1])

    def __iter__(self):
        return iter(self.u.tolist())

    def __len__(self) -> int:
        return self.n

    def __add__(self, other: "MarginVector") -> "MarginVector":
        return MarginVector(self.u + other.u)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MarginVector):
            return NotImplemented
        return bool(np.array_equal(self.u, other.u))

    def __hash__(self) -> int:
        return hash(self.u.tobytes())

    def __repr__(self) -> str:
        return f"MarginVector({self.u.tolist()})"


def margin_array(n: int, values: np.ndarray) -> np.ndarray:
    """Margins of a flat cell vector (any numeric dtype)."""
    rows, cols = triu_arrays(n)
    out = np.zeros(n, dtype=values.dtype)
    np.add.at(out, rows, values)
    np.add.at(out, cols, values)
    return out


def margins(t: PairTable) -> MarginVector:
    return MarginVector(margin_array(t.n, t.values))


def total(t: PairValues):
    return t.values.sum().item()


def apply_move(t: PairTable, move) -> PairTable:
    """Return ``t + move``; raises :class:`NegativeCell` if any cell would go negative."""
    delta = move.vector(t.n)
    new = t.values + delta
    if np.any(new < 0):
        raise NegativeCell(f"{move} is not applicable: a cell would become negative")
    return PairTable(t.n, new)
