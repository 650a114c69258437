"""Model identities, design matrices and sufficient statistics.

Two log-linear models over pair tables are supported: the no-proximity model
``p_jk = theta_j * theta_k`` and, for a distinguished pair ``{r, s}``, the
single-pair proximity model that multiplies cell ``(r, s)`` by an extra factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .table import MarginVector, PairIndex, PairTable, margins, n_cells, pair_offset, triu_arrays

__all__ = [
    "ModelSpec",
    "SufficientStatistic",
    "design_matrix",
    "sufficient_statistic",
    "model_rank",
]


@dataclass(frozen=True)
class ModelSpec:
    """``pair=None`` is the no-proximity model; otherwise the single-pair model for ``pair``."""

    n: int
    pair: PairIndex | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("models need n >= 3 categories")
        if self.pair is not None:
            pair = self.pair if isinstance(self.pair, PairIndex) else PairIndex(*self.pair)
            if pair.k > self.n:
                raise ValueError(f"pair {pair} out of range for n={self.n}")
            object.__setattr__(self, "pair", pair)

    @classmethod
    def no_proximity(cls, n: int) -> "ModelSpec":
        return cls(n)

    @classmethod
    def single_pair(cls, n: int, r: int, s: int) -> "ModelSpec":
        return cls(n, PairIndex(r, s))

    @property
    def is_single_pair(self) -> bool:
        return self.pair is not None

    @property
    def n_params(self) -> int:
        return self.n + (1 if self.pair is not None else 0)

    def label(self) -> str:
        if self.pair is None:
            return "no-proximity"
        return f"pair:{self.pair.j},{self.pair.k}"


@dataclass(frozen=True, eq=False)
class SufficientStatistic:
    margins: MarginVector
    fixed_cell: tuple[PairIndex, int] | None = None

    def as_vector(self) -> np.ndarray:
        """Stacked vector in design-matrix row order."""
        vec = self.margins.u
        if self.fixed_cell is not None:
            vec = np.append(vec, self.fixed_cell[1])
        return vec

    def __eq__(self, other) -> bool:
        if not isinstance(other, SufficientStatistic):
            return NotImplemented
        return self.margins == other.margins and self.fixed_cell == other.fixed_cell


def design_matrix(spec: ModelSpec) -> np.ndarray:
    """0/1 matrix whose column for pair ``(j, k)`` is ``e_j + e_k`` (plus the pair-indicator row)."""
    n = spec.n
    rows, cols = triu_arrays(n)
    a = np.zeros((spec.n_params, n_cells(n)), dtype=np.int64)
    idx = np.arange(n_cells(n))
    a[rows, idx] = 1
    a[cols, idx] = 1
    if spec.pair is not None:
        a[n, pair_offset(n, spec.pair.j, spec.pair.k)] = 1
    return a


def sufficient_statistic(spec: ModelSpec, t: PairTable) -> SufficientStatistic:
    if spec.n != t.n:
        raise ValueError(f"model has n={spec.n} but table has n={t.n}")
    fixed = None
    if spec.pair is not None:
        fixed = (spec.pair, int(t[spec.pair]))
    return SufficientStatistic(margins(t), fixed)


def model_rank(spec: ModelSpec) -> int:
    """Rank of the design matrix (SVD based; entries are small integers)."""
    return int(np.linalg.matrix_rank(design_matrix(spec).astype(np.float64)))
