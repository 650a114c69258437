"""Degree-two Markov basis of the no-proximity model and its sorted normal form.

For every four categories ``i < j < k < l`` the pairs can be matched in three
ways: aligned {(i,j),(k,l)}, crossing {(i,k),(j,l)} and nested {(i,l),(j,k)}.
The basis moves trade the crossing matching for one of the other two, in
either direction.

Reduction runs toward the crossing matching. That is the sorted Groebner
basis of the second hypersimplex, whose unique standard table in each fiber
is obtained by sorting the multiset of category labels (:func:`sorted_table`).
Each unit reduction lowers the integer potential
``sum t(j,k) * (k - j) * (k - j - n - 1)`` by at least two, so reduction
terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import TooSmall
from .table import MarginVector, PairIndex, PairTable, n_cells, pair_offset, triu_arrays

__all__ = [
    "MarkovMove",
    "MarkovBasis",
    "NormalForm",
    "generate_basis",
    "normal_form",
    "sorted_table",
    "reduction_potential",
    "connectivity_check",
]


@dataclass(frozen=True)
class MarkovMove:
    """``variant`` "A" is m[i,j;k,l], "B" is m[i,l;j,k]; ``sign=-1`` negates."""

    quad: tuple[int, int, int, int]
    variant: str = "A"
    sign: int = 1

    def __post_init__(self):
        i, j, k, l = self.quad
        if not 1 <= i < j < k < l:
            raise ValueError(f"quad {self.quad} must be strictly increasing 1-based labels")
        if self.variant not in ("A", "B"):
            raise ValueError("variant must be 'A' or 'B'")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def _forward(self) -> tuple[tuple[PairIndex, PairIndex], tuple[PairIndex, PairIndex]]:
        i, j, k, l = self.quad
        minus = (PairIndex(i, k), PairIndex(j, l))
        if self.variant == "A":
            plus = (PairIndex(i, j), PairIndex(k, l))
        else:
            plus = (PairIndex(i, l), PairIndex(j, k))
        return plus, minus

    @property
    def plus(self) -> tuple[PairIndex, PairIndex]:
        """Cells that gain one count."""
        p, m = self._forward()
        return p if self.sign == 1 else m

    @property
    def minus(self) -> tuple[PairIndex, PairIndex]:
        """Cells that lose one count."""
        p, m = self._forward()
        return m if self.sign == 1 else p

    def negated(self) -> "MarkovMove":
        return MarkovMove(self.quad, self.variant, -self.sign)

    def vector(self, n: int) -> np.ndarray:
        if self.quad[3] > n:
            raise ValueError(f"move {self} does not fit n={n}")
        v = np.zeros(n_cells(n), dtype=np.int64)
        for p in self.plus:
            v[pair_offset(n, p.j, p.k)] += 1
        for p in self.minus:
            v[pair_offset(n, p.j, p.k)] -= 1
        return v

    def __str__(self) -> str:
        i, j, k, l = self.quad
        name = f"m[{i},{j};{k},{l}]" if self.variant == "A" else f"m[{i},{l};{j},{k}]"
        return name if self.sign == 1 else "-" + name


@dataclass(frozen=True, eq=False)
class MarkovBasis:
    n: int
    moves: tuple[MarkovMove, ...]
    # flat offsets used by the compiled walk
    plus1: np.ndarray = field(repr=False)
    plus2: np.ndarray = field(repr=False)
    minus1: np.ndarray = field(repr=False)
    minus2: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.moves)

    def __iter__(self):
        return iter(self.moves)

    def __getitem__(self, i: int) -> MarkovMove:
        return self.moves[i]


def generate_basis(n: int) -> MarkovBasis:
    """All ``4 * C(n, 4)`` moves, ordered by quadruple then (A, -A, B, -B)."""
    if n < 4:
        raise TooSmall(f"the degree-two Markov basis needs n >= 4, got {n}")
    moves = []
    for quad in combinations(range(1, n + 1), 4):
        for variant in ("A", "B"):
            moves.append(MarkovMove(quad, variant, 1))
            moves.append(MarkovMove(quad, variant, -1))
    cols = [[], [], [], []]
    for m in moves:
        p, q = m.plus
        a, b = m.minus
        for slot, cell in zip(cols, (p, q, a, b)):
            slot.append(pair_offset(n, cell.j, cell.k))
    arrays = [np.asarray(c, dtype=np.int64) for c in cols]
    for a in arrays:
        a.setflags(write=False)
    return MarkovBasis(n, tuple(moves), *arrays)


@lru_cache(maxsize=None)
def _quad_cells(n: int) -> np.ndarray:
    quads = np.array(list(combinations(range(n), 4)), dtype=np.int64).reshape(-1, 4)

    def off(a, b):
        return a * (2 * n - a - 1) // 2 + (b - a - 1)

    i, j, k, l = quads.T
    out = np.stack([off(i, j), off(i, k), off(i, l), off(j, k), off(j, l), off(k, l)], axis=1)
    out = np.ascontiguousarray(out, dtype=np.int64)
    out.setflags(write=False)
    return out


class NormalForm(NamedTuple):
    table: PairTable
    steps: int


def normal_form(t: PairTable, rng: np.random.Generator | None = None, unit: bool = False) -> NormalForm:
    """Reduce ``t`` to the unique sink of its fiber.

    Without ``rng`` quadruples are swept in lexicographic order and each
    reduction is applied with its full multiplicity. With ``rng`` every sweep
    visits the quadruples in a fresh random order (used to stress-test
    confluence); ``unit=True`` applies a single unit move per visit. ``steps``
    always counts unit moves.
    """
    if t.n < 4:
        return NormalForm(t, 0)
    cells = t.values.copy()
    quads = _quad_cells(t.n)
    if rng is None and not unit:
        steps = int(_kernels.reduce_to_sink(cells, quads))
    else:
        steps = 0
        order = np.arange(quads.shape[0])
        while True:
            if rng is not None:
                order = rng.permutation(quads.shape[0])
            s = int(_kernels.reduce_pass(cells, quads, order, unit))
            if s == 0:
                break
            steps += s
    return NormalForm(PairTable(t.n, cells), steps)


def sorted_table(u: MarginVector) -> PairTable:
    """The sorted table of a fiber, computed directly from its margins.

    Write label ``k`` ``u_k`` times, sort, and pair position ``i`` with
    position ``i + N`` where ``N`` is half the total.
    """
    n = u.n
    labels = np.repeat(np.arange(n), u.u)
    half = labels.shape[0] // 2
    lo, hi = labels[:half], labels[half:]
    if np.any(lo == hi):
        raise ValueError(f"fiber of {u} is empty: some margin exceeds the sum of the others")
    cells = np.zeros(n_cells(n), dtype=np.int64)
    offs = lo * (2 * n - lo - 1) // 2 + (hi - lo - 1)
    np.add.at(cells, offs, 1)
    return PairTable(n, cells)


def reduction_potential(t: PairTable) -> int:
    """Integer potential that every unit reduction lowers by at least two."""
    rows, cols = triu_arrays(t.n)
    d = cols - rows
    return int(np.sum(t.values * d * (d - t.n - 1)))


def connectivity_check(u: MarginVector, basis: MarkovBasis, cap: int = 10**6) -> bool:
    """True iff the basis moves connect every table with margins ``u``.

    Enumerates the fiber (raises FiberTooLarge beyond ``cap``) and runs a BFS.
    """
    from .enumeration import enumerate_fiber

    if basis.n != u.n:
        raise ValueError("basis and margins disagree on n")
    tables = enumerate_fiber(u, cap=cap).tables
    if len(tables) <= 1:
        return True
    mat = np.stack([t.values for t in tables])
    index = {row.tobytes(): i for i, row in enumerate(mat)}
    delta = np.stack([m.vector(u.n) for m in basis.moves])
    seen = np.zeros(len(tables), dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        cur = mat[stack.pop()]
        nbrs = cur[None, :] + delta
        for row in nbrs[(nbrs >= 0).all(axis=1)]:
            i = index[row.tobytes()]
            if not seen[i]:
                seen[i] = True
                stack.append(i)
    return bool(seen.all())
