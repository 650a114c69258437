"""Exhaustive fiber enumeration for small instances and order-of-magnitude fiber estimates.

Enumeration fills the table one category at a time: category ``v`` spreads
its remaining margin over the cells ``(v, w)`` with ``w > v``. After each
category the leftover margins of the later categories must still be the
degree sequence of a loopless multigraph (even total, no entry above the sum
of the others), otherwise the branch is cut.

The estimates work on log10 values throughout; the inputs reach 10^315.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import FiberTooLarge, ZeroExpected
from .stats import chi_square_stat
from .table import MarginVector, PairIndex, PairTable, RealPairTable, margins, n_cells, pair_offset

__all__ = [
    "FiberEnumeration",
    "MagnitudeEstimate",
    "KINDS",
    "enumerate_fiber",
    "count_fiber",
    "hypergeometric_normalizer",
    "exact_p_value",
    "subtable_lower_bound",
    "subtable_counts",
    "ellipsoid_log_volume",
    "lattice_correction_magnitude",
    "log_binomial",
    "composed_lower_bound",
    "fiber_ratio_report",
]

DEFAULT_CAP = 10**6

FixedCell = tuple[PairIndex, int]


@dataclass(frozen=True, eq=False)
class FiberEnumeration:
    margins: MarginVector
    fixed_cell: FixedCell | None
    tables: tuple[PairTable, ...]
    weights: np.ndarray  # hypergeometric, normalized

    def __len__(self) -> int:
        return len(self.tables)


def _realizable(rem: np.ndarray) -> bool:
    s = int(rem.sum())
    return s % 2 == 0 and (s == 0 or 2 * int(rem.max()) <= s)


def enumerate_fiber(u: MarginVector, fixed: FixedCell | None = None, cap: int = DEFAULT_CAP) -> FiberEnumeration:
    """Every table with margins ``u`` (and the fixed cell, if given).

    Raises FiberTooLarge as soon as more than ``cap`` tables are found.
    """
    n = u.n
    if n < 3:
        raise ValueError("n must be >= 3")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    rem = u.u.astype(np.int64).copy()
    cells = np.zeros(n_cells(n), dtype=np.int64)
    skip = -1
    if fixed is not None:
        idx, value = fixed
        if value < 0:
            raise ValueError("fixed cell count must be nonnegative")
        skip = pair_offset(n, idx.j, idx.k)
        cells[skip] = value
        rem[idx.j - 1] -= value
        rem[idx.k - 1] -= value
        if rem.min() < 0:
            return FiberEnumeration(u, fixed, (), np.empty(0))

    # offsets of cells (v, w) for w > v, 0-based
    row_cells = [[pair_offset(n, v + 1, w + 1) for w in range(v + 1, n)] for v in range(n)]
    found: list[np.ndarray] = []

    def fill(v: int, w: int, left: int) -> None:
        if w == n:
            if left == 0 and _realizable(rem[v + 1 :]):
                vertex(v + 1)
            return
        off = row_cells[v][w - v - 1]
        if off == skip:
            fill(v, w + 1, left)
            return
        # the later cells of this row can absorb at most their margins
        room = int(rem[w + 1 :].sum()) if w + 1 < n else 0
        lo = max(0, left - room)
        hi = min(left, int(rem[w]))
        for x in range(lo, hi + 1):
            cells[off] = x
            rem[w] -= x
            fill(v, w + 1, left - x)
            rem[w] += x
        cells[off] = 0

    def vertex(v: int) -> None:
        if v >= n - 1:
            if v == n or rem[v] == 0:
                found.append(cells.copy())
                if len(found) > cap:
                    raise FiberTooLarge(f"fiber of {u} has more than {cap} tables")
            return
        left = int(rem[v])
        rem[v] = 0
        fill(v, v + 1, left)
        rem[v] = left

    if _realizable(rem):
        vertex(0)

    tables = tuple(PairTable(n, c) for c in found)
    if not tables:
        return FiberEnumeration(u, fixed, (), np.empty(0))
    logw = np.array([-sum(math.lgamma(int(x) + 1) for x in c) for c in found])
    w = np.exp(logw - logw.max())
    w /= w.sum()
    w.setflags(write=False)
    return FiberEnumeration(u, fixed, tables, w)


def _fiber_series(u: MarginVector, coeff, dtype) -> np.ndarray:
    # coefficient array of prod over cells of sum_m coeff(m) (x_j x_k)^m, truncated at u
    n = u.n
    shape = tuple(int(x) + 1 for x in u.u)
    P = np.zeros(shape, dtype=dtype)
    P[(0,) * n] = 1
    for j in range(n):
        for k in range(j + 1, n):
            top = min(shape[j], shape[k]) - 1
            out = P.copy()
            for m in range(1, top + 1):
                dst = [slice(None)] * n
                src = [slice(None)] * n
                dst[j] = dst[k] = slice(m, None)
                src[j] = src[k] = slice(None, -m)
                out[tuple(dst)] += coeff(m) * P[tuple(src)]
            P = out
    return P


def count_fiber(u: MarginVector) -> int:
    """Fiber size as the coefficient of ``prod x^u`` in ``prod_{j<k} 1/(1 - x_j x_k)``.

    Independent of :func:`enumerate_fiber`; cost grows with ``prod (u_k + 1)``.
    """
    P = _fiber_series(u, lambda m: 1, object)
    return int(P[tuple(int(x) for x in u.u)])


def hypergeometric_normalizer(u: MarginVector) -> float:
    """``sum over the fiber of 1 / prod t!``: the coefficient of ``prod x^u`` in ``exp(sum x_j x_k)``."""
    P = _fiber_series(u, lambda m: 1.0 / math.factorial(m), np.float64)
    return float(P[tuple(int(x) for x in u.u)])


def exact_p_value(u: MarginVector, observed: PairTable, fhat: RealPairTable, cap: int = DEFAULT_CAP) -> float:
    """Hypergeometric probability that a fiber table has chi-square at least the observed one."""
    if margins(observed) != u:
        raise ValueError("observed table does not have margins u")
    fib = enumerate_fiber(u, cap=cap)
    obs = chi_square_stat(observed, fhat)
    stats = np.array([chi_square_stat(t, fhat) for t in fib.tables])
    return float(min(1.0, fib.weights[stats >= obs].sum()))


# --- magnitude estimates -------------------------------------------------------

KINDS = (
    "SubtableLowerBound",
    "EllipsoidVolume",
    "LatticeCorrection",
    "BinomialCount",
    "ComposedLowerBound",
    "Ratio",
)


@dataclass(frozen=True)
class MagnitudeEstimate:
    log10_value: float
    kind: str

    def __post_init__(self):
        if not math.isfinite(self.log10_value):
            raise ValueError("log10_value must be finite")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")

    def scientific(self, digits: int = 2) -> str:
        """``"m.m x 10^e"`` rendering, e.g. ``1.1e266``."""
        e = math.floor(self.log10_value)
        mant = 10 ** (self.log10_value - e)
        if round(mant, digits - 1) >= 10:
            mant /= 10
            e += 1
        return f"{mant:.{digits - 1}f}e{e}"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "log10": self.log10_value, "scientific": self.scientific()}


def _log10_int(c: int) -> float:
    if c <= 0:
        raise ValueError("counts must be positive")
    # exact for big integers: keep 17 leading digits
    s = str(c)
    if len(s) <= 17:
        return math.log10(c)
    return math.log10(int(s[:17])) + (len(s) - 17)


def subtable_lower_bound(counts, as_log10: bool = False) -> MagnitudeEstimate:
    """log10 of the product of independent subtable counts."""
    counts = list(counts)
    if not counts:
        raise ValueError("need at least one count")
    if as_log10:
        total = math.fsum(float(c) for c in counts)
    else:
        total = math.fsum(_log10_int(int(c)) for c in counts)
    return MagnitudeEstimate(total, "SubtableLowerBound")


def subtable_counts() -> dict[str, int]:
    """Bundled lattice-point counts of the nine subtables of the lymphocyte data."""
    text = resources.files("pairfiber.data").joinpath("subtable_counts.json").read_text()
    return {k: int(v) for k, v in json.loads(text).items()}


def ellipsoid_log_volume(fhat: RealPairTable, r_squared: float) -> MagnitudeEstimate:
    """log10 volume of ``sum x^2 / fhat <= r^2`` in one dimension per cell."""
    if r_squared <= 0:
        raise ValueError("r_squared must be positive")
    f = np.asarray(fhat.values if hasattr(fhat, "values") else fhat, dtype=np.float64)
    if np.any(f <= 0):
        raise ZeroExpected("ellipsoid needs every expected cell positive")
    d = f.shape[0]
    ln_unit_ball = (d / 2) * math.log(math.pi) - math.lgamma(d / 2 + 1)
    ln_axes = d * 0.5 * math.log(r_squared) + 0.5 * math.fsum(np.log(f))
    return MagnitudeEstimate((ln_unit_ball + ln_axes) / math.log(10), "EllipsoidVolume")


def lattice_correction_magnitude(r_squared: float, n: int) -> MagnitudeEstimate:
    """log10 of ``r^(n/2)``, the order of the lattice-point error term."""
    if r_squared <= 0:
        raise ValueError("r_squared must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    return MagnitudeEstimate(n / 4 * math.log10(r_squared), "LatticeCorrection")


def log_binomial(n: int, k: int) -> MagnitudeEstimate:
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    ln = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return MagnitudeEstimate(ln / math.log(10), "BinomialCount")


def composed_lower_bound(*parts: MagnitudeEstimate) -> MagnitudeEstimate:
    """Product of independent lower bounds, e.g. subtable counts times move choices."""
    if not parts:
        raise ValueError("need at least one part")
    return MagnitudeEstimate(math.fsum(p.log10_value for p in parts), "ComposedLowerBound")


CONSERVATIVE_FLOOR = 300.0


def fiber_ratio_report(
    lower_bound_log10: float, ellipsoid_log10: float, use_floor: bool = False
) -> MagnitudeEstimate:
    """log10 of (tables inside the ellipsoid) / (fiber lower bound).

    ``use_floor`` replaces the lower bound by the rounded-down 10^300.
    """
    lower = CONSERVATIVE_FLOOR if use_floor else lower_bound_log10
    if not (math.isfinite(lower) and math.isfinite(ellipsoid_log10)):
        raise ValueError("inputs must be finite")
    return MagnitudeEstimate(ellipsoid_log10 - lower, "Ratio")
