"""Test statistics, chi-square tail probabilities and the all-pairs scan."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BoundaryError, DidNotConverge, ZeroExpected, ZeroNull
from .mle import FitConfig, fit
from .model import ModelSpec, model_rank
from .table import PairIndex, PairTable, PairValues, RealPairTable, pair_list

__all__ = [
    "ChiSquareStatistic",
    "PairScanRow",
    "chi_square_stat",
    "g_squared",
    "g_squared_observed",
    "regularized_gamma_p",
    "regularized_gamma_q",
    "chisq_sf",
    "chisq_cdf",
    "bonferroni",
    "deviation_table",
    "pair_scan",
]


def _require_positive(fhat: RealPairTable, exc=ZeroExpected) -> None:
    if np.any(fhat.values <= 0):
        raise exc("expected table has a zero cell")


def chi_square_stat(F: PairValues, fhat: RealPairTable) -> float:
    """Pearson statistic ``sum (F - fhat)^2 / fhat`` over all cells."""
    if F.n != fhat.n:
        raise ValueError("tables disagree on n")
    _require_positive(fhat)
    return float(_kernels.chi2(F.values, fhat.values))


class ChiSquareStatistic:
    """Callable chi-square statistic against a fixed expected table.

    The sampler recognises this type and evaluates it inside the compiled walk
    with the same arithmetic as :func:`chi_square_stat`, so ties are exact.
    """

    def __init__(self, fhat: RealPairTable):
        _require_positive(fhat)
        self.fhat = fhat
        self.expected = np.ascontiguousarray(fhat.values, dtype=np.float64)

    def __call__(self, t: PairValues) -> float:
        return chi_square_stat(t, self.fhat)


def _xlogy_ratio(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=np.float64)
    pos = a > 0
    out[pos] = a[pos] * np.log(a[pos] / b[pos])
    return out


def g_squared(fhat1: RealPairTable, fhat0: RealPairTable) -> float:
    """``2 * sum fhat1 * log(fhat1 / fhat0)`` with ``0 log 0 = 0``.

    Both factors use the alternative-model fit. For fits of the same data this
    equals the usual ``2 * (loglik1 - loglik0)``, since ``log(fhat1/fhat0)``
    lies in the row space of the larger design matrix.
    """
    if fhat1.n != fhat0.n:
        raise ValueError("tables disagree on n")
    _require_positive(fhat0, ZeroNull)
    return float(2.0 * _xlogy_ratio(fhat1.values, fhat0.values).sum())


def g_squared_observed(f: PairTable, fhat1: RealPairTable, fhat0: RealPairTable) -> float:
    """Conventional likelihood-ratio statistic ``2 * sum f * log(fhat1 / fhat0)``."""
    _require_positive(fhat0, ZeroNull)
    a = f.values.astype(np.float64)
    pos = a > 0
    return float(2.0 * np.sum(a[pos] * np.log(fhat1.values[pos] / fhat0.values[pos])))


# --- incomplete gamma -------------------------------------------------------

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _gamma_series(a: float, x: float) -> float:
    # P(a, x) by its power series; best for x < a + 1
    term = 1.0 / a
    acc = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        acc += term
        if abs(term) < abs(acc) * _EPS:
            break
    else:
        raise ArithmeticError(f"gamma series did not converge for a={a}, x={x}")
    return acc * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    # Q(a, x) by modified Lentz continued fraction; best for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction did not converge for a={a}, x={x}")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def regularized_gamma_q(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def chisq_sf(x: float, df: int) -> float:
    """Upper tail ``P(X >= x)`` of a chi-square variable with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return regularized_gamma_q(df / 2.0, x / 2.0)


def chisq_cdf(x: float, df: int) -> float:
    if df <= 0:
        raise ValueError("df must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return regularized_gamma_p(df / 2.0, x / 2.0)


def bonferroni(p: float, tests: int) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if tests < 1:
        raise ValueError("tests must be a positive integer")
    return min(1.0, p * tests)


def deviation_table(f: PairTable, fhat: PairValues) -> PairValues:
    """Signed cellwise ``f - fhat``."""
    if f.n != fhat.n:
        raise ValueError("tables disagree on n")
    return PairValues(f.n, f.values - fhat.values)


# --- pair scan ---------------------------------------------------------------


@dataclass(frozen=True)
class PairScanRow:
    pair: PairIndex
    statistic: float
    p_raw: float
    p_adjusted: float
    df: int
    g2_observed: float
    pearson_cell: float
    mu: float | None = None
    flag: str | None = None

    def as_dict(self) -> dict:
        return {
            "pair": [self.pair.j, self.pair.k],
            "statistic": self.statistic,
            "p_raw": self.p_raw,
            "p_adjusted": self.p_adjusted,
            "df": self.df,
            "g2_observed": self.g2_observed,
            "pearson_cell": self.pearson_cell,
            "mu": self.mu,
            "flag": self.flag,
        }


def pair_scan(data: PairTable, cfg: FitConfig | None = None, tests: int | None = None) -> list[PairScanRow]:
    """Likelihood-ratio test of every single-pair model against the no-proximity model.

    Rows are sorted by raw p-value (ties by pair). Pairs whose single-pair fit
    has no interior MLE or does not converge are kept, with ``flag`` set and
    NaN statistics, and sort last.
    """
    cfg = cfg or FitConfig()
    n = data.n
    tests = tests if tests is not None else len(pair_list(n))
    null = fit(ModelSpec.no_proximity(n), data, cfg)
    f0 = null.fitted
    # rank difference is the same for every pair; computed once
    df = model_rank(ModelSpec.single_pair(n, 1, 2)) - model_rank(ModelSpec.no_proximity(n))

    rows = []
    for pair in pair_list(n):
        pearson = (data[pair] - f0[pair]) ** 2 / f0[pair]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", DidNotConverge)
                alt = fit(ModelSpec(n, pair), data, cfg)
        except (BoundaryError, DidNotConverge) as exc:
            nan = math.nan
            rows.append(PairScanRow(pair, nan, nan, nan, df, nan, pearson, None, f"{type(exc).__name__}: {exc}"))
            continue
        g2 = g_squared(alt.fitted, f0)
        p = chisq_sf(max(g2, 0.0), df)
        rows.append(
            PairScanRow(
                pair=pair,
                statistic=g2,
                p_raw=p,
                p_adjusted=bonferroni(p, tests),
                df=df,
                g2_observed=g_squared_observed(data, alt.fitted, f0),
                pearson_cell=pearson,
                mu=alt.mu,
            )
        )
    rows.sort(key=lambda r: (r.flag is not None, r.p_raw if r.flag is None else 0.0, r.pair))
    return rows
