"""Metropolis-Hastings walk on a fiber using the degree-two Markov basis.

Proposals pick a basis move uniformly; the basis contains each move and its
negation, so the proposal is symmetric. Two targets are available:

``"hypergeometric"``
    ``pi(t) ~ 1 / prod t(cell)!``, the conditional law of a multinomial table
    given its margins. The acceptance ratio only involves the four touched cells.
``"uniform"``
    every table of the fiber equally likely; a move is accepted whenever it
    keeps all cells nonnegative.

Rejected proposals still count as steps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .markov import MarkovBasis, MarkovMove
from .stats import ChiSquareStatistic
from .table import PairTable, margins

__all__ = [
    "ChainConfig",
    "GofResult",
    "TARGETS",
    "propose",
    "acceptance_ratio",
    "run_chain",
    "estimate_p_value",
]

TARGETS = ("hypergeometric", "uniform")

_BLOCK = 1 << 16


@dataclass(frozen=True)
class ChainConfig:
    seed: int = 0
    burn_in: int = 30_000
    thinning: int = 30_000
    samples: int = 10_000
    target: str = "hypergeometric"

    def __post_init__(self):
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")

    @property
    def total_steps(self) -> int:
        return self.burn_in + self.samples * self.thinning


@dataclass(frozen=True, eq=False)
class GofResult:
    observed_stat: float
    sampled_stats: np.ndarray = field(repr=False)
    exceed_count: int
    samples: int
    steps_total: int
    accepted: int
    config: ChainConfig
    tables: np.ndarray | None = field(default=None, repr=False)

    @property
    def p_value(self) -> float:
        return self.exceed_count / self.samples

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps_total if self.steps_total else 0.0

    def summary(self) -> dict:
        s = self.sampled_stats
        return {
            "count": int(s.shape[0]),
            "min": float(s.min()),
            "max": float(s.max()),
            "mean": float(s.mean()),
        }

    def as_dict(self, include_stream: bool = False) -> dict:
        out = {
            "observed_stat": self.observed_stat,
            "p_value": self.p_value,
            "exceed_count": self.exceed_count,
            "samples": self.samples,
            "steps_total": self.steps_total,
            "accepted": self.accepted,
            "acceptance_rate": self.acceptance_rate,
            "sampled_stats": self.summary(),
            "chain": asdict(self.config),
        }
        if include_stream:
            out["sampled_stream"] = self.sampled_stats.tolist()
        return out


def propose(t: PairTable, basis: MarkovBasis, rng: np.random.Generator) -> MarkovMove:
    if basis.n != t.n:
        raise ValueError("basis and table disagree on n")
    return basis.moves[int(rng.integers(len(basis)))]


def acceptance_ratio(t: PairTable, m: MarkovMove) -> float:
    """``pi(t + m) / pi(t)`` under the hypergeometric target; 0 if inapplicable."""
    num = 1
    den = 1
    for cell in m.minus:
        c = t[cell]
        if c < 1:
            return 0.0
        num *= c
    for cell in m.plus:
        den *= t[cell] + 1
    return num / den


def estimate_p_value(sampled, observed: float) -> float:
    """Fraction of ``sampled`` statistics at least as large as ``observed``."""
    s = np.asarray(sampled, dtype=np.float64)
    if s.size == 0:
        raise ValueError("need at least one sampled value")
    return int(np.count_nonzero(s >= observed)) / s.size


def run_chain(
    start: PairTable,
    basis: MarkovBasis,
    cfg: ChainConfig,
    stat: Callable[[PairTable], float],
    keep_tables: bool = False,
) -> GofResult:
    """Walk ``burn_in + samples * thinning`` steps from ``start`` and record ``stat``.

    The output is a pure function of the inputs and ``cfg.seed``.
    ``keep_tables`` also returns every retained table as a
    ``(samples, n_cells)`` array.
    """
    if basis.n != start.n:
        raise ValueError("basis and table disagree on n")
    rng = np.random.default_rng(cfg.seed)
    t = start.values.copy()
    n_moves = len(basis)
    fast = isinstance(stat, ChiSquareStatistic)
    expected = stat.expected if fast else np.empty(0)
    stats_out = np.empty(cfg.samples if fast else 0)
    need_tables = keep_tables or not fast
    tables_out = np.empty((cfg.samples if need_tables else 0, t.shape[0]), dtype=np.int64)

    total = cfg.total_steps
    done = 0
    accepted = 0
    while done < total:
        size = min(_BLOCK, total - done)
        idx = rng.integers(0, n_moves, size=size)
        unif = rng.random(size)
        accepted += _kernels.walk_block(
            t,
            basis.plus1,
            basis.plus2,
            basis.minus1,
            basis.minus2,
            idx,
            unif,
            cfg.target == "hypergeometric",
            done,
            cfg.burn_in,
            cfg.thinning,
            cfg.samples,
            expected,
            stats_out,
            tables_out,
        )
        done += size

    if fast:
        observed = float(_kernels.chi2(start.values, expected))
        sampled = stats_out
    else:
        observed = float(stat(start))
        sampled = np.array([stat(PairTable(start.n, row)) for row in tables_out], dtype=np.float64)
    exceed = int(np.count_nonzero(sampled >= observed))
    if not math.isfinite(observed):
        raise ValueError("observed statistic is not finite")
    return GofResult(
        observed_stat=observed,
        sampled_stats=sampled,
        exceed_count=exceed,
        samples=cfg.samples,
        steps_total=total,
        accepted=int(accepted),
        config=cfg,
        tables=tables_out if keep_tables else None,
    )


def check_fiber(result: GofResult, start: PairTable) -> bool:
    """True iff every retained table has the margins of ``start`` (needs ``keep_tables``)."""
    if result.tables is None:
        raise ValueError("run_chain was called without keep_tables")
    u = margins(start)
    return all(margins(PairTable(start.n, row)) == u for row in result.tables)
