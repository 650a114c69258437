"""Exact conditional inference for symmetric pairwise exchange tables.

Fits the no-proximity and single-pair log-linear models, walks the fiber of
an observed table with a degree-two Markov basis, scans all pairs with
likelihood-ratio tests and estimates fiber sizes.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    BoundaryError,
    DidNotConverge,
    FiberTooLarge,
    NegativeCell,
    PairFiberError,
    ParseError,
    TooSmall,
    ZeroExpected,
    ZeroMargin,
    ZeroNull,
)
from .table import MarginVector, PairIndex, PairTable, PairValues, RealPairTable, apply_move, margins, total
from .model import ModelSpec, design_matrix, model_rank, sufficient_statistic
from .mle import FitConfig, FittedModel, fit
from .markov import MarkovBasis, MarkovMove, generate_basis, normal_form, sorted_table
from .stats import ChiSquareStatistic, chi_square_stat, chisq_sf, g_squared, pair_scan
from .sampler import ChainConfig, GofResult, run_chain
from .enumeration import FiberEnumeration, MagnitudeEstimate, enumerate_fiber, exact_p_value
from .io import load_example, parse_table
