"""Maximum-likelihood fitting by iterative proportional scaling.

Every cell lies in two margins, so the scaling step is the damped
(generalized iterative scaling) update

    fitted(j,k) <- fitted(j,k) * sqrt(u_j / m_j * u_k / m_k)

applied to all cells at once. Written in terms of the category factors this is
``theta_j <- theta_j * sqrt(u_j / m_j)``, so the iterate always stays in the
multiplicative model and only ``theta`` is stored.

For the single-pair model the fixed-cell statistic pins the fitted ``(r, s)``
cell to the observed count; the remaining cells are fitted against the margins
with that count removed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryError, DidNotConverge, ZeroMargin
from .model import ModelSpec
from .table import PairTable, RealPairTable, margins, n_cells, total, triu_arrays

__all__ = ["FitConfig", "FittedModel", "fit", "expected_cell", "theta_from_fitted"]


@dataclass(frozen=True)
class FitConfig:
    tolerance: float = 1e-8
    max_iterations: int = 100_000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class FittedModel:
    spec: ModelSpec
    theta: np.ndarray
    mu: float | None
    fitted: RealPairTable
    loglik: float
    iterations: int
    converged: bool
    max_violation: float
    sample_size: int

    @property
    def beta(self) -> np.ndarray:
        return np.log(self.theta)

    @property
    def alpha(self) -> float | None:
        if self.mu is None:
            return None
        return math.log(self.mu) if self.mu > 0 else -math.inf

    @property
    def probabilities(self) -> np.ndarray:
        """Fitted cell probabilities ``fitted / N`` (a point of the simplex)."""
        return self.fitted.values / self.sample_size


def _check_interior(target: np.ndarray, mask: np.ndarray, pair: tuple[int, int] | None) -> None:
    zero = np.flatnonzero(target <= 0)
    if zero.size:
        cats = ", ".join(str(int(k) + 1) for k in zero)
        raise ZeroMargin(f"zero sufficient-statistic margin for categories {cats}; MLE is on the boundary")
    n = target.shape[0]
    if n < 4:
        return
    # interior of the marginal cone: u(S) < u(N(S)) for every independent set S
    nbr = mask @ target
    bad = np.flatnonzero(target >= nbr)
    if bad.size:
        k = int(bad[0])
        raise BoundaryError(
            f"category {k + 1} margin {target[k]:g} is not below its neighbours' total {nbr[k]:g}"
        )
    if pair is not None:
        r, s = pair
        rest = target.sum() - target[r] - target[s]
        if target[r] + target[s] >= rest:
            raise BoundaryError(f"pair ({r + 1},{s + 1}) margins dominate the remaining categories")


def fit(spec: ModelSpec, data: PairTable, cfg: FitConfig | None = None) -> FittedModel:
    """Fit ``spec`` to ``data``.

    Raises ZeroMargin/BoundaryError when the MLE does not exist in the interior.
    If the iteration budget runs out a :class:`DidNotConverge` warning is issued
    and the partial fit is returned with ``converged=False``.
    """
    cfg = cfg or FitConfig()
    if spec.n != data.n:
        raise ValueError(f"model has n={spec.n} but table has n={data.n}")
    n = data.n
    target = margins(data).u.astype(np.float64)
    N = total(data)
    mask = np.ones((n, n)) - np.eye(n)
    fixed = 0
    pair0 = None
    if spec.pair is not None:
        r, s = spec.pair.j - 1, spec.pair.k - 1
        pair0 = (r, s)
        fixed = int(data[spec.pair])
        target[r] -= fixed
        target[s] -= fixed
        mask[r, s] = mask[s, r] = 0.0
    _check_interior(target, mask, pair0)

    free_cells = n_cells(n) - (1 if pair0 else 0)
    theta = np.full(n, math.sqrt((N - fixed) / free_cells))
    converged = False
    it = 0
    viol = math.inf
    while True:
        m = (mask * theta[None, :]).sum(axis=1) * theta
        viol = float(np.max(np.abs(m - target)))
        if viol <= cfg.tolerance:
            converged = True
            break
        if it >= cfg.max_iterations:
            break
        theta = theta * np.sqrt(target / m)
        it += 1

    if not converged:
        warnings.warn(
            DidNotConverge(f"{spec.label()}: max margin violation {viol:.3g} after {it} iterations"),
            stacklevel=2,
        )

    rows, cols = triu_arrays(n)
    values = theta[rows] * theta[cols]
    mu = None
    if pair0 is not None:
        off = int(np.flatnonzero((rows == pair0[0]) & (cols == pair0[1]))[0])
        values[off] = fixed
        mu = fixed / (theta[pair0[0]] * theta[pair0[1]])
    fitted = RealPairTable(n, values)

    f = data.values
    pos = f > 0
    loglik = float(np.sum(f[pos] * np.log(values[pos] / N)))
    theta.setflags(write=False)
    return FittedModel(
        spec=spec,
        theta=theta,
        mu=mu,
        fitted=fitted,
        loglik=loglik,
        iterations=it,
        converged=converged,
        max_violation=viol,
        sample_size=int(N),
    )


def expected_cell(fm: FittedModel, idx) -> float:
    return fm.fitted[idx]


def theta_from_fitted(fitted: RealPairTable, j: int, k: int, l: int) -> float:
    """Recover ``theta_j`` from three fitted cells: ``sqrt(f(j,k) f(j,l) / f(k,l))``."""

    def cell(a, b):
        return fitted[(min(a, b), max(a, b))]

    return math.sqrt(cell(j, k) * cell(j, l) / cell(k, l))
