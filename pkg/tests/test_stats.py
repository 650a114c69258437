from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special
from scipy import stats as sst

from conftest import tables
from pairfiber import ModelSpec, PairTable, RealPairTable, ZeroExpected, ZeroNull, fit, margins
from pairfiber.stats import (
    ChiSquareStatistic,
    bonferroni,
    chi_square_stat,
    chisq_cdf,
    chisq_sf,
    deviation_table,
    g_squared,
    g_squared_observed,
    pair_scan,
    regularized_gamma_p,
    regularized_gamma_q,
)
from pairfiber.table import pair_list


def test_chi_square_examples():
    f = PairTable(4, [3, 1, 2, 2, 1, 3])
    assert chi_square_stat(f, RealPairTable(4, np.full(6, 2.0))) == pytest.approx(2.0)
    g = PairTable(4, [1, 2, 3, 4, 5, 6])
    assert chi_square_stat(g, g.as_real()) == 0.0
    assert ChiSquareStatistic(RealPairTable(4, np.full(6, 2.0)))(f) == pytest.approx(2.0)


def test_chi_square_rejects_zero_expected():
    with pytest.raises(ZeroExpected):
        chi_square_stat(PairTable.zeros(4), RealPairTable(4, [1, 1, 1, 1, 1, 0.0]))


@given(tables(min_n=3, max_n=6), st.floats(0.1, 10))
def test_chi_square_nonnegative_and_matches_numpy(t, scale):
    fhat = RealPairTable(t.n, np.linspace(0.5, 3, t.values.shape[0]) * scale)
    value = chi_square_stat(t, fhat)
    assert value >= 0
    assert value == pytest.approx(np.sum((t.values - fhat.values) ** 2 / fhat.values), rel=1e-12)


def test_table1_chi_square_values(table1, table2):
    fm = fit(ModelSpec.no_proximity(22), table1)
    # exact MLE of the margins, and the printed two-digit table
    assert chi_square_stat(table1, fm.fitted) == pytest.approx(343.174, abs=1e-3)
    assert chi_square_stat(table1, table2) == pytest.approx(346.41, abs=0.01)


def test_g_squared_identities(table1):
    null = fit(ModelSpec.no_proximity(22), table1)
    assert g_squared(null.fitted, null.fitted) == 0.0
    for r, s in [(1, 22), (13, 14), (3, 19)]:
        alt = fit(ModelSpec.single_pair(22, r, s), table1)
        g2 = g_squared(alt.fitted, null.fitted)
        # three routes to the same likelihood-ratio statistic
        assert g2 == pytest.approx(2 * (alt.loglik - null.loglik), abs=1e-6)
        assert g2 == pytest.approx(g_squared_observed(table1, alt.fitted, null.fitted), abs=1e-6)
        assert g2 >= -1e-9 * 3737


def test_g_squared_zero_null():
    with pytest.raises(ZeroNull):
        g_squared(RealPairTable(3, [1, 1, 1.0]), RealPairTable(3, [1, 0, 1.0]))


@pytest.mark.parametrize("x,df", [(0.5, 1), (3.841459, 1), (13.66, 1), (17.27, 1), (5.0, 3), (40.0, 7), (0.01, 2), (250.0, 200)])
def test_chisq_sf_against_scipy(x, df):
    assert chisq_sf(x, df) == pytest.approx(sst.chi2.sf(x, df), rel=1e-10, abs=1e-300)
    assert chisq_cdf(x, df) == pytest.approx(sst.chi2.cdf(x, df), rel=1e-10, abs=1e-15)


def test_chisq_sf_examples():
    assert chisq_sf(0.0, 1) == 1.0 and chisq_sf(0.0, 5) == 1.0
    assert chisq_sf(13.66, 1) == pytest.approx(0.00022, abs=0.000005)
    # independent quadrature of the density
    area, _ = integrate.quad(lambda y: sst.chi2.pdf(y, 1), 3.841459, np.inf)
    assert chisq_sf(3.841459, 1) == pytest.approx(area, abs=1e-8)
    assert abs(chisq_sf(3.841459, 1) - 0.05) <= 1e-4


@settings(max_examples=100)
@given(st.floats(0.05, 60), st.floats(0, 150))
def test_incomplete_gamma(a, x):
    p, q = regularized_gamma_p(a, x), regularized_gamma_q(a, x)
    assert p + q == pytest.approx(1.0, abs=1e-12)
    assert q == pytest.approx(special.gammaincc(a, x), rel=1e-9, abs=1e-14)


@given(st.floats(0, 80), st.floats(0, 80), st.integers(1, 10))
def test_chisq_sf_monotone(x, y, df):
    lo, hi = sorted((x, y))
    assert chisq_sf(lo, df) >= chisq_sf(hi, df)


def test_chisq_validation():
    with pytest.raises(ValueError):
        chisq_sf(-1.0, 1)
    with pytest.raises(ValueError):
        chisq_sf(1.0, 0)


def test_bonferroni_examples():
    assert bonferroni(0.01, 231) == 1.0
    assert bonferroni(0.0, 231) == 0.0
    assert bonferroni(0.00022, 231) == pytest.approx(0.05082)
    with pytest.raises(ValueError):
        bonferroni(0.1, 0)
    with pytest.raises(ValueError):
        bonferroni(1.5, 2)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 500), st.integers(1, 500))
def test_bonferroni_monotone(p1, p2, m1, m2):
    assert bonferroni(min(p1, p2), min(m1, m2)) <= bonferroni(max(p1, p2), max(m1, m2)) <= 1.0


def test_deviation_table(table1):
    fm = fit(ModelSpec.no_proximity(22), table1)
    d = deviation_table(table1, fm.fitted)
    assert np.allclose(d.values, table1.values - fm.fitted.values)
    assert not np.any(deviation_table(table1, table1).values)
    assert d.values.sum() == pytest.approx(0.0, abs=1e-6)


def test_scan_of_model_table_is_flat():
    theta = np.arange(1, 7)
    n = 6
    cells = [theta[p.j - 1] * theta[p.k - 1] for p in pair_list(n)]
    rows = pair_scan(PairTable(n, cells))
    assert len(rows) == 15
    for r in rows:
        assert abs(r.statistic) < 1e-7 and r.p_raw == pytest.approx(1.0, abs=1e-3)
        assert r.df == 1 and r.flag is None


def test_scan_ordering_and_bonferroni(table1):
    rows = pair_scan(table1)
    assert len(rows) == 231
    p = [r.p_raw for r in rows]
    assert p == sorted(p)
    for r in rows:
        assert r.p_adjusted == pytest.approx(min(1.0, 231 * r.p_raw))
    rows46 = pair_scan(table1, tests=46)
    assert rows46[0].p_adjusted == pytest.approx(min(1.0, 46 * rows46[0].p_raw))


def test_scan_flags_boundary_pairs():
    # the null fit is interior, but fixing (2,5) leaves u'_2 + u'_5 equal to the rest
    # and fixing (4,5) empties category 4
    t = PairTable.from_cells(5, {(1, 2): 2, (1, 5): 1, (2, 3): 2, (2, 5): 1, (3, 5): 3, (4, 5): 2})
    rows = pair_scan(t)
    flagged = [r for r in rows if r.flag]
    assert {(r.pair.j, r.pair.k) for r in flagged} == {(2, 5), (4, 5)}
    assert flagged and all(math.isnan(r.statistic) for r in flagged)
    assert rows[-len(flagged):] == flagged


def test_scan_invariant_under_relabeling(table1):
    rng = np.random.default_rng(5)
    perm = rng.permutation(22)  # new label of old category k is perm[k-1] + 1
    sq = table1.to_square()
    inv = np.argsort(perm)
    relabeled = PairTable.from_square(sq[np.ix_(inv, inv)])
    assert margins(relabeled).u.tolist() == margins(table1).u[inv].tolist()
    base = {(r.pair.j, r.pair.k): r.statistic for r in pair_scan(table1)}
    moved = {(r.pair.j, r.pair.k): r.statistic for r in pair_scan(relabeled)}
    for (j, k), stat in base.items():
        a, b = sorted((perm[j - 1] + 1, perm[k - 1] + 1))
        assert moved[(a, b)] == pytest.approx(stat, rel=1e-6, abs=1e-8)
