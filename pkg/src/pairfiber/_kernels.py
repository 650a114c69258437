"""Compiled inner loops for the fiber walk and normal-form reduction.

Tables are flat int64 cell vectors in canonical pair order. A move is four
cell offsets: two cells gaining one count and two losing one.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def chi2(t, expected):
    acc = 0.0
    for c in range(t.shape[0]):
        d = t[c] - expected[c]
        acc += d * d / expected[c]
    return acc


@njit(cache=True)
def walk_block(
    t,
    plus1,
    plus2,
    minus1,
    minus2,
    idx,
    unif,
    hypergeometric,
    step0,
    burn_in,
    thinning,
    samples,
    expected,
    stats_out,
    tables_out,
):
    """Advance the chain ``idx.shape[0]`` steps, modifying ``t`` in place.

    Step numbers are global and 1-based starting at ``step0 + 1``. A state is
    recorded after every ``thinning``-th step past ``burn_in``. Returns the
    number of accepted proposals.
    """
    accepted = 0
    want_stats = expected.shape[0] > 0
    want_tables = tables_out.shape[0] > 0
    for b in range(idx.shape[0]):
        m = idx[b]
        a1 = minus1[m]
        a2 = minus2[m]
        if t[a1] > 0 and t[a2] > 0:
            p1 = plus1[m]
            p2 = plus2[m]
            ok = True
            if hypergeometric:
                # pi(t') / pi(t) for pi ~ 1 / prod t!
                ratio = (t[a1] * t[a2]) / ((t[p1] + 1.0) * (t[p2] + 1.0))
                ok = unif[b] < ratio
            if ok:
                t[a1] -= 1
                t[a2] -= 1
                t[p1] += 1
                t[p2] += 1
                accepted += 1
        s = step0 + b + 1
        if s > burn_in and (s - burn_in) % thinning == 0:
            r = (s - burn_in) // thinning - 1
            if r < samples:
                if want_stats:
                    stats_out[r] = chi2(t, expected)
                if want_tables:
                    tables_out[r, :] = t
    return accepted


@njit(cache=True)
def reduce_pass(t, quads, order, unit):
    """One sweep of sorted-order reductions over the quadruples in ``order``.

    ``quads[q]`` holds the offsets of cells (i,j), (i,k), (i,l), (j,k), (j,l), (k,l)
    for ``i < j < k < l``. Both the aligned pair {(i,j),(k,l)} and the nested
    pair {(i,l),(j,k)} are rewritten to the crossing pair {(i,k),(j,l)}.
    Returns the number of unit moves applied.
    """
    steps = 0
    for q in order:
        ij = quads[q, 0]
        ik = quads[q, 1]
        il = quads[q, 2]
        jk = quads[q, 3]
        jl = quads[q, 4]
        kl = quads[q, 5]
        a = min(t[ij], t[kl])
        if a > 0:
            if unit:
                a = 1
            t[ij] -= a
            t[kl] -= a
            t[ik] += a
            t[jl] += a
            steps += a
        b = min(t[il], t[jk])
        if b > 0:
            if unit:
                b = 1
            t[il] -= b
            t[jk] -= b
            t[ik] += b
            t[jl] += b
            steps += b
    return steps


@njit(cache=True)
def reduce_to_sink(t, quads):
    order = np.arange(quads.shape[0])
    steps = 0
    while True:
        s = reduce_pass(t, quads, order, False)
        if s == 0:
            return steps
        steps += s
