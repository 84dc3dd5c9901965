"""Compiled inner loops: full-enumeration statistics and long chains.

Imported lazily: pulling in numba costs around a second of JIT machinery,
which small workloads never earn back.  Both kernels mirror their pure
Python twins statement for statement; the test suite holds the pairs
together.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def accumulate_stream(a0, use_factorial, log_c, lgfact, sel_kind, sel_size,
                      species, mhist, shist):
    """Stream every partition of a0 and fold it into the weighted arrays.

    Mirrors the pure-Python engine exactly: reverse-lexicographic successor
    enumeration, per-partition ln-weight from runs of equal parts, and a
    running-maximum shift so huge weight ranges stay in range.  Returns
    (visited, shift, wtotal); species/mhist/shist are updated in place.
    """
    ns = sel_kind.shape[0]
    x = np.ones(a0, dtype=np.int64)
    x[0] = a0
    m = 1
    h = 0
    run_size = np.empty(a0, dtype=np.int64)
    run_len = np.empty(a0, dtype=np.int64)
    counts = np.empty(ns, dtype=np.int64)
    shift = -np.inf
    wtotal = 0.0
    visited = 0

    while True:
        # fold in the current partition x[0:m]
        lw = 0.0
        nruns = 0
        for k in range(ns):
            counts[k] = 0
        i = 0
        while i < m:
            s = x[i]
            j = i + 1
            while j < m and x[j] == s:
                j += 1
            length = j - i
            if use_factorial:
                lw -= lgfact[length]
            lw += length * log_c[s]
            for k in range(ns):
                if sel_kind[k] == 0:
                    if s == sel_size[k]:
                        counts[k] += length
                elif s >= sel_size[k]:
                    counts[k] += length
            run_size[nruns] = s
            run_len[nruns] = length
            nruns += 1
            i = j
        if lw > shift:
            if shift > -np.inf:
                f = math.exp(shift - lw)
                wtotal *= f
                for t in range(a0 + 1):
                    species[t] *= f
                    mhist[t] *= f
                for k in range(ns):
                    for t in range(a0 + 1):
                        shist[k, t] *= f
            shift = lw
        w = math.exp(lw - shift)
        wtotal += w
        mhist[m] += w
        for t in range(nruns):
            species[run_size[t]] += w * run_len[t]
        for k in range(ns):
            shist[k, counts[k]] += w
        visited += 1

        # advance to the reverse-lexicographic successor
        if x[0] == 1:
            break
        if x[h] == 2:
            x[h] = 1
            m += 1
            h -= 1
        else:
            r = x[h] - 1
            t = m - h
            x[h] = r
            while t >= r:
                h += 1
                x[h] = r
                t -= r
            if t == 0:
                m = h + 1
            else:
                m = h + 2
                if t > 1:
                    h += 1
                    x[h] = t
    return visited, shift, wtotal


@njit(cache=True)
def chain_kernel(a0, redraw, use_fact, log_c, log_int, seed,
                 burn_in, samples, thinning, sel_kind, sel_size,
                 parts0, m0, species, mhist, shist):
    """Run one Metropolis chain and histogram every recorded state.

    ``redraw`` selects the kernel: True redraws invalid pairs and accepts
    on the bare weight ratio, False counts them as self-transitions and
    applies the Hastings factor for proposal-count and pair-count
    asymmetry.  Records every ``thinning``-th post-burn-in step into
    species/mhist/shist (unit weights).  Returns the accepted-move count.
    """
    np.random.seed(seed)
    ns = sel_kind.shape[0]
    parts = np.zeros(a0 + 1, dtype=np.int64)
    for t in range(m0):
        parts[t] = parts0[t]
    m = m0
    cnt = np.zeros(a0 + 2, dtype=np.int64)
    for t in range(m):
        cnt[parts[t]] += 1
    accepted = 0
    stepno = 0
    recorded = 0
    while recorded < samples:
        i = np.random.randint(0, m)
        r = np.random.randint(0, m)
        j = r + 1 if r >= i else r
        a = parts[i]
        b = 0
        ok = True
        if j == m:
            if a == 1 or (i != m - 1 and parts[i + 1] == a):
                ok = False
        else:
            b = parts[j]
            if b == a - 1:
                ok = False
            elif a == 1:
                if b == 1:
                    lo1 = m - cnt[1]
                    if i == lo1:
                        ok = j == lo1 + 1
                    else:
                        ok = j == lo1
                elif j > 0 and parts[j - 1] <= b:
                    ok = False
            else:
                if i != m - 1 and parts[i + 1] == a:
                    ok = False
                elif j > 0 and parts[j - 1] <= b:
                    ok = False
        if not ok and redraw:
            continue  # invalid pairs do not advance the redraw kernel
        if ok:
            n_pq = cnt[1] if a == 1 else 1
            dlw = 0.0
            c = cnt[a]
            cnt[a] = c - 1
            if use_fact:
                dlw += log_int[c]
            dlw -= log_c[a]
            if a > 1:
                c = cnt[a - 1]
                cnt[a - 1] = c + 1
                if use_fact:
                    dlw -= log_int[c + 1]
                dlw += log_c[a - 1]
            if b > 0:
                c = cnt[b]
                cnt[b] = c - 1
                if use_fact:
                    dlw += log_int[c]
                dlw -= log_c[b]
            c = cnt[b + 1]
            cnt[b + 1] = c + 1
            if use_fact:
                dlw -= log_int[c + 1]
            dlw += log_c[b + 1]

            if redraw:
                ln_alpha = dlw
            else:
                n_qp = cnt[1] if b == 0 else 1
                m_q = m + 1 if b == 0 else (m - 1 if a == 1 else m)
                ln_alpha = dlw
                if n_qp != n_pq:
                    ln_alpha += log_int[n_qp] - log_int[n_pq]
                if m_q != m:
                    ln_alpha += 2.0 * (log_int[m] - log_int[m_q])
            if ln_alpha >= 0.0 or np.random.random() < math.exp(ln_alpha):
                if a == 1:
                    parts[j] = b + 1
                    for t in range(i, m - 1):
                        parts[t] = parts[t + 1]
                    m -= 1
                else:
                    parts[i] = a - 1
                    if b == 0:
                        parts[m] = 1
                        m += 1
                    else:
                        parts[j] = b + 1
                accepted += 1
            else:
                cnt[a] += 1
                if a > 1:
                    cnt[a - 1] -= 1
                if b > 0:
                    cnt[b] += 1
                cnt[b + 1] -= 1
        stepno += 1
        if stepno > burn_in and (stepno - burn_in) % thinning == 0:
            mhist[m] += 1.0
            for t in range(m):
                species[parts[t]] += 1.0
            for k in range(ns):
                sz = sel_size[k]
                cn = 0
                if sel_kind[k] == 0:
                    for t in range(m):
                        if parts[t] == sz:
                            cn += 1
                else:
                    for t in range(m):
                        if parts[t] >= sz:
                            cn += 1
                shist[k, cn] += 1.0
            recorded += 1
    return accepted
