"""Shared fixtures and brute-force oracles.

The oracles here are deliberately naive and share no code with the
package: enumeration recurses on the first part, counting uses the
cached two-argument recursion directly, and weighted statistics are
computed with exact rationals.  When package and oracle disagree, one
of them is wrong on its own terms.
"""

import math
from fractions import Fraction
from functools import lru_cache

import pytest
from hypothesis import settings

from partstats.exact import build_count_table

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


def naive_partitions(a0, cap=None):
    """Yield every partition of a0 as a non-increasing tuple."""
    cap = a0 if cap is None else cap
    if a0 == 0:
        yield ()
        return
    for first in range(min(a0, cap), 0, -1):
        for rest in naive_partitions(a0 - first, first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def naive_count(n, m):
    """Number of partitions of n into exactly m parts."""
    if n == 0 and m == 0:
        return 1
    if n <= 0 or m <= 0 or m > n:
        return 0
    return naive_count(n - m, m) + naive_count(n - 1, m - 1)


def naive_weight(parts, kind):
    """Exact rational weight of one partition: 1 or 1/prod(N_A!)."""
    if kind == "uniform":
        return Fraction(1)
    prod = 1
    for size in set(parts):
        prod *= math.factorial(parts.count(size))
    return Fraction(1, prod)


def naive_statistics(a0, kind, selectors=()):
    """Weighted means and histograms over the full partition list.

    Returns (total_weight, mean_m, mean_species, m_dist, species_dists)
    with every probability still a Fraction.
    """
    total = Fraction(0)
    mean_m = Fraction(0)
    species = {}
    m_hist = {}
    sel_hists = {sel: {} for sel in selectors}
    for parts in naive_partitions(a0):
        w = naive_weight(parts, kind)
        total += w
        mean_m += w * len(parts)
        for size in parts:
            species[size] = species.get(size, Fraction(0)) + w
        m_hist[len(parts)] = m_hist.get(len(parts), Fraction(0)) + w
        for sel in selectors:
            n = sel.count(parts)
            sel_hists[sel][n] = sel_hists[sel].get(n, Fraction(0)) + w
    mean_m /= total
    species = {a: v / total for a, v in species.items()}
    m_dist = {m: v / total for m, v in m_hist.items()}
    sel_dists = {
        sel: {n: v / total for n, v in hist.items()} for sel, hist in sel_hists.items()
    }
    return total, mean_m, species, m_dist, sel_dists


@pytest.fixture(scope="session")
def table():
    return build_count_table(220)
