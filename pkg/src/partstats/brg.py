"""Biased random generation: exact uniform sampling of partitions.

Two stages.  The part count M is drawn from its exact marginal
P(a0, M) / P(a0); then a partition with exactly M parts is drawn uniformly
by walking the counting recursion: with probability
P(n - 1, m - 1) / P(n, m) the smallest remaining part is (the current
offset plus) 1, otherwise every remaining part grows by one unit.  Each
partition of a0 comes out with probability exactly 1 / P(a0).

This construction targets the counting measure and nothing else.  A
reweighting estimator for other weight models is provided deliberately:
it renormalizes weights within each fixed-M class, so the M marginal stays
the counting one and the estimate converges to the wrong mixture whenever
the weights reshape the M distribution.  That failure is the point; the
comparison tooling is expected to flag it.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Sequence

from .core import Partition, WeightModel
from .exact import CountTable
from .stats import DEFAULT_SELECTORS, SpeciesSelector, SummaryStatistics

__all__ = [
    "BiasFunction",
    "ReweightedEstimate",
    "bias_function",
    "sample_fixed_multiplicity",
    "sample_brg",
    "reweighted_species_means",
]


@dataclass(frozen=True)
class BiasFunction:
    """Exact part-count marginal b(a0, M) = P(a0, M) / P(a0), M = 1..a0."""

    a0: int
    probabilities: dict[int, float]
    _cumulative: tuple[float, ...] = field(repr=False)

    def sample(self, rng: random.Random) -> int:
        """Draw M by inverse transform on the cumulative marginal."""
        idx = bisect_left(self._cumulative, rng.random())
        return min(idx + 1, self.a0)


def bias_function(table: CountTable, a0: int) -> BiasFunction:
    """Build the exact M marginal from a count table covering a0."""
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    if table.a0_max < a0:
        raise ValueError(f"table covers only a0 <= {table.a0_max}, need {a0}")
    probs = table.m_distribution(a0)
    cum: list[float] = []
    run = 0.0
    for m in range(1, a0 + 1):
        run += probs[m]
        cum.append(run)
    cum[-1] = 1.0  # pin the final edge so u ~ 1 cannot fall off the table
    return BiasFunction(a0=a0, probabilities=probs, _cumulative=tuple(cum))


def sample_fixed_multiplicity(
    a0: int, m: int, table: CountTable, rng: random.Random
) -> Partition:
    """Uniform draw among the P(a0, m) partitions with exactly m parts.

    Recursive unranking on the counting recursion: at state (n, m) with
    every remaining part already raised by ``offset``, commit a part of
    size offset + 1 with probability P(n-1, m-1) / P(n, m), else raise all
    remaining parts by one.  One pass, O(a0) random draws.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    if int(m) != m or not 1 <= m <= a0:
        raise ValueError(f"no partitions of {a0} with m = {m!r} parts")
    if table.a0_max < a0:
        raise ValueError(f"table covers only a0 <= {table.a0_max}, need {a0}")
    rows = table._branch_ratio_rows
    rand = rng.random
    smallest_first: list[int] = []
    n, k, offset = a0, int(m), 0
    while True:
        if n == k:  # all remaining parts are exactly offset + 1
            smallest_first.extend([offset + 1] * k)
            break
        if rand() < rows[n][k]:
            smallest_first.append(offset + 1)
            n -= 1
            k -= 1
            if k == 0:
                break
        else:
            n -= k
            offset += 1
    smallest_first.reverse()
    return Partition(tuple(smallest_first))


def sample_brg(
    a0: int,
    table: CountTable,
    rng: random.Random,
    *,
    bias: BiasFunction | None = None,
) -> Partition:
    """One uniform partition of a0: draw M from its marginal, then unrank.

    Passing a prebuilt ``bias`` skips rebuilding the marginal; callers in
    sampling loops should do so.
    """
    if bias is None:
        bias = bias_function(table, a0)
    elif bias.a0 != a0:
        raise ValueError(f"bias function is for a0 = {bias.a0}, not {a0}")
    return sample_fixed_multiplicity(a0, bias.sample(rng), table, rng)


@dataclass(frozen=True)
class ReweightedEstimate:
    """Weighted averages from uniform draws, renormalized within each M class.

    ``m_distribution`` stays the counting-measure marginal by construction,
    which is exactly why these estimates disagree with the true weighted
    ensemble whenever the weights reshape the M distribution.
    """

    a0: int
    sample_count: int
    mean_species: dict[int, float]
    m_distribution: dict[int, float]
    species_distributions: dict[SpeciesSelector, dict[int, float]]


def reweighted_species_means(
    a0: int,
    model: WeightModel,
    table: CountTable,
    rng: random.Random,
    n_samples: int,
    selectors: Sequence[SpeciesSelector] = DEFAULT_SELECTORS,
) -> ReweightedEstimate:
    """Demonstrably wrong weighted estimator over uniform BRG draws.

    Each draw enters a per-M accumulator with offset ln W_f; classes are
    then mixed with the observed (counting) M frequencies.  Kept as the
    documented failure mode of reweighting this sampler.
    """
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError(f"n_samples must be a positive integer, got {n_samples!r}")
    sels = tuple(selectors)
    bias = bias_function(table, a0)
    per_m: dict[int, SummaryStatistics] = {}
    for _ in range(int(n_samples)):
        p = sample_brg(a0, table, rng, bias=bias)
        acc = per_m.get(p.multiplicity)
        if acc is None:
            acc = per_m[p.multiplicity] = SummaryStatistics(a0, sels)
        acc.accumulate(p, model.log_weight(p))

    n_total = sum(acc.sample_count for acc in per_m.values())
    mean_species = {s: 0.0 for s in range(1, a0 + 1)}
    m_distribution = {m: 0.0 for m in range(1, a0 + 1)}
    species_distributions: dict[SpeciesSelector, dict[int, float]] = {
        sel: {n: 0.0 for n in range(a0 // sel.size + 1)} for sel in sels
    }
    for m, acc in per_m.items():
        frac = acc.sample_count / n_total
        m_distribution[m] = frac
        for s, v in acc.species_mean.items():
            mean_species[s] += frac * v
        for sel in sels:
            dist = acc.species_distribution(sel)
            out = species_distributions[sel]
            for n, v in dist.items():
                out[n] += frac * v
    return ReweightedEstimate(
        a0=a0,
        sample_count=n_total,
        mean_species=mean_species,
        m_distribution=m_distribution,
        species_distributions=species_distributions,
    )
