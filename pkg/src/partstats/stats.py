"""Mergeable weighted accumulators and distribution comparison metrics.

One accumulator type serves every producer in the package: samplers feed
it one partition per draw (log-weight offset 0), exact enumeration feeds
it every partition once with offset ln W_f.  All weighted totals are kept
relative to a running maximum offset so that enumerations whose weights
span hundreds of orders of magnitude cannot overflow or underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import Partition

__all__ = [
    "SpeciesSelector",
    "DEFAULT_SELECTORS",
    "SummaryStatistics",
    "accumulate",
    "total_variation",
    "chi_square_uniformity",
]


@dataclass(frozen=True)
class SpeciesSelector:
    """Which fragment sizes a species histogram tracks: one size or a floor."""

    kind: str
    size: int

    def __post_init__(self) -> None:
        if self.kind not in ("exact", "at_least"):
            raise ValueError(f"unknown selector kind {self.kind!r}")
        if int(self.size) != self.size or self.size < 1:
            raise ValueError(f"selector size must be a positive integer, got {self.size!r}")

    @classmethod
    def exact_size(cls, size: int) -> "SpeciesSelector":
        return cls("exact", size)

    @classmethod
    def at_least(cls, size: int) -> "SpeciesSelector":
        return cls("at_least", size)

    @property
    def label(self) -> str:
        """Stable text form used in CSV output: ``A=4`` or ``A>=10``."""
        return f"A={self.size}" if self.kind == "exact" else f"A>={self.size}"

    @classmethod
    def from_label(cls, label: str) -> "SpeciesSelector":
        s = label.strip()
        if s.startswith("A>="):
            return cls.at_least(int(s[3:]))
        if s.startswith("A="):
            return cls.exact_size(int(s[2:]))
        raise ValueError(f"unrecognized selector label {label!r}")

    def count(self, parts: Sequence[int]) -> int:
        """How many parts of a partition this selector matches."""
        s = self.size
        if self.kind == "exact":
            return sum(1 for a in parts if a == s)
        return sum(1 for a in parts if a >= s)


DEFAULT_SELECTORS: tuple[SpeciesSelector, ...] = (
    SpeciesSelector.exact_size(1),
    SpeciesSelector.exact_size(4),
    SpeciesSelector.at_least(10),
)


class SummaryStatistics:
    """Streaming weighted statistics of partitions with a fixed total mass.

    Histograms are materialized over the full deterministic support (part
    counts 1..a0, selector counts 0..a0 // size) so that empty bins appear
    explicitly and output files from different methods line up row by row.

    Merging two accumulators equals accumulating the concatenated stream,
    up to floating-point reassociation.
    """

    __slots__ = (
        "a0",
        "selectors",
        "sample_count",
        "_shift",
        "_wtotal",
        "_wspecies",
        "_wmhist",
        "_wshist",
    )

    def __init__(
        self,
        a0: int,
        selectors: Iterable[SpeciesSelector] = DEFAULT_SELECTORS,
    ) -> None:
        if int(a0) != a0 or a0 < 1:
            raise ValueError(f"a0 must be a positive integer, got {a0!r}")
        self.a0 = int(a0)
        self.selectors = tuple(selectors)
        if len(set(self.selectors)) != len(self.selectors):
            raise ValueError("duplicate species selectors")
        self.sample_count = 0
        self._shift: float | None = None
        self._wtotal = 0.0
        self._wspecies = [0.0] * (self.a0 + 1)
        self._wmhist = [0.0] * (self.a0 + 1)
        self._wshist = [[0.0] * (self.a0 // sel.size + 1) for sel in self.selectors]

    def accumulate(self, p: Partition | Sequence[int], log_weight_offset: float = 0.0) -> None:
        """Add one partition with the given ln-weight offset."""
        parts = p.parts if isinstance(p, Partition) else tuple(p)
        if sum(parts) != self.a0:
            raise ValueError(f"partition mass {sum(parts)} != accumulator a0 {self.a0}")
        self._add(parts, float(log_weight_offset))

    def _add(self, parts: Sequence[int], lw: float) -> None:
        # trusted path: parts must sum to a0 and be positive ints
        if self._shift is None or lw > self._shift:
            self._rescale(lw)
        w = math.exp(lw - self._shift)
        self.sample_count += 1
        self._wtotal += w
        self._wmhist[len(parts)] += w
        ws = self._wspecies
        for a in parts:
            ws[a] += w
        for k, sel in enumerate(self.selectors):
            self._wshist[k][sel.count(parts)] += w

    def _rescale(self, new_shift: float) -> None:
        if self._shift is None:
            self._shift = new_shift
            return
        f = math.exp(self._shift - new_shift)
        self._wtotal *= f
        self._wspecies = [v * f for v in self._wspecies]
        self._wmhist = [v * f for v in self._wmhist]
        self._wshist = [[v * f for v in row] for row in self._wshist]
        self._shift = new_shift

    def merge(self, other: "SummaryStatistics") -> "SummaryStatistics":
        """Combine two accumulators built with identical a0 and selectors."""
        if not isinstance(other, SummaryStatistics):
            raise TypeError(f"cannot merge with {type(other).__name__}")
        if self.a0 != other.a0:
            raise ValueError(f"a0 mismatch: {self.a0} != {other.a0}")
        if self.selectors != other.selectors:
            raise ValueError("selector mismatch between accumulators")
        out = SummaryStatistics(self.a0, self.selectors)
        shifts = [s._shift for s in (self, other) if s._shift is not None]
        if not shifts:
            return out
        out._shift = max(shifts)
        out.sample_count = self.sample_count + other.sample_count
        for src in (self, other):
            if src._shift is None:
                continue
            f = math.exp(src._shift - out._shift)
            out._wtotal += f * src._wtotal
            for i, v in enumerate(src._wspecies):
                out._wspecies[i] += f * v
            for i, v in enumerate(src._wmhist):
                out._wmhist[i] += f * v
            for k, row in enumerate(src._wshist):
                dst = out._wshist[k]
                for i, v in enumerate(row):
                    dst[i] += f * v
        return out

    # -- raw views ------------------------------------------------------

    @property
    def log_total_weight(self) -> float:
        """ln of the summed weights; -inf while empty."""
        if self._shift is None or self._wtotal <= 0.0:
            return -math.inf
        return self._shift + math.log(self._wtotal)

    @property
    def species_mean(self) -> dict[int, float]:
        """Weighted mean count of each size A = 1..a0."""
        self._require_data()
        wt = self._wtotal
        return {a: self._wspecies[a] / wt for a in range(1, self.a0 + 1)}

    @property
    def m_histogram(self) -> dict[int, float]:
        """Weighted histogram of the part count, keys 1..a0."""
        return {m: self._wmhist[m] for m in range(1, self.a0 + 1)}

    @property
    def species_histograms(self) -> dict[SpeciesSelector, dict[int, float]]:
        return {
            sel: {n: row[n] for n in range(len(row))}
            for sel, row in zip(self.selectors, self._wshist)
        }

    # -- normalized views -------------------------------------------------

    def mean_multiplicity(self) -> float:
        self._require_data()
        return sum(m * w for m, w in enumerate(self._wmhist)) / self._wtotal

    def m_distribution(self) -> dict[int, float]:
        """Normalized part-count distribution over 1..a0 (zero bins kept)."""
        self._require_data()
        wt = self._wtotal
        return {m: self._wmhist[m] / wt for m in range(1, self.a0 + 1)}

    def species_distribution(self, selector: SpeciesSelector) -> dict[int, float]:
        """Normalized count distribution for one selector (zero bins kept)."""
        self._require_data()
        try:
            k = self.selectors.index(selector)
        except ValueError:
            raise KeyError(f"selector {selector.label} not tracked") from None
        wt = self._wtotal
        return {n: v / wt for n, v in enumerate(self._wshist[k])}

    def _require_data(self) -> None:
        if self.sample_count == 0 or self._wtotal <= 0.0:
            raise ValueError("accumulator is empty")


def accumulate(
    acc: SummaryStatistics,
    p: Partition | Sequence[int],
    log_weight_offset: float = 0.0,
) -> SummaryStatistics:
    """Functional spelling of :meth:`SummaryStatistics.accumulate`."""
    acc.accumulate(p, log_weight_offset)
    return acc


def total_variation(d1: Mapping[int, float], d2: Mapping[int, float]) -> float:
    """Half the L1 distance between two distributions on the union support.

    Both inputs must be normalized to within 1e-6; anything else is a bug
    in the caller and raises rather than silently skewing the metric.
    """
    for name, d in (("d1", d1), ("d2", d2)):
        total = math.fsum(d.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"{name} is not normalized: sums to {total!r}")
        for k, v in d.items():
            if v < 0:
                raise ValueError(f"{name}[{k}] = {v!r} is negative")
    keys = set(d1) | set(d2)
    return 0.5 * math.fsum(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) for k in keys)


def chi_square_uniformity(
    observed: Mapping[int, float],
    expected: Mapping[int, float],
    n: int,
) -> tuple[float, int]:
    """Pearson statistic of observed counts against expected probabilities.

    Bins are pooled in ascending key order until each pool carries an
    expected count of at least 5; a trailing underweight remainder is
    folded into the previous pool.  Returns (statistic, dof) with
    dof = pools - 1; under the null the statistic is chi-square(dof).
    Raises if pooling leaves fewer than two pools.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n!r}")
    exp_total = math.fsum(expected.values())
    if abs(exp_total - 1.0) > 1e-6:
        raise ValueError(f"expected distribution sums to {exp_total!r}, not 1")
    keys = sorted(set(observed) | set(expected))
    pools: list[tuple[float, float]] = []
    obs_acc = 0.0
    exp_acc = 0.0
    for k in keys:
        obs_acc += observed.get(k, 0.0)
        exp_acc += expected.get(k, 0.0)
        if exp_acc * n >= 5.0:
            pools.append((obs_acc, exp_acc))
            obs_acc = 0.0
            exp_acc = 0.0
    if obs_acc > 0.0 or exp_acc > 0.0:
        if pools:
            last_o, last_e = pools[-1]
            pools[-1] = (last_o + obs_acc, last_e + exp_acc)
        else:
            pools.append((obs_acc, exp_acc))
    dof = len(pools) - 1
    if dof < 1:
        raise ValueError("fewer than two pooled bins; not enough data for a chi-square test")
    stat = math.fsum((o - n * e) ** 2 / (n * e) for o, e in pools)
    return stat, dof
