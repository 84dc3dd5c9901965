"""Ground truth: exact counts, streaming enumeration, weighted ensemble sums.

Counting uses the two-variable recursion

    P(n, m) = P(n - m, m) + P(n - 1, m - 1),    P(0, 0) = 1,

which splits the partitions of n with m parts by whether the smallest part
equals 1 (strip a unit from every part, or strip one size-1 part).  The
same recursion drives the count table, the part-count distribution and the
branch probabilities used by the biased sampler.

Enumeration streams every partition in reverse-lexicographic order at
constant amortized cost per partition; weighted ensemble averages over the
full stream are the reference values every sampler is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import Partition, WeightModel
from .stats import DEFAULT_SELECTORS, SpeciesSelector

__all__ = [
    "CountTable",
    "ExactSummary",
    "ResourceGuardError",
    "ENUMERATION_GUARD",
    "build_count_table",
    "hardy_ramanujan",
    "enumerate_partitions",
    "exact_statistics",
    "exact_mean_multiplicity_from_counts",
    "mean_species_from_counts",
    "factorial_partition_sum",
]

# Refuse to enumerate more partitions than this without an explicit opt-in;
# a full sweep at this size is hours of CPU, not an accident to make cheap.
ENUMERATION_GUARD = 2_000_000_000

DEFAULT_EXACT_LIMIT = 400


class ResourceGuardError(RuntimeError):
    """Raised when a full enumeration would exceed the partition-count guard."""


@dataclass(frozen=True)
class CountTable:
    """P(n) and P(n, m) up to ``a0_max``, exact integers plus a log mirror.

    Integer rows are kept for n <= min(a0_max, exact_limit) and give exact
    arbitrary-precision counts; the log-space mirror covers every n so
    that ratios of astronomically large counts remain usable.
    """

    a0_max: int
    exact_limit: int
    _rows: tuple[tuple[int, ...], ...] = field(repr=False)
    _totals: tuple[int, ...] = field(repr=False)
    _log_rows: np.ndarray = field(repr=False)
    _log_totals: np.ndarray = field(repr=False)

    @property
    def exact_max(self) -> int:
        """Largest n with exact integer counts available."""
        return min(self.a0_max, self.exact_limit)

    def _check(self, n: int, exact: bool) -> None:
        top = self.exact_max if exact else self.a0_max
        if not 0 <= n <= top:
            hint = " (exact integers kept only up to exact_limit; use log_p*)" if (
                exact and n <= self.a0_max
            ) else ""
            raise ValueError(f"n = {n} outside table range 0..{top}{hint}")

    def p(self, n: int) -> int:
        """Exact number of partitions of n (P(0) = 1)."""
        self._check(n, exact=True)
        return self._totals[n]

    def p_nm(self, n: int, m: int) -> int:
        """Exact number of partitions of n with exactly m parts."""
        self._check(n, exact=True)
        if m < 0:
            raise ValueError(f"m = {m} must be >= 0")
        return self._rows[n][m] if m <= n else 0

    def log_p(self, n: int) -> float:
        """ln P(n); works over the full table range."""
        self._check(n, exact=False)
        return float(self._log_totals[n])

    def log_p_nm(self, n: int, m: int) -> float:
        """ln P(n, m), -inf where the count is zero."""
        self._check(n, exact=False)
        if m < 0:
            raise ValueError(f"m = {m} must be >= 0")
        if m > n:
            return -math.inf
        return float(self._log_rows[n, m])

    def m_distribution(self, n: int) -> dict[int, float]:
        """Part-count distribution P(n, m)/P(n) over m = 1..n."""
        if n < 1:
            raise ValueError(f"n = {n} must be >= 1")
        if n <= self.exact_max:
            total = self._totals[n]
            row = self._rows[n]
            return {m: row[m] / total for m in range(1, n + 1)}
        self._check(n, exact=False)
        log_total = self._log_totals[n]
        row = self._log_rows[n]
        return {
            m: (math.exp(row[m] - log_total) if row[m] > -math.inf else 0.0)
            for m in range(1, n + 1)
        }

    @cached_property
    def _branch_ratio_rows(self) -> tuple[tuple[float, ...], ...]:
        """rows[n][m] = P(n-1, m-1)/P(n, m): chance the smallest part is 1.

        Plain nested tuples so the sampler's inner loop stays on float
        scalars.  Entries where P(n, m) = 0 are nan and are never reached
        by a walk that starts from a feasible (n, m) state.
        """
        lg = self._log_rows
        with np.errstate(invalid="ignore"):
            r = np.full_like(lg, np.nan)
            r[1:, 1:] = np.exp(lg[:-1, :-1] - lg[1:, 1:])
        return tuple(tuple(float(v) for v in row) for row in r)


def build_count_table(a0_max: int, exact_limit: int = DEFAULT_EXACT_LIMIT) -> CountTable:
    """Tabulate P(n, m) for all n <= a0_max via the smallest-part recursion."""
    if int(a0_max) != a0_max or a0_max < 1:
        raise ValueError(f"a0_max must be a positive integer, got {a0_max!r}")
    if exact_limit < 1:
        raise ValueError(f"exact_limit must be >= 1, got {exact_limit!r}")
    rows: list[list[int]] = [[1]]
    for n in range(1, a0_max + 1):
        row = [0] * (n + 1)
        prev = rows[n - 1]
        for m in range(1, n + 1):
            stripped = rows[n - m][m] if m <= n - m else 0
            row[m] = stripped + prev[m - 1]
        rows.append(row)

    log_rows = np.full((a0_max + 1, a0_max + 1), -np.inf, dtype=np.float64)
    log_totals = np.empty(a0_max + 1, dtype=np.float64)
    totals: list[int] = []
    for n, row in enumerate(rows):
        total = sum(row) if n else 1
        totals.append(total)
        log_totals[n] = math.log(total)
        lr = log_rows[n]
        for m, c in enumerate(row):
            if c:
                lr[m] = math.log(c)

    keep = min(a0_max, int(exact_limit))
    return CountTable(
        a0_max=a0_max,
        exact_limit=int(exact_limit),
        _rows=tuple(tuple(r) for r in rows[: keep + 1]),
        _totals=tuple(totals[: keep + 1]),
        _log_rows=log_rows,
        _log_totals=log_totals,
    )


def hardy_ramanujan(a0: int) -> float:
    """Leading asymptotic estimate exp(pi sqrt(2 a0 / 3)) / (4 sqrt(3) a0).

    Overestimates P(a0) by a few percent already at a0 ~ 100 and converges
    slowly from above as a0 grows.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    return math.exp(math.pi * math.sqrt(2.0 * a0 / 3.0)) / (4.0 * math.sqrt(3.0) * a0)


def _successor_stream(a0: int) -> Iterator[tuple[list[int], int]]:
    """Yield (buffer, part_count) for every partition of a0, largest part first.

    Reverse-lexicographic successor stepping with constant amortized work:
    find the rightmost part above 1 (tracked, not searched), lower it by
    one and re-spread the freed units as fast as possible.  The buffer is
    reused in place; callers must copy what they keep.
    """
    x = [1] * a0
    x[0] = a0
    m = 1  # number of parts of the current partition
    h = 0  # index of the last part that exceeds 1 (valid while x[0] != 1)
    yield x, 1
    while x[0] != 1:
        if x[h] == 2:
            x[h] = 1
            m += 1
            h -= 1
        else:
            r = x[h] - 1
            t = m - h  # units freed to the right of position h, plus the 1 taken
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
        yield x, m


def _ensure_table(a0: int, table: CountTable | None) -> CountTable:
    if table is not None and table.a0_max >= a0:
        return table
    return build_count_table(a0)


def _guard_enumeration(a0: int, table: CountTable, force: bool) -> None:
    if force:
        return
    if a0 <= table.exact_max:
        too_big = table.p(a0) > ENUMERATION_GUARD
    else:
        too_big = table.log_p(a0) > math.log(ENUMERATION_GUARD)
    if too_big:
        raise ResourceGuardError(
            f"enumerating all partitions of {a0} exceeds the guard of "
            f"{ENUMERATION_GUARD:,} partitions; pass force=True to run anyway"
        )


def enumerate_partitions(
    a0: int,
    visitor: Callable[[Partition], None],
    *,
    force: bool = False,
    table: CountTable | None = None,
) -> int:
    """Call ``visitor`` once per partition of a0; return how many were visited.

    Order is reverse-lexicographic starting at the single-part partition.
    Refuses runs past ``ENUMERATION_GUARD`` partitions unless ``force``.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    _guard_enumeration(a0, _ensure_table(a0, table), force)
    visited = 0
    for buf, m in _successor_stream(a0):
        visitor(Partition(tuple(buf[:m])))
        visited += 1
    return visited


@dataclass(frozen=True)
class ExactSummary:
    """Every-partition ensemble averages under one weight model."""

    a0: int
    partition_count: int
    total_log_weight: float
    mean_multiplicity: float
    mean_species: dict[int, float]
    m_distribution: dict[int, float]
    species_distributions: dict[SpeciesSelector, dict[int, float]]

    @property
    def selectors(self) -> tuple[SpeciesSelector, ...]:
        return tuple(self.species_distributions)


def _python_engine(
    a0: int,
    model: WeightModel,
    selectors: tuple[SpeciesSelector, ...],
) -> tuple[int, float, float, list[float], list[float], list[list[float]]]:
    """Reference accumulation over the full stream, pure Python."""
    use_factorial = model.uses_factorial
    log_c = [model.log_coefficient(s) for s in range(a0 + 1)]
    has_c = any(v != 0.0 for v in log_c)
    lgfact = [math.lgamma(k + 1) for k in range(a0 + 1)]
    sels = [(0 if s.kind == "exact" else 1, s.size) for s in selectors]
    ns = len(sels)

    shift = -math.inf
    wtotal = 0.0
    species = [0.0] * (a0 + 1)
    mhist = [0.0] * (a0 + 1)
    shist = [[0.0] * (a0 + 1) for _ in range(ns)]
    visited = 0

    for x, m in _successor_stream(a0):
        lw = 0.0
        counts = [0] * ns
        runs: list[tuple[int, int]] = []
        i = 0
        while i < m:
            s = x[i]
            j = i + 1
            while j < m and x[j] == s:
                j += 1
            length = j - i
            if use_factorial:
                lw -= lgfact[length]
            if has_c:
                lw += length * log_c[s]
            for k in range(ns):
                kind, size = sels[k]
                if (kind == 0 and s == size) or (kind == 1 and s >= size):
                    counts[k] += length
            runs.append((s, length))
            i = j
        if lw > shift:
            f = math.exp(shift - lw) if shift > -math.inf else 0.0
            wtotal *= f
            species = [v * f for v in species]
            mhist = [v * f for v in mhist]
            shist = [[v * f for v in row] for row in shist]
            shift = lw
        w = math.exp(lw - shift)
        wtotal += w
        mhist[m] += w
        for s, length in runs:
            species[s] += w * length
        for k in range(ns):
            shist[k][counts[k]] += w
        visited += 1
    return visited, shift, wtotal, species, mhist, shist


def _numba_engine(
    a0: int,
    model: WeightModel,
    selectors: tuple[SpeciesSelector, ...],
) -> tuple[int, float, float, list[float], list[float], list[list[float]]]:
    from ._fast import accumulate_stream

    ns = len(selectors)
    log_c = np.zeros(a0 + 1, dtype=np.float64)
    for s in range(1, a0 + 1):
        log_c[s] = model.log_coefficient(s)
    lgfact = np.array([math.lgamma(k + 1) for k in range(a0 + 1)], dtype=np.float64)
    sel_kind = np.array(
        [0 if s.kind == "exact" else 1 for s in selectors], dtype=np.int64
    )
    sel_size = np.array([s.size for s in selectors], dtype=np.int64)
    species = np.zeros(a0 + 1, dtype=np.float64)
    mhist = np.zeros(a0 + 1, dtype=np.float64)
    shist = np.zeros((ns, a0 + 1), dtype=np.float64)
    visited, shift, wtotal = accumulate_stream(
        a0, model.uses_factorial, log_c, lgfact, sel_kind, sel_size,
        species, mhist, shist,
    )
    return (
        int(visited), float(shift), float(wtotal),
        species.tolist(), mhist.tolist(), [row.tolist() for row in shist],
    )


# below this many partitions the Python engine beats numba's warm-up cost
_NUMBA_THRESHOLD = 200_000


def exact_statistics(
    a0: int,
    model: WeightModel,
    species: Sequence[SpeciesSelector] = DEFAULT_SELECTORS,
    *,
    engine: str = "auto",
    force: bool = False,
    table: CountTable | None = None,
) -> ExactSummary:
    """Ensemble averages by visiting every partition of a0 exactly once.

    ``engine`` is ``auto`` (compiled loop for large runs, plain Python
    otherwise), ``python`` or ``numba``.  Enumeration cost grows like
    exp(pi sqrt(2 a0 / 3)); the partition-count guard applies as in
    :func:`enumerate_partitions`.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    if engine not in ("auto", "python", "numba"):
        raise ValueError(f"unknown engine {engine!r}")
    selectors = tuple(species)
    if len(set(selectors)) != len(selectors):
        raise ValueError("duplicate species selectors")
    tab = _ensure_table(a0, table)
    _guard_enumeration(a0, tab, force)

    if engine == "auto":
        big = (
            tab.p(a0) > _NUMBA_THRESHOLD
            if a0 <= tab.exact_max
            else True
        )
        engine = "numba" if big else "python"
    run = _numba_engine if engine == "numba" else _python_engine
    visited, shift, wtotal, species_w, mhist, shist = run(a0, model, selectors)

    mean_species = {s: species_w[s] / wtotal for s in range(1, a0 + 1)}
    m_distribution = {m: mhist[m] / wtotal for m in range(1, a0 + 1)}
    mean_multiplicity = math.fsum(m * w for m, w in enumerate(mhist)) / wtotal
    species_distributions = {
        sel: {n: shist[k][n] / wtotal for n in range(a0 // sel.size + 1)}
        for k, sel in enumerate(selectors)
    }
    return ExactSummary(
        a0=a0,
        partition_count=visited,
        total_log_weight=shift + math.log(wtotal),
        mean_multiplicity=mean_multiplicity,
        mean_species=mean_species,
        m_distribution=m_distribution,
        species_distributions=species_distributions,
    )


def exact_mean_multiplicity_from_counts(a0: int, table: CountTable) -> float:
    """Mean part count under uniform weights, straight from the count table.

    Uses the exact integer moment sum_m m P(a0, m) / P(a0) when available,
    the log mirror otherwise; no enumeration involved.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    if table.a0_max < a0:
        raise ValueError(f"table covers only a0 <= {table.a0_max}, need {a0}")
    if a0 <= table.exact_max:
        moment = 0
        row = table._rows[a0]
        for m in range(1, a0 + 1):
            moment += m * row[m]
        return moment / table.p(a0)
    dist = table.m_distribution(a0)
    return math.fsum(m * p for m, p in dist.items())


def mean_species_from_counts(a0: int, table: CountTable) -> dict[int, float]:
    """Uniform-weight mean occupation of every size, from counts alone.

    Partitions of a0 holding at least j parts of size A biject with the
    partitions of a0 - jA (delete j such parts), so

        <N_A> = sum_{j >= 1} P(a0 - jA) / P(a0).

    Exact integer arithmetic within the table's exact range, log-space
    ratios beyond; an independent check on full enumeration.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    if table.a0_max < a0:
        raise ValueError(f"table covers only a0 <= {table.a0_max}, need {a0}")
    out: dict[int, float] = {}
    if a0 <= table.exact_max:
        total = table.p(a0)
        for size in range(1, a0 + 1):
            acc = 0
            rest = a0 - size
            while rest >= 0:
                acc += table.p(rest)
                rest -= size
            out[size] = acc / total
    else:
        log_total = table.log_p(a0)
        for size in range(1, a0 + 1):
            acc = 0.0
            rest = a0 - size
            while rest >= 0:
                acc += math.exp(table.log_p(rest) - log_total)
                rest -= size
            out[size] = acc
    return out


def factorial_partition_sum(a0: int) -> tuple[float, float]:
    """ln(sum_f W_f) and <M> under W_f = 1 / prod_A N_A!, via dynamic programming.

    Layering over the largest allowed part size k, the recursion tracks for
    every remaining mass n the weight total G and the weight-weighted part
    count H; using j parts of size k contributes a factor 1/j! and adds j
    to the count:

        G_k(n) = sum_j G_{k-1}(n - j k) / j!
        H_k(n) = sum_j (H_{k-1}(n - j k) + j G_{k-1}(n - j k)) / j!

    Cost is O(a0^2 log a0); no enumeration involved.
    """
    if int(a0) != a0 or a0 < 1:
        raise ValueError(f"a0 must be a positive integer, got {a0!r}")
    g_prev = [0.0] * (a0 + 1)
    h_prev = [0.0] * (a0 + 1)
    g_prev[0] = 1.0
    for k in range(1, a0 + 1):
        g = [0.0] * (a0 + 1)
        h = [0.0] * (a0 + 1)
        for n in range(a0 + 1):
            acc_g = g_prev[n]
            acc_h = h_prev[n]
            inv_jf = 1.0
            for j in range(1, n // k + 1):
                inv_jf /= j
                rem = n - j * k
                gp = g_prev[rem]
                acc_g += inv_jf * gp
                acc_h += inv_jf * (h_prev[rem] + j * gp)
            g[n] = acc_g
            h[n] = acc_h
        g_prev, h_prev = g, h
    total = g_prev[a0]
    return math.log(total), h_prev[a0] / total
