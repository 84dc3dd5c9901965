"""Grand-canonical predictions for the two closed-form weight families.

``equal``      every partition counted once.  Species occupations are
               independent geometric variables at fugacity x, fixed by
               sum_A A x^A / (1 - x^A) = a0.
``factorial``  repeated sizes suppressed by 1/N_A!.  Occupations are
               independent Poisson variables and the constraint collapses
               to x / (1 - x)^2 = a0, so <M> = x / (1 - x) ~ sqrt(a0).

Mass is conserved only on average here, which is what makes everything
closed-form; the exact module is the arbiter whenever the two disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .stats import SpeciesSelector

__all__ = [
    "ANALYTIC_KINDS",
    "AnalyticPrediction",
    "solve_fugacity",
    "fugacity_approximation",
    "mean_species_multiplicities",
    "mean_total_multiplicity",
    "species_distribution",
    "predict",
    "total_multiplicity_distribution",
    "species_class_distribution",
]

ANALYTIC_KINDS = ("equal", "factorial")

# relative tolerance of the fugacity solve and of truncated series tails
_CONSTRAINT_RTOL = 1e-8
_TAIL_RTOL = 1e-12

# subleading constant in the closed-form mean multiplicity growth law
_ASYMPTOTIC_B = 0.315087


def _check_kind(kind: str) -> None:
    if kind not in ANALYTIC_KINDS:
        raise ValueError(f"unknown analytic kind {kind!r}; expected one of {ANALYTIC_KINDS}")


def _mass_series_cutoff(x: float, a0: int) -> int:
    """Smallest power-of-two cutoff with mass-series tail below 1e-12 a0.

    The tail of sum_A A x^A / (1 - x^A) past K is bounded by the geometric
    envelope x^(K+1) ((K + 1)(1 - x) + x) / ((1 - x)^2 (1 - x^(K+1))).
    """
    tol = _TAIL_RTOL * a0
    k = 16
    while True:
        xk = x ** (k + 1)
        bound = xk * ((k + 1) * (1.0 - x) + x) / ((1.0 - x) ** 2 * (1.0 - xk))
        if bound <= tol:
            return k
        k *= 2


def _mass_series(x: float, a0: int) -> float:
    """sum_A A x^A / (1 - x^A), truncated with a certified tail bound."""
    k = _mass_series_cutoff(x, a0)
    a = np.arange(1, k + 1, dtype=np.float64)
    xa = x ** a
    return float(np.sum(a * xa / (1.0 - xa)))


def solve_fugacity(a0: int, kind: str) -> float:
    """Root x in (0, 1) of the mean-mass constraint, by bisection.

    ``equal``:     sum_A A x^A / (1 - x^A) = a0
    ``factorial``: x / (1 - x)^2 = a0

    Both left sides increase monotonically from 0 to infinity on (0, 1),
    so the bracket [eps, 1 - eps] always straddles the root; iteration
    stops once the constraint holds to relative 1e-8.
    """
    _check_kind(kind)
    if int(a0) != a0 or a0 < 2:
        raise ValueError(f"a0 must be an integer >= 2, got {a0!r}")
    if kind == "factorial":
        def f(x: float) -> float:
            return x / (1.0 - x) ** 2
    else:
        def f(x: float) -> float:
            return _mass_series(x, a0)
    lo, hi = 1e-12, 1.0 - 1e-12
    tol = _CONSTRAINT_RTOL * a0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        if abs(val - a0) <= tol:
            return mid
        if val < a0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17:
            break
    raise RuntimeError(f"fugacity bisection failed to converge for a0={a0}, kind={kind!r}")


def fugacity_approximation(a0: int) -> float:
    """Large-system estimate of the equal-weight fugacity.

    exp(-pi / sqrt(6 a0) + 1 / (4 a0)); within 1e-3 of the solved root
    already for a0 around 20.
    """
    if int(a0) != a0 or a0 < 2:
        raise ValueError(f"a0 must be an integer >= 2, got {a0!r}")
    return math.exp(-math.pi / math.sqrt(6.0 * a0) + 1.0 / (4.0 * a0))


def mean_species_multiplicities(x: float, kind: str, a_cut: int) -> dict[int, float]:
    """Mean occupation of each size A = 1..a_cut at fugacity x.

    Geometric mean x^A / (1 - x^A) for ``equal``, Poisson mean x^A for
    ``factorial``.
    """
    _check_kind(kind)
    if not 0.0 < x < 1.0:
        raise ValueError(f"fugacity must lie strictly inside (0, 1), got {x!r}")
    if int(a_cut) != a_cut or a_cut < 1:
        raise ValueError(f"a_cut must be a positive integer, got {a_cut!r}")
    a = np.arange(1, a_cut + 1, dtype=np.float64)
    xa = x ** a
    vals = xa / (1.0 - xa) if kind == "equal" else xa
    return {int(s): float(v) for s, v in zip(range(1, a_cut + 1), vals)}


def mean_total_multiplicity(a0: int, kind: str) -> tuple[float, float]:
    """(closed_form, series_sum) for the mean number of parts.

    ``series_sum`` sums the species means at the solved fugacity and is
    the self-consistent value.  ``closed_form`` is the growth law usually
    quoted next to it: sqrt(a0) for ``factorial``, and for ``equal``

        (1 / pi) sqrt(3 a0 / 2) ln(6 a0 / (b pi^2)),   b = 0.315087.

    The equal-weight pair converges slowly: the gap is still about 4% at
    a0 = 100 and about 0.5% at a0 = 10000.  Report both, trust the series.
    """
    _check_kind(kind)
    x = solve_fugacity(a0, kind)
    if kind == "factorial":
        return math.sqrt(a0), x / (1.0 - x)
    closed = math.sqrt(1.5 * a0) / math.pi * math.log(6.0 * a0 / (_ASYMPTOTIC_B * math.pi**2))
    # tail of sum x^A / (1 - x^A) past K is below x^(K+1) / ((1-x)(1-x^(K+1)))
    k = 16
    while x ** (k + 1) / ((1.0 - x) * (1.0 - x ** (k + 1))) > _TAIL_RTOL * a0:
        k *= 2
    a = np.arange(1, k + 1, dtype=np.float64)
    xa = x ** a
    series = float(np.sum(xa / (1.0 - xa)))
    return closed, series


def species_distribution(mean: float, kind: str) -> dict[int, float]:
    """Occupation-number law of one species given its mean.

    Geometric P(N) = (1/(1+m)) (m/(1+m))^N for ``equal``, Poisson
    P(N) = e^-m m^N / N! for ``factorial``.  Truncated once the
    cumulative probability reaches 1 - 1e-15, or once the running term
    has fallen 17 decades below the modal one (rounding can pin the
    float cumulative just short of the target); either way the dropped
    tail's second moment stays below 1e-9.
    """
    _check_kind(kind)
    if not mean > 0.0:
        raise ValueError(f"mean occupation must be positive, got {mean!r}")
    out: dict[int, float] = {}
    cum = 0.0
    if kind == "equal":
        ratio = mean / (1.0 + mean)
        p = 1.0 / (1.0 + mean)
    else:
        ratio = mean  # multiplied by 1/(N+1) per step
        p = math.exp(-mean)
    n = 0
    peak = p
    while True:
        out[n] = p
        cum += p
        if p > peak:
            peak = p
        if cum >= 1.0 - 1e-15 or p <= 1e-17 * peak:
            return out
        n += 1
        if n > 10_000_000:
            raise RuntimeError("species distribution failed to accumulate mass 1")
        p = p * ratio if kind == "equal" else p * ratio / n


@dataclass(frozen=True)
class AnalyticPrediction:
    """Solved fugacity plus every species mean up to the series cutoff."""

    a0: int
    weight_kind: str
    fugacity: float
    mean_species: dict[int, float]
    mean_multiplicity_series: float
    mean_multiplicity_closed_form: float
    series_cutoff: int


def predict(a0: int, kind: str) -> AnalyticPrediction:
    """Solve the constraint and package the standard prediction set."""
    _check_kind(kind)
    x = solve_fugacity(a0, kind)
    # the tail bound for the equal-weight mass series dominates the
    # factorial one, so one cutoff rule serves both kinds
    cutoff = _mass_series_cutoff(x, a0)
    means = mean_species_multiplicities(x, kind, cutoff)
    closed, series = mean_total_multiplicity(a0, kind)
    return AnalyticPrediction(
        a0=a0,
        weight_kind=kind,
        fugacity=x,
        mean_species=means,
        mean_multiplicity_series=series,
        mean_multiplicity_closed_form=closed,
        series_cutoff=cutoff,
    )


def _convolve(dists: list[dict[int, float]]) -> dict[int, float]:
    """Distribution of a sum of independent non-negative integer variables."""
    acc = np.array([1.0])
    for d in dists:
        top = max(d)
        vec = np.zeros(top + 1)
        for n, p in d.items():
            vec[n] = p
        acc = np.convolve(acc, vec)
        # drop a vanishing upper tail to keep the support from snowballing
        tail = np.cumsum(acc[::-1])[::-1]
        keep = int(np.argmax(tail < 1e-13)) if np.any(tail < 1e-13) else len(acc)
        acc = acc[: max(keep, 1)]
    return {n: float(p) for n, p in enumerate(acc)}


def total_multiplicity_distribution(a0: int, kind: str) -> dict[int, float]:
    """Law of the total part count as a sum of independent species counts.

    Species with mean occupation below 1e-14 are skipped; they cannot move
    the result at the tolerance this package works to.
    """
    pred = predict(a0, kind)
    dists = [
        species_distribution(mean, kind)
        for mean in pred.mean_species.values()
        if mean > 1e-14
    ]
    return _convolve(dists)


def species_class_distribution(
    a0: int, kind: str, selector: SpeciesSelector
) -> dict[int, float]:
    """Law of the number of parts a selector matches, from independence.

    An exact-size selector is a single species; a floor selector sums the
    independent occupations of every size at or above it.
    """
    pred = predict(a0, kind)
    if selector.kind == "exact":
        mean = pred.mean_species.get(selector.size, 0.0)
        if mean <= 1e-14:
            return {0: 1.0}
        return species_distribution(mean, kind)
    dists = [
        species_distribution(mean, kind)
        for size, mean in pred.mean_species.items()
        if size >= selector.size and mean > 1e-14
    ]
    if not dists:
        return {0: 1.0}
    return _convolve(dists)
