"""Canonical partition values and the weight models placed over them.

A partition of ``a0`` is a multiset of positive integers summing to ``a0``,
stored as a non-increasing tuple of parts.  Statistical ensembles over
partitions are defined by a weight model assigning each partition an
unnormalized weight W; weights are always handled as ln W so that large
systems stay inside floating-point range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

__all__ = [
    "Partition",
    "WeightModel",
    "make_partition",
    "log_weight",
    "format_partition",
    "parse_partition",
]


@dataclass(frozen=True)
class Partition:
    """Non-increasing fragment sizes plus cached multiset views.

    ``parts`` is the canonical form.  ``multiplicities`` maps each distinct
    size A to its count N_A, ``total_mass`` is the sum of all parts and
    ``multiplicity`` the number of parts.  Equality and hashing use
    ``parts`` only.  Construct via :func:`make_partition` unless the input
    is already sorted.
    """

    parts: tuple[int, ...]
    total_mass: int = field(init=False, compare=False)
    multiplicity: int = field(init=False, compare=False)
    multiplicities: Mapping[int, int] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        parts = self.parts
        if not parts:
            raise ValueError("a partition needs at least one part")
        counts: dict[int, int] = {}
        total = 0
        prev: int | None = None
        for a in parts:
            if not isinstance(a, int) or a < 1:
                raise ValueError(f"parts must be positive integers, got {a!r}")
            if prev is not None and a > prev:
                raise ValueError(
                    "parts must be non-increasing; use make_partition() to canonicalize"
                )
            counts[a] = counts.get(a, 0) + 1
            total += a
            prev = a
        object.__setattr__(self, "total_mass", total)
        object.__setattr__(self, "multiplicity", len(parts))
        object.__setattr__(self, "multiplicities", counts)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.parts)

    def __str__(self) -> str:
        return format_partition(self)


def make_partition(parts: Iterable[int]) -> Partition:
    """Build the canonical :class:`Partition` from parts in any order."""
    seq = []
    for a in parts:
        ia = int(a)
        if ia != a:
            raise ValueError(f"parts must be integers, got {a!r}")
        seq.append(ia)
    seq.sort(reverse=True)
    return Partition(tuple(seq))


def format_partition(p: Partition) -> str:
    """Space-separated parts, largest first: ``4 3 1 1 1``."""
    return " ".join(str(a) for a in p.parts)


def parse_partition(text: str) -> Partition:
    """Inverse of :func:`format_partition`; accepts any part order."""
    fields = text.split()
    if not fields:
        raise ValueError("empty partition text")
    return make_partition(int(f) for f in fields)


_WEIGHT_KINDS = ("uniform", "factorial", "coefficient", "product")


@dataclass(frozen=True)
class WeightModel:
    """Unnormalized statistical weight over partitions, evaluated as ln W.

    Kinds:

    * ``uniform``      ln W = 0, every partition counted once
    * ``factorial``    ln W = -sum_A ln(N_A!), suppressing repeated sizes
    * ``coefficient``  ln W = sum_A N_A ln c_A with per-size factors c_A
    * ``product``      coefficient and factorial factors combined

    Coefficients default to 1 for sizes missing from the map and must be
    positive.  Use the classmethod constructors rather than spelling the
    kind string by hand.
    """

    kind: str
    coefficients: Mapping[int, float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in _WEIGHT_KINDS:
            raise ValueError(
                f"unknown weight kind {self.kind!r}; expected one of {_WEIGHT_KINDS}"
            )
        if self.kind in ("coefficient", "product"):
            if self.coefficients is None:
                raise ValueError(f"{self.kind!r} weights need a coefficient map")
        if self.coefficients is not None:
            frozen: dict[int, float] = {}
            for a, c in self.coefficients.items():
                if int(a) != a or a < 1:
                    raise ValueError(f"coefficient size {a!r} must be a positive integer")
                if not (c > 0):
                    raise ValueError(f"coefficient c_{a} = {c!r} must be positive")
                frozen[int(a)] = float(c)
            object.__setattr__(self, "coefficients", frozen)

    @classmethod
    def uniform(cls) -> "WeightModel":
        return cls("uniform")

    @classmethod
    def factorial(cls) -> "WeightModel":
        return cls("factorial")

    @classmethod
    def coefficient(cls, coefficients: Mapping[int, float]) -> "WeightModel":
        return cls("coefficient", coefficients)

    @classmethod
    def product(cls, coefficients: Mapping[int, float]) -> "WeightModel":
        return cls("product", coefficients)

    @property
    def uses_factorial(self) -> bool:
        return self.kind in ("factorial", "product")

    @property
    def uses_coefficients(self) -> bool:
        return self.coefficients is not None

    def log_coefficient(self, size: int) -> float:
        """ln c_size, 0 for sizes without an explicit coefficient."""
        if self.coefficients is None:
            return 0.0
        c = self.coefficients.get(size, 1.0)
        return 0.0 if c == 1.0 else math.log(c)

    def log_weight_of_counts(self, multiplicities: Mapping[int, int]) -> float:
        """ln W from a size -> count map; the counts fix W completely."""
        lw = 0.0
        fact = self.uses_factorial
        coeffs = self.coefficients
        for size, n in multiplicities.items():
            if n < 0:
                raise ValueError(f"negative count {n} for size {size}")
            if fact and n > 1:
                lw -= math.lgamma(n + 1)
            if coeffs is not None:
                c = coeffs.get(size, 1.0)
                if c != 1.0:
                    lw += n * math.log(c)
        return lw

    def log_weight(self, p: Partition) -> float:
        return self.log_weight_of_counts(p.multiplicities)


def log_weight(model: WeightModel, p: Partition) -> float:
    """ln W of ``p`` under ``model``.  Uniform weights give exactly 0.0."""
    return model.log_weight(p)
