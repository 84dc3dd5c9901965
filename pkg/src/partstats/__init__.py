"""Statistics of weighted integer partitions, four ways.

A partition of a0 splits it into positive integer parts; ensembles over
all partitions are fixed by a weight model (uniform, factorial, per-size
coefficients).  The package computes species and multiplicity statistics
of such ensembles by

* exact streaming enumeration (:mod:`partstats.exact`),
* grand-canonical closed forms (:mod:`partstats.analytic`),
* exact two-stage random generation (:mod:`partstats.brg`),
* Metropolis chains over single-unit moves (:mod:`partstats.mcg`),

with shared accumulators and comparison metrics in :mod:`partstats.stats`
and a CSV-emitting command line in :mod:`partstats.cli`.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    Partition,
    WeightModel,
    format_partition,
    log_weight,
    make_partition,
    parse_partition,
)
from .exact import (
    CountTable,
    ExactSummary,
    ResourceGuardError,
    build_count_table,
    enumerate_partitions,
    exact_mean_multiplicity_from_counts,
    exact_statistics,
    factorial_partition_sum,
    hardy_ramanujan,
)
from .analytic import (
    AnalyticPrediction,
    fugacity_approximation,
    mean_species_multiplicities,
    mean_total_multiplicity,
    predict,
    solve_fugacity,
    species_distribution,
)
from .brg import BiasFunction, bias_function, sample_brg, sample_fixed_multiplicity
from .mcg import (
    ChainState,
    MoveProposal,
    enumerate_proposals,
    memory_loss_diagnostic,
    new_chain,
    run_chain,
    step,
    transition_multiplicity,
)
from .stats import (
    DEFAULT_SELECTORS,
    SpeciesSelector,
    SummaryStatistics,
    accumulate,
    chi_square_uniformity,
    total_variation,
)

__all__ = [
    "__version__",
    "Partition",
    "WeightModel",
    "make_partition",
    "log_weight",
    "format_partition",
    "parse_partition",
    "CountTable",
    "ExactSummary",
    "ResourceGuardError",
    "build_count_table",
    "hardy_ramanujan",
    "enumerate_partitions",
    "exact_statistics",
    "exact_mean_multiplicity_from_counts",
    "factorial_partition_sum",
    "AnalyticPrediction",
    "solve_fugacity",
    "fugacity_approximation",
    "mean_species_multiplicities",
    "mean_total_multiplicity",
    "species_distribution",
    "predict",
    "BiasFunction",
    "bias_function",
    "sample_fixed_multiplicity",
    "sample_brg",
    "MoveProposal",
    "ChainState",
    "enumerate_proposals",
    "transition_multiplicity",
    "new_chain",
    "step",
    "run_chain",
    "memory_loss_diagnostic",
    "SpeciesSelector",
    "DEFAULT_SELECTORS",
    "SummaryStatistics",
    "accumulate",
    "total_variation",
    "chi_square_uniformity",
]
