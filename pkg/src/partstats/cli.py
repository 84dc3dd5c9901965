"""Command-line surface: exact counts, figure-data runs, run comparison.

``partstats run`` writes one directory per run:

    manifest.json             what produced the numbers (schema versioned)
    mass_distribution.csv     A, mean_N_A
    m_distribution.csv        M, probability
    species_distribution.csv  selector, N, probability
    samples.txt               raw draws, only with --dump

Floats are serialized with repr(), so identical runs are byte-identical.
``partstats compare`` reads two such directories and exits nonzero when a
distribution metric crosses its threshold.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import random
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence, TextIO

from . import __version__
from .analytic import (
    predict,
    species_class_distribution,
    total_multiplicity_distribution,
)
from .brg import bias_function, reweighted_species_means, sample_brg
from .core import WeightModel, format_partition
from .exact import (
    ResourceGuardError,
    build_count_table,
    exact_statistics,
    hardy_ramanujan,
)
from .mcg import KERNEL_EXACT_MH, KERNELS, run_chain
from .stats import (
    DEFAULT_SELECTORS,
    SpeciesSelector,
    SummaryStatistics,
    chi_square_uniformity,
    total_variation,
)

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "PARTSTATS_OUT"

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

MASS_FILE = "mass_distribution.csv"
M_FILE = "m_distribution.csv"
SPECIES_FILE = "species_distribution.csv"
MANIFEST_FILE = "manifest.json"
DUMP_FILE = "samples.txt"

_SAMPLER_METHODS = ("brg", "mcg")


class SchemaError(ValueError):
    """A run directory does not hold what the manifest schema promises."""


@dataclass(frozen=True)
class RunManifest:
    """Everything that determined a run's numbers, minus wall-clock time."""

    schema_version: int
    command: str
    a0: int
    weight_model: str
    method: str
    kernel: str | None
    seed: int | None
    burn_in: int | None
    samples: int | None
    thinning: int | None
    selectors: list[str]
    timestamp: str
    tool_version: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"manifest is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise SchemaError("manifest must be a JSON object")
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"manifest schema_version {raw.get('schema_version')!r} "
                f"not supported (expected {SCHEMA_VERSION})"
            )
        try:
            return cls(**{f: raw[f] for f in cls.__dataclass_fields__})
        except (KeyError, TypeError) as e:
            raise SchemaError(f"manifest is missing fields: {e}") from e


def _fmt(v: float | int) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows: list[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_outputs(
    outdir: Path,
    manifest: RunManifest,
    mean_species: Mapping[int, float],
    m_distribution: Mapping[int, float],
    species_distributions: Mapping[SpeciesSelector, Mapping[int, float]],
) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / MASS_FILE,
        ("A", "mean_N_A"),
        [(str(a), _fmt(mean_species[a])) for a in sorted(mean_species)],
    )
    _write_csv(
        outdir / M_FILE,
        ("M", "probability"),
        [(str(m), _fmt(m_distribution[m])) for m in sorted(m_distribution)],
    )
    species_rows: list[Sequence[str]] = []
    for sel in species_distributions:
        dist = species_distributions[sel]
        species_rows.extend(
            (sel.label, str(n), _fmt(dist[n])) for n in sorted(dist)
        )
    _write_csv(outdir / SPECIES_FILE, ("selector", "N", "probability"), species_rows)
    (outdir / MANIFEST_FILE).write_text(manifest.to_json(), encoding="utf-8")


def _parse_selectors(text: str | None) -> tuple[SpeciesSelector, ...]:
    if text is None:
        return DEFAULT_SELECTORS
    sels = tuple(SpeciesSelector.from_label(f) for f in text.split(",") if f.strip())
    if not sels:
        raise ValueError(f"no selectors in {text!r}")
    return sels


def cmd_count(args: argparse.Namespace) -> int:
    a0 = args.a0
    table = build_count_table(a0, exact_limit=a0)
    if args.multiplicity is not None:
        print(table.p_nm(a0, args.multiplicity))
    else:
        print(table.p(a0))
    print(f"hardy_ramanujan {hardy_ramanujan(a0)!r}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV)
    if out is None:
        raise ValueError(
            f"no output directory: pass --out or set ${OUTPUT_DIR_ENV}"
        )
    outdir = Path(out)
    a0 = args.a0
    selectors = _parse_selectors(args.selectors)
    method = args.method
    model = WeightModel.uniform() if args.weights == "uniform" else WeightModel.factorial()

    seed = args.seed
    if method in _SAMPLER_METHODS and seed is None:
        seed = random.SystemRandom().getrandbits(63)

    dump: TextIO | None = None
    if args.dump:
        if method not in _SAMPLER_METHODS:
            raise ValueError("--dump only applies to the sampler methods (brg, mcg)")
        outdir.mkdir(parents=True, exist_ok=True)
        dump = open(outdir / DUMP_FILE, "w", encoding="utf-8", newline="")

    try:
        if method == "direct":
            summary = exact_statistics(a0, model, selectors, force=args.force)
            mean_species = summary.mean_species
            m_distribution = summary.m_distribution
            species_distributions = summary.species_distributions
        elif method == "analytic":
            kind = "equal" if args.weights == "uniform" else "factorial"
            mean_species = predict(a0, kind).mean_species
            m_distribution = total_multiplicity_distribution(a0, kind)
            species_distributions = {
                sel: species_class_distribution(a0, kind, sel) for sel in selectors
            }
        elif method == "brg":
            table = build_count_table(a0)
            rng = random.Random(seed)
            if args.weights == "uniform":
                bias = bias_function(table, a0)
                acc = SummaryStatistics(a0, selectors)
                for _ in range(args.samples):
                    p = sample_brg(a0, table, rng, bias=bias)
                    acc.accumulate(p)
                    if dump is not None:
                        dump.write(format_partition(p) + "\n")
                mean_species = acc.species_mean
                m_distribution = acc.m_distribution()
                species_distributions = {
                    sel: acc.species_distribution(sel) for sel in selectors
                }
            else:
                if not args.demonstrate_failure:
                    raise ValueError(
                        "brg samples the counting measure only; reweighting it "
                        "within fixed part counts does not recover factorial "
                        "ensembles (the M marginal stays the unweighted one). "
                        "Pass --demonstrate-failure to emit the biased "
                        "estimate anyway."
                    )
                est = reweighted_species_means(
                    a0, model, table, rng, args.samples, selectors
                )
                mean_species = est.mean_species
                m_distribution = est.m_distribution
                species_distributions = est.species_distributions
        elif method == "mcg":
            observer = None
            if dump is not None:
                observer = lambda parts: dump.write(
                    " ".join(str(a) for a in parts) + "\n"
                )
            acc = run_chain(
                a0,
                model,
                args.kernel,
                seed,
                args.burn_in,
                args.samples,
                thinning=args.thinning,
                selectors=selectors,
                observer=observer,
            )
            mean_species = acc.species_mean
            m_distribution = acc.m_distribution()
            species_distributions = {
                sel: acc.species_distribution(sel) for sel in selectors
            }
        else:  # pragma: no cover - argparse restricts choices
            raise ValueError(f"unknown method {method!r}")
    finally:
        if dump is not None:
            dump.close()

    manifest = RunManifest(
        schema_version=SCHEMA_VERSION,
        command="run",
        a0=a0,
        weight_model=args.weights,
        method=method,
        kernel=args.kernel if method == "mcg" else None,
        seed=seed if method in _SAMPLER_METHODS else None,
        burn_in=args.burn_in if method == "mcg" else None,
        samples=args.samples if method in _SAMPLER_METHODS else None,
        thinning=args.thinning if method == "mcg" else None,
        selectors=[sel.label for sel in selectors],
        timestamp=datetime.now(timezone.utc).isoformat(),
        tool_version=__version__,
    )
    _write_outputs(outdir, manifest, mean_species, m_distribution, species_distributions)
    return EXIT_OK


def _read_run_directory(
    path: Path,
) -> tuple[RunManifest, dict[int, float], dict[int, float], dict[str, dict[int, float]]]:
    if not path.is_dir():
        raise SchemaError(f"{path} is not a run directory")
    try:
        manifest = RunManifest.from_json((path / MANIFEST_FILE).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"{path} has no {MANIFEST_FILE}") from None

    def read(name: str, columns: tuple[str, ...]) -> list[dict[str, str]]:
        try:
            with open(path / name, encoding="utf-8", newline="") as f:
                reader = csv.DictReader(f)
                if tuple(reader.fieldnames or ()) != columns:
                    raise SchemaError(
                        f"{path / name}: expected columns {columns}, "
                        f"got {tuple(reader.fieldnames or ())}"
                    )
                return list(reader)
        except FileNotFoundError:
            raise SchemaError(f"{path} has no {name}") from None

    mass = {int(r["A"]): float(r["mean_N_A"]) for r in read(MASS_FILE, ("A", "mean_N_A"))}
    mdist = {int(r["M"]): float(r["probability"]) for r in read(M_FILE, ("M", "probability"))}
    species: dict[str, dict[int, float]] = {}
    for r in read(SPECIES_FILE, ("selector", "N", "probability")):
        species.setdefault(r["selector"], {})[int(r["N"])] = float(r["probability"])
    return manifest, mass, mdist, species


def _mass_fractions(a0: int, mean_species: Mapping[int, float]) -> dict[int, float]:
    """A * mean_N_A / a0: the fraction of all mass bound in size-A parts."""
    return {a: a * v / a0 for a, v in mean_species.items()}


def cmd_compare(args: argparse.Namespace) -> int:
    man1, mass1, mdist1, species1 = _read_run_directory(Path(args.dir1))
    man2, mass2, mdist2, species2 = _read_run_directory(Path(args.dir2))
    if man1.a0 != man2.a0:
        raise SchemaError(f"a0 mismatch: {man1.a0} vs {man2.a0}")
    if man1.selectors != man2.selectors:
        raise SchemaError(
            f"selector mismatch: {man1.selectors} vs {man2.selectors}"
        )
    a0 = man1.a0

    rows: list[tuple[str, str, float, float]] = []
    rows.append((
        "mass_distribution", "tv",
        total_variation(_mass_fractions(a0, mass1), _mass_fractions(a0, mass2)),
        args.tv_threshold,
    ))
    if args.metric == "tv":
        rows.append((
            "m_distribution", "tv",
            total_variation(mdist1, mdist2), args.tv_threshold,
        ))
        for label in man1.selectors:
            rows.append((
                f"species[{label}]", "tv",
                total_variation(species1[label], species2[label]),
                args.tv_threshold,
            ))
    else:
        from scipy.stats import chi2

        # the sampled side plays "observed"; the other side is the law
        if man2.method in _SAMPLER_METHODS and man2.samples:
            n, observed, expected = man2.samples, (mdist2, species2), (mdist1, species1)
        elif man1.method in _SAMPLER_METHODS and man1.samples:
            n, observed, expected = man1.samples, (mdist1, species1), (mdist2, species2)
        else:
            raise SchemaError("chisq comparison needs at least one sampled run")

        def p_value(obs: Mapping[int, float], exp: Mapping[int, float]) -> float:
            counts = {k: v * n for k, v in obs.items()}
            stat, dof = chi_square_uniformity(counts, dict(exp), n)
            return float(chi2.sf(stat, dof))

        rows.append((
            "m_distribution", "chisq_p",
            p_value(observed[0], expected[0]), args.p_threshold,
        ))
        for label in man1.selectors:
            rows.append((
                f"species[{label}]", "chisq_p",
                p_value(observed[1][label], expected[1][label]),
                args.p_threshold,
            ))

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("observable", "metric", "value", "threshold", "flag"))
    failed = False
    for observable, metric, value, threshold in rows:
        # TV flags above its threshold, p-values flag below theirs
        bad = value > threshold if metric == "tv" else value < threshold
        failed = failed or bad
        writer.writerow((observable, metric, _fmt(value), _fmt(threshold),
                         "FAIL" if bad else "ok"))
    return EXIT_THRESHOLD if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partstats",
        description="Exact, analytic and Monte-Carlo statistics of weighted integer partitions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("count", help="exact partition counts plus the asymptotic estimate")
    c.add_argument("a0", type=int)
    c.add_argument("--multiplicity", type=int, default=None, metavar="M",
                   help="count only partitions with exactly M parts")
    c.set_defaults(func=cmd_count)

    r = sub.add_parser("run", help="compute distributions by one method; write CSV + manifest")
    r.add_argument("a0", type=int)
    r.add_argument("--method", required=True, choices=("direct", "analytic", "brg", "mcg"))
    r.add_argument("--weights", default="uniform", choices=("uniform", "factorial"))
    r.add_argument("--kernel", default=KERNEL_EXACT_MH, choices=KERNELS,
                   help="mcg acceptance kernel (default: exact-mh)")
    r.add_argument("--seed", type=int, default=None,
                   help="sampler seed; randomized and recorded when omitted")
    r.add_argument("--burn-in", type=int, default=10_000, dest="burn_in")
    r.add_argument("--samples", type=int, default=100_000)
    r.add_argument("--thinning", type=int, default=1,
                   help="record every n-th chain step (mcg only)")
    r.add_argument("--selectors", default=None, metavar="LIST",
                   help='species classes to track, e.g. "A=1,A=4,A>=10"')
    r.add_argument("--out", default=None, metavar="DIR",
                   help=f"output directory (default: ${OUTPUT_DIR_ENV})")
    r.add_argument("--demonstrate-failure", action="store_true",
                   help="allow the documented-to-fail brg reweighting estimator")
    r.add_argument("--force", action="store_true",
                   help="override the direct method's enumeration size guard")
    r.add_argument("--dump", action="store_true",
                   help="also write every recorded draw to samples.txt")
    r.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two run directories, exit 1 past thresholds")
    cmp_.add_argument("dir1")
    cmp_.add_argument("dir2")
    cmp_.add_argument("--metric", default="tv", choices=("tv", "chisq"))
    cmp_.add_argument("--tv-threshold", type=float, default=0.03)
    cmp_.add_argument("--p-threshold", type=float, default=0.01)
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResourceGuardError as e:
        print(f"partstats: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (SchemaError, ValueError) as e:
        print(f"partstats: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
