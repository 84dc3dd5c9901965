"""Markov chain sampling over partitions via single-unit moves.

A move takes one unit from a donor part and gives it to another part, to a
freshly appended size-1 part, or deletes a size-1 donor into an existing
part.  Moves act on the stored positions in place: entries that would end
up out of non-increasing order make the proposal invalid, they are never
re-sorted.  Proposals are ordered pairs (i, j) with i a part position and
j a part position or the append slot, drawn uniformly among the M * M
choices with j != i.

Two acceptance kernels:

* ``redraw``    invalid and identity pairs are redrawn until a real
                candidate appears, which is accepted with probability
                min(1, W_new / W_old).  Simple, but the redraw step skews
                the effective proposal law, so the stationary distribution
                is provably not proportional to W (kept as a documented
                baseline; see the comparison tooling).
* ``exact-mh``  every pair counts as one step; invalid and identity pairs
                are recorded self-transitions, and a candidate q proposed
                from p is accepted with the Hastings ratio
                min(1, (W_q n_qp M_p^2) / (W_p n_pq M_q^2)), where n_pq
                counts the ordered pairs that map p to q.  Detailed
                balance holds for every positive weight model; this is
                the default.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Partition, WeightModel, log_weight
from .stats import DEFAULT_SELECTORS, SpeciesSelector, SummaryStatistics

__all__ = [
    "KERNELS",
    "MoveProposal",
    "ChainState",
    "enumerate_proposals",
    "transition_multiplicity",
    "new_chain",
    "step",
    "run_chain",
    "memory_loss_diagnostic",
]

KERNEL_EXACT_MH = "exact-mh"
KERNEL_REDRAW = "redraw"
KERNELS = (KERNEL_EXACT_MH, KERNEL_REDRAW)

DEFAULT_BURN_IN = 10_000


@dataclass(frozen=True)
class MoveProposal:
    """One ordered donor/acceptor pair and its in-place outcome.

    Indices are 1-based positions in the stored part order;
    ``acceptor_index == multiplicity + 1`` addresses the appended slot.
    ``candidate`` is None unless the classification names a real move.
    """

    donor_index: int
    acceptor_index: int
    classification: str
    candidate: Partition | None


_VALID_CLASSES = ("transfer", "free_nucleon", "attach")


def enumerate_proposals(p: Partition) -> list[MoveProposal]:
    """All M * M ordered pairs for ``p``, classified by their outcome.

    Reference implementation: builds each candidate in place, removes
    emptied entries, and checks the stored order directly.  The chain
    kernels use a closed-form equivalent of this classification.
    """
    src = list(p.parts)
    m = len(src)
    out: list[MoveProposal] = []
    for i in range(m):
        for j in (*range(m), m):
            if j == i:
                continue
            work = src.copy()
            work[i] -= 1
            if j == m:
                work.append(1)
            else:
                work[j] += 1
            kept = [v for v in work if v > 0]
            ordered = all(kept[t] >= kept[t + 1] for t in range(len(kept) - 1))
            if not ordered:
                cls, cand = "invalid_ordering", None
            elif kept == src:
                cls, cand = "no_op", None
            else:
                cand = Partition(tuple(kept))
                if src[i] == 1:
                    cls = "attach"
                elif j == m:
                    cls = "free_nucleon"
                else:
                    cls = "transfer"
            out.append(MoveProposal(i + 1, j + 1, cls, cand))
    return out


def transition_multiplicity(p: Partition, q: Partition) -> int:
    """How many ordered pairs (i, j) propose exactly q from p.

    Zero when q is not one single-unit move away.  Defined by counting
    over :func:`enumerate_proposals`; the kernels use the closed form
    (the count is cnt_p[1] when the move deletes a size-1 donor, else 1).
    """
    if p.total_mass != q.total_mass:
        raise ValueError(
            f"partitions have different mass: {p.total_mass} != {q.total_mass}"
        )
    return sum(1 for mp in enumerate_proposals(p) if mp.candidate == q)


class ChainState:
    """Mutable Metropolis chain state over partitions of one total mass.

    ``current`` and ``current_log_weight`` always describe the same
    partition; the log weight is maintained incrementally, so one chain
    must keep using the weight model it was created with.
    """

    __slots__ = (
        "a0",
        "kernel",
        "rng",
        "burn_in",
        "thinning",
        "step_count",
        "accepted_count",
        "_parts",
        "_cnt",
        "_logw",
        "_model_cache",
    )

    def __init__(
        self,
        a0: int,
        parts: list[int],
        logw: float,
        kernel: str,
        rng: random.Random,
        burn_in: int,
        thinning: int,
    ) -> None:
        self.a0 = a0
        self.kernel = kernel
        self.rng = rng
        self.burn_in = burn_in
        self.thinning = thinning
        self.step_count = 0
        self.accepted_count = 0
        self._parts = parts
        cnt = [0] * (a0 + 2)
        for a in parts:
            cnt[a] += 1
        self._cnt = cnt
        self._logw = logw
        self._model_cache: tuple | None = None

    @property
    def current(self) -> Partition:
        return Partition(tuple(self._parts))

    @property
    def current_log_weight(self) -> float:
        return self._logw

    def acceptance_rate(self) -> float:
        return self.accepted_count / self.step_count if self.step_count else 0.0


def new_chain(
    a0: int,
    model: WeightModel,
    kernel: str = KERNEL_EXACT_MH,
    seed: int | None = None,
    *,
    seed_partition: Partition | Sequence[int] | None = None,
    burn_in: int = DEFAULT_BURN_IN,
    thinning: int = 1,
) -> ChainState:
    """Fresh chain at ``seed_partition`` (default: the single-part state)."""
    if int(a0) != a0 or a0 < 2:
        raise ValueError(f"a chain needs a0 >= 2, got {a0!r}")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    if burn_in < 0 or thinning < 1:
        raise ValueError(f"bad burn_in={burn_in!r} / thinning={thinning!r}")
    if seed_partition is None:
        start = Partition((a0,))
    elif isinstance(seed_partition, Partition):
        start = seed_partition
    else:
        start = Partition(tuple(seed_partition))
    if start.total_mass != a0:
        raise ValueError(f"seed partition mass {start.total_mass} != a0 {a0}")
    return ChainState(
        a0=int(a0),
        parts=list(start.parts),
        logw=log_weight(model, start),
        kernel=kernel,
        rng=random.Random(seed),
        burn_in=burn_in,
        thinning=thinning,
    )


def _model_tables(state: ChainState, model: WeightModel) -> tuple:
    cache = state._model_cache
    if cache is not None and cache[0] is model:
        return cache
    a0 = state.a0
    log_int = [0.0] * (a0 + 2)
    for v in range(1, a0 + 2):
        log_int[v] = math.log(v)
    if model.uses_coefficients:
        log_c = [model.log_coefficient(s) for s in range(a0 + 2)]
    else:
        log_c = None
    cache = (model, model.uses_factorial, log_c, log_int)
    state._model_cache = cache
    return cache


def _draw_pair(rng: random.Random, m: int) -> tuple[int, int]:
    """Uniform ordered pair: donor position i, target j in {0..m} \\ {i}."""
    i = rng.randrange(m)
    r = rng.randrange(m)
    j = r + 1 if r >= i else r
    return i, j


def _classify_pair(parts: list[int], cnt1: int, i: int, j: int) -> tuple[bool, int, int]:
    """(valid, a, b) for pair (i, j); b = 0 encodes the append slot.

    Validity means the in-place result is a different partition in
    non-increasing order: a donor of size >= 2 must close its run of equal
    parts, an acceptor must open its run, b == a - 1 reproduces the same
    multiset, and two size-1 parts may merge only into the leading size-1
    position that survives the donor's removal.
    """
    m = len(parts)
    a = parts[i]
    if j == m:
        if a == 1:
            return False, a, 0
        if i != m - 1 and parts[i + 1] == a:
            return False, a, 0
        return True, a, 0
    b = parts[j]
    if b == a - 1:
        return False, a, b
    if a == 1:
        if b == 1:
            lo1 = m - cnt1
            ok = (j == lo1 + 1) if i == lo1 else (j == lo1)
            return ok, a, b
        if j > 0 and parts[j - 1] <= b:
            return False, a, b
        return True, a, b
    if i != m - 1 and parts[i + 1] == a:
        return False, a, b
    if j > 0 and parts[j - 1] <= b:
        return False, a, b
    return True, a, b


def _shift_counts(cnt: list[int], a: int, b: int, use_fact: bool,
                  log_c: list[float] | None, log_int: list[float]) -> float:
    """Move cnt from p to its candidate q; return ln W_q - ln W_p."""
    dlw = 0.0
    c = cnt[a]
    cnt[a] = c - 1
    if use_fact:
        dlw += log_int[c]
    if log_c is not None:
        dlw -= log_c[a]
    if a > 1:
        c = cnt[a - 1]
        cnt[a - 1] = c + 1
        if use_fact:
            dlw -= log_int[c + 1]
        if log_c is not None:
            dlw += log_c[a - 1]
    if b > 0:
        c = cnt[b]
        cnt[b] = c - 1
        if use_fact:
            dlw += log_int[c]
        if log_c is not None:
            dlw -= log_c[b]
    c = cnt[b + 1]
    cnt[b + 1] = c + 1
    if use_fact:
        dlw -= log_int[c + 1]
    if log_c is not None:
        dlw += log_c[b + 1]
    return dlw


def _unshift_counts(cnt: list[int], a: int, b: int) -> None:
    cnt[a] += 1
    if a > 1:
        cnt[a - 1] -= 1
    if b > 0:
        cnt[b] += 1
    cnt[b + 1] -= 1


def _apply_to_parts(parts: list[int], i: int, j: int, a: int, b: int) -> None:
    """Commit the accepted move to the stored order."""
    if a == 1:
        parts[j] = b + 1  # b >= 1 here: a size-1 donor cannot feed the append slot
        del parts[i]
        return
    parts[i] = a - 1
    if b == 0:
        parts.append(1)
    else:
        parts[j] = b + 1


def _step_exact_mh(state: ChainState, use_fact: bool,
                   log_c: list[float] | None, log_int: list[float]) -> bool:
    parts = state._parts
    cnt = state._cnt
    rng = state.rng
    m = len(parts)
    i, j = _draw_pair(rng, m)
    ok, a, b = _classify_pair(parts, cnt[1], i, j)
    if not ok:
        return False  # recorded self-transition
    n_pq = cnt[1] if a == 1 else 1
    dlw = _shift_counts(cnt, a, b, use_fact, log_c, log_int)
    n_qp = cnt[1] if b == 0 else 1
    m_q = m + 1 if b == 0 else (m - 1 if a == 1 else m)
    ln_alpha = dlw
    if n_qp != n_pq:
        ln_alpha += log_int[n_qp] - log_int[n_pq]
    if m_q != m:
        ln_alpha += 2.0 * (log_int[m] - log_int[m_q])
    if ln_alpha >= 0.0 or rng.random() < math.exp(ln_alpha):
        _apply_to_parts(parts, i, j, a, b)
        state._logw += dlw
        return True
    _unshift_counts(cnt, a, b)
    return False


def _step_redraw(state: ChainState, use_fact: bool,
                 log_c: list[float] | None, log_int: list[float]) -> bool:
    parts = state._parts
    cnt = state._cnt
    rng = state.rng
    m = len(parts)
    while True:  # every partition of a0 >= 2 has a valid move, so this ends
        i, j = _draw_pair(rng, m)
        ok, a, b = _classify_pair(parts, cnt[1], i, j)
        if ok:
            break
    dlw = _shift_counts(cnt, a, b, use_fact, log_c, log_int)
    if dlw >= 0.0 or rng.random() < math.exp(dlw):
        _apply_to_parts(parts, i, j, a, b)
        state._logw += dlw
        return True
    _unshift_counts(cnt, a, b)
    return False


def step(state: ChainState, model: WeightModel) -> ChainState:
    """Advance the chain one step in place and return it.

    A step is one proposal draw under ``exact-mh`` and one accepted-or-
    rejected candidate under ``redraw``.  ``accepted_count`` counts steps
    that changed the state.
    """
    _, use_fact, log_c, log_int = _model_tables(state, model)
    if state.kernel == KERNEL_EXACT_MH:
        accepted = _step_exact_mh(state, use_fact, log_c, log_int)
    else:
        accepted = _step_redraw(state, use_fact, log_c, log_int)
    state.step_count += 1
    if accepted:
        state.accepted_count += 1
    return state


def run_chain(
    a0: int,
    model: WeightModel,
    kernel: str = KERNEL_EXACT_MH,
    seed: int | None = None,
    burn_in: int = DEFAULT_BURN_IN,
    samples: int = 100_000,
    sink: SummaryStatistics | None = None,
    *,
    thinning: int = 1,
    seed_partition: Partition | Sequence[int] | None = None,
    selectors: Iterable[SpeciesSelector] = DEFAULT_SELECTORS,
    observer: "Callable[[Sequence[int]], None] | None" = None,
    engine: str = "auto",
) -> SummaryStatistics:
    """Burn in, then record ``samples`` states (every ``thinning``-th step).

    Results accumulate into ``sink`` (created fresh when None) with weight
    offset 0: the chain itself realizes the model's weighting.  The state
    is revalidated against the fixed total mass every few thousand records.
    ``observer``, when given, sees each recorded state as a transient part
    sequence (copy to keep).

    ``engine`` picks the stepping loop: ``python`` (this module's
    :func:`step`), ``numba`` (compiled twin, same kernels, its own seeded
    stream), or ``auto`` (compiled once the total step count justifies the
    JIT warm-up; observers and sinks force the Python loop).  Either way
    the draw stream is fully determined by (seed, config).
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    if engine not in ("auto", "python", "numba"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine == "auto":
        total_steps = burn_in + samples * thinning
        fast_ok = observer is None and sink is None
        engine = "numba" if (fast_ok and total_steps >= 3_000_000) else "python"
    if engine == "numba":
        if observer is not None or sink is not None:
            raise ValueError("the numba engine supports neither observer nor sink")
        return _run_chain_numba(
            a0, model, kernel, seed, burn_in, samples, thinning,
            seed_partition, tuple(selectors),
        )
    state = new_chain(
        a0, model, kernel, seed,
        seed_partition=seed_partition, burn_in=burn_in, thinning=thinning,
    )
    if sink is None:
        sink = SummaryStatistics(a0, selectors)
    elif sink.a0 != a0:
        raise ValueError(f"sink a0 {sink.a0} != chain a0 {a0}")
    for _ in range(state.burn_in):
        step(state, model)
    parts = state._parts
    thin = state.thinning
    for k in range(int(samples)):
        for _ in range(thin):
            step(state, model)
        sink._add(parts, 0.0)
        if observer is not None:
            observer(parts)
        if k % 4096 == 0 and sum(parts) != a0:
            raise RuntimeError("chain invariant broken: total mass drifted")
    return sink


def _run_chain_numba(
    a0: int,
    model: WeightModel,
    kernel: str,
    seed: int | None,
    burn_in: int,
    samples: int,
    thinning: int,
    seed_partition: Partition | Sequence[int] | None,
    selectors: tuple[SpeciesSelector, ...],
) -> SummaryStatistics:
    from ._fast import chain_kernel

    # validate args and the start state exactly as the Python loop would
    probe = new_chain(
        a0, model, kernel, 0,
        seed_partition=seed_partition, burn_in=burn_in, thinning=thinning,
    )
    if seed is None:
        seed = random.SystemRandom().getrandbits(63)
    seed32 = ((seed ^ (seed >> 32)) * 0x9E3779B1) & 0xFFFFFFFF

    log_c = np.zeros(a0 + 2, dtype=np.float64)
    if model.uses_coefficients:
        for s in range(1, a0 + 2):
            log_c[s] = model.log_coefficient(s)
    log_int = np.zeros(a0 + 2, dtype=np.float64)
    for v in range(1, a0 + 2):
        log_int[v] = math.log(v)
    sel_kind = np.array([0 if s.kind == "exact" else 1 for s in selectors], dtype=np.int64)
    sel_size = np.array([s.size for s in selectors], dtype=np.int64)
    parts0 = np.array(probe._parts, dtype=np.int64)
    species = np.zeros(a0 + 1, dtype=np.float64)
    mhist = np.zeros(a0 + 1, dtype=np.float64)
    shist = np.zeros((len(selectors), a0 + 1), dtype=np.float64)
    chain_kernel(
        a0, kernel == KERNEL_REDRAW, model.uses_factorial, log_c, log_int,
        seed32, burn_in, int(samples), thinning, sel_kind, sel_size,
        parts0, len(parts0), species, mhist, shist,
    )
    sink = SummaryStatistics(a0, selectors)
    sink.sample_count = int(samples)
    sink._shift = 0.0
    sink._wtotal = float(samples)
    sink._wspecies = species.tolist()
    sink._wmhist = mhist.tolist()
    sink._wshist = [
        shist[k, : a0 // sel.size + 1].tolist() for k, sel in enumerate(selectors)
    ]
    return sink


def memory_loss_diagnostic(
    a0: int,
    model: WeightModel,
    kernel: str = KERNEL_EXACT_MH,
    seeds: tuple[Sequence[int], Sequence[int]] | None = None,
    *,
    seed: int = 0,
    max_steps: int = 1_000_000,
    batches: int = 8,
) -> int:
    """Steps until two chains from extreme starts become indistinguishable.

    Runs one chain from each seed partition (default: the single part and
    the all-ones state) and compares their running mean part counts over
    the trailing half of each history.  Standard errors come from batch
    means inside the window, which keeps them honest under the chain's
    autocorrelation; the estimate is the first step count at which the
    window means agree within twice their combined standard error.
    ``max_steps`` is returned if the chains never merge.

    Step accounting differs by kernel.  The redraw kernel realizes a move
    every step, so its estimate counts actual moves; the exact-mh kernel
    records invalid proposals as self-transitions, which inflates the
    estimate from degenerate seeds (the all-ones state proposes mostly
    invalid pairs).
    """
    if seeds is None:
        seeds = ((a0,), (1,) * a0)
    if len(seeds) != 2:
        raise ValueError("seeds must hold exactly two starting partitions")
    if sorted(seeds[0]) == sorted(seeds[1]):
        return 0  # nothing to forget
    if batches < 2:
        raise ValueError(f"need at least two batches, got {batches!r}")
    base = random.Random(seed)
    chains = [
        new_chain(a0, model, kernel, base.getrandbits(64), seed_partition=sp, burn_in=0)
        for sp in seeds
    ]
    # prefix sums of M per chain; index t covers the first t steps
    s = np.zeros((2, max_steps + 1))
    check_at = max(4 * batches, 64)
    for t in range(1, max_steps + 1):
        for c in (0, 1):
            step(chains[c], model)
            s[c, t] = s[c, t - 1] + len(chains[c]._parts)
        if t < check_at:
            continue
        check_at = max(t + 1, int(t * 1.04))
        w0 = t // 2
        length = (t - w0) // batches  # equal batches, a remainder head is dropped
        lo = t - batches * length
        edges = np.arange(lo, t + 1, length)
        means = []
        var_of_mean = 0.0
        for c in (0, 1):
            bm = np.diff(s[c, edges]) / length
            means.append(float(bm.mean()))
            var_of_mean += float(bm.var(ddof=1)) / batches
        if abs(means[0] - means[1]) <= 2.0 * math.sqrt(var_of_mean):
            return t
    return max_steps
