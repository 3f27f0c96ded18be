"""Object-sequence selection by pruned depth-first concatenation search.

The searcher explores ordered selections of distinct objects, maintaining the
min-plus concatenation of the legs chosen so far. Subtrees are cut with the
classic incumbent bound: the minimum of the partial concatenation plus the
sum of the smallest remaining single-leg matrix minima can only underestimate
any completion, so a prefix whose bound exceeds the current k-th best total
(plus a safety margin) cannot contribute.

Bounds are accumulated by sequential left-fold addition, the same association
order the concatenation chain uses; IEEE rounding is monotone, so the bound
is a true lower bound in floating point and margin-0 pruning is exact.
"""

from __future__ import annotations

import bisect
import math
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dvmatrix import DvMatrix, GridSpec, direct_concat, matrix_min
from .errors import ValidationError


@dataclass(frozen=True)
class SearchConfig:
    """Sequence-search parameters.

    Attributes
    ----------
    n : int
        Number of objects in a sequence, >= 2.
    objects : tuple[str, ...]
        Allowed object ids (the candidate set).
    prune_margin : float
        Slack (m/s) added to the incumbent before pruning; 0 prunes exactly,
        larger values only waste work, never results.
    top_k : int
        Number of best sequences to retain, >= 1.
    """

    n: int
    objects: tuple[str, ...]
    prune_margin: float = 0.0
    top_k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        if self.n < 2:
            raise ValidationError(f"sequence length must be >= 2, got {self.n}")
        if self.prune_margin < 0.0:
            raise ValidationError(f"prune margin must be >= 0, got {self.prune_margin}")
        if self.top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {self.top_k}")
        if len(set(self.objects)) != len(self.objects):
            raise ValidationError("object ids must be distinct")


@dataclass(frozen=True)
class Leg:
    """One transfer of a scheduled sequence (nominal grid semantics: the
    departure epoch and duration include any stay/wait folded into the
    matrices during preprocessing)."""

    from_id: str
    to_id: str
    departure_epoch: float
    duration_days: float
    dv_ms: float


@dataclass(frozen=True)
class SequenceResult:
    """An ordered object sequence with its total delta-V and leg schedule."""

    labels: tuple[str, ...]
    total_dv: float
    legs: tuple[Leg, ...] = ()

    @property
    def departure_epoch(self) -> float | None:
        return self.legs[0].departure_epoch if self.legs else None


class PairTable:
    """Complete (from, to) -> DvMatrix lookup over a candidate set.

    Pairs absent from the user-supplied map are treated as all-infinity so
    sparse databases work; every present matrix must be single-leg, carry
    labels matching its key, and share one grid.
    """

    def __init__(self, matrices, objects):
        self.spec: GridSpec | None = None
        table = {}
        for key, m in matrices.items():
            u, v = key
            if m.leg_count != 1 or m.labels != (u, v):
                raise ValidationError(
                    f"matrix for pair {key} must be single-leg with matching labels, "
                    f"got labels {m.labels}"
                )
            if self.spec is None:
                self.spec = m.spec
            elif m.spec != self.spec:
                raise ValidationError(f"matrices do not share one grid: {m.spec} != {self.spec}")
            table[key] = m
        if self.spec is None:
            raise ValidationError("at least one pair matrix is required")
        self._table = table
        self._infinite_cache: dict[tuple[str, str], DvMatrix] = {}
        self._colmin_cache: dict[tuple[str, str], object] = {}
        self._colmin_stack_cache: dict[str, object] = {}
        self._pair_min_cache: dict[tuple[str, str], float] = {}
        self.objects = tuple(objects)

    def get(self, u: str, v: str) -> DvMatrix:
        m = self._table.get((u, v))
        if m is None:
            m = self._infinite_cache.get((u, v))
            if m is None:
                m = DvMatrix.infinite(self.spec, (u, v))
                self._infinite_cache[(u, v)] = m
        return m

    def colmin(self, u: str, v: str):
        """Cumulative column minima of the pair matrix: colmin[r, c] is the
        smallest entry of column c among rows 1..r+1 (0-based r)."""
        key = (u, v)
        arr = self._colmin_cache.get(key)
        if arr is None:
            arr = np.minimum.accumulate(self.get(u, v).values, axis=0)
            arr.setflags(write=False)
            self._colmin_cache[key] = arr
        return arr

    def colmin_stack(self, u: str):
        """Column-minima arrays for all legs out of ``u``, stacked in object
        order; the diagonal (u -> u) block is all-infinity."""
        stack = self._colmin_stack_cache.get(u)
        if stack is None:
            d, h = self.spec.d, self.spec.h
            blocks = [
                np.full((d, h), np.inf) if v == u else self.colmin(u, v)
                for v in self.objects
            ]
            stack = np.stack(blocks, axis=0)
            stack.setflags(write=False)
            self._colmin_stack_cache[u] = stack
        return stack

    def pair_min(self, u: str, v: str) -> float:
        key = (u, v)
        val = self._pair_min_cache.get(key)
        if val is None:
            val = matrix_min(self.get(u, v))[0]
            self._pair_min_cache[key] = val
        return val

    def pair_minima(self) -> list[float]:
        """Sorted minima of all ordered pairs over the candidate set."""
        mins = [
            self.pair_min(u, v)
            for u in self.objects
            for v in self.objects
            if u != v
        ]
        mins.sort()
        return mins


def _fold_bound(start: float, addends) -> float:
    """Left-fold addition, mirroring the concatenation association order."""
    acc = start
    for x in addends:
        acc += x
    return acc


def _final_leg_min(partial: DvMatrix, leg_colmin: np.ndarray) -> float:
    """matrix_min(partial (+) leg) without forming the concatenation.

    Grouping the minimization as min over (k, j) of
    partial(k, j) + min_i leg(i, j + k) gives the same value bit-for-bit:
    every candidate sum of the full operator appears here and IEEE addition
    is monotone in the leg entry. ``leg_colmin`` is the cumulative column
    minimum of the leg matrix.
    """
    pv = partial.values
    d, h = pv.shape
    best = math.inf
    for k in range(1, min(d - 1, h - 1) + 1):
        cand = pv[k - 1, : h - k] + leg_colmin[d - k - 1, k:]
        m = cand.min() if cand.size else math.inf
        if m < best:
            best = float(m)
    return best


def _final_leg_min_batch(partial: DvMatrix, colmin_stack: np.ndarray) -> np.ndarray:
    """:func:`_final_leg_min` for every final object at once.

    ``colmin_stack`` holds one column-minima block per candidate object;
    returns the per-object minima (identical values to the scalar version,
    computed with the same float operations in batch).
    """
    pv = partial.values
    d, h = pv.shape
    bests = np.full(colmin_stack.shape[0], np.inf)
    for k in range(1, min(d - 1, h - 1) + 1):
        cand = pv[k - 1, None, : h - k] + colmin_stack[:, d - k - 1, k:]
        if cand.shape[1]:
            np.minimum(bests, cand.min(axis=1), out=bests)
    return bests


class _BestList:
    """Thread-safe bounded list of the k best (total, labels) candidates."""

    def __init__(self, k: int):
        self._k = k
        self._entries: list[tuple[float, tuple[str, ...]]] = []
        self._lock = threading.Lock()

    def offer(self, total: float, labels: tuple[str, ...]) -> None:
        entry = (total, labels)
        with self._lock:
            bisect.insort(self._entries, entry)
            if len(self._entries) > self._k:
                self._entries.pop()

    def kth_total(self) -> float:
        with self._lock:
            if len(self._entries) < self._k:
                return math.inf
            return self._entries[-1][0]

    def snapshot(self) -> list[tuple[float, tuple[str, ...]]]:
        with self._lock:
            return list(self._entries)


class _DfsEngine:
    """Depth-first search over object prefixes against a pair-matrix table.

    ``incumbent`` is the pruning reference (the k-th best total seen so far
    by this engine); completed sequences are additionally offered to a
    per-run ``sink`` so parallel drivers can merge exact per-prefix results.
    Pruning against any subset-based incumbent is sound -- the k-th best of a
    subset of sequences can only overestimate the final k-th best -- so the
    merged output never depends on how prefixes are distributed.
    """

    def __init__(self, matrices, cfg: SearchConfig):
        self.table = PairTable(matrices, cfg.objects)
        self.cfg = cfg
        self.sorted_mins = self.table.pair_minima()
        self.incumbent = _BestList(cfg.top_k)

    def _offer(self, total: float, labels: tuple[str, ...], sink: _BestList) -> None:
        self.incumbent.offer(total, labels)
        if sink is not self.incumbent:
            sink.offer(total, labels)

    def _exceeded(self, partial_min: float, legs_remaining: int) -> bool:
        bound = _fold_bound(partial_min, self.sorted_mins[:legs_remaining])
        return bound > self.incumbent.kth_total() + self.cfg.prune_margin

    def run_prefix(self, o1: str, o2: str, sink: _BestList) -> None:
        m = self.table.get(o1, o2)
        pmin = self.table.pair_min(o1, o2)
        if not self._exceeded(pmin, self.cfg.n - 2):
            self._dfs((o1, o2), m, pmin, sink)

    def _dfs(self, prefix, partial: DvMatrix, partial_min: float, sink: _BestList) -> None:
        cfg, table = self.cfg, self.table
        if len(prefix) == cfg.n:
            self._offer(partial_min, prefix, sink)
            return
        if len(prefix) == cfg.n - 1:
            # Final leg: only the minimum of each concatenation is needed.
            totals = _final_leg_min_batch(partial, table.colmin_stack(prefix[-1]))
            for oi, o in enumerate(cfg.objects):
                if o not in prefix:
                    self._offer(float(totals[oi]), prefix + (o,), sink)
            return
        remaining = cfg.n - len(prefix) - 1
        for o in cfg.objects:
            if o in prefix:
                continue
            # Cheap pre-check before paying for the concatenation.
            pre = _fold_bound(partial_min, [table.pair_min(prefix[-1], o)])
            if _fold_bound(pre, self.sorted_mins[:remaining]) > \
                    self.incumbent.kth_total() + cfg.prune_margin:
                continue
            cand = direct_concat(partial, table.get(prefix[-1], o))
            cand_min = matrix_min(cand)[0]
            if self._exceeded(cand_min, remaining):
                continue
            self._dfs(prefix + (o,), cand, cand_min, sink)


# Worker-process state for the parallel driver: one engine per worker,
# initialized once and reused across prefix tasks (fork or spawn safe).
_POOL_ENGINE: _DfsEngine | None = None


def _pool_init(matrices, cfg) -> None:
    global _POOL_ENGINE
    _POOL_ENGINE = _DfsEngine(matrices, cfg)


def _pool_task(pair) -> list[tuple[float, tuple[str, ...]]]:
    sink = _BestList(_POOL_ENGINE.cfg.top_k)
    _POOL_ENGINE.run_prefix(pair[0], pair[1], sink)
    return sink.snapshot()


def dfs_best_sequences(matrices, cfg: SearchConfig, threads: int = 1) -> list[SequenceResult]:
    """Top-k sequences of ``cfg.n`` distinct objects by total delta-V.

    Equivalent to exhaustively ranking all length-n permutations of the
    candidate set by the minimum of their concatenated matrices; the incumbent
    bound never discards a sequence within ``prune_margin`` of the final k-th
    best. Ties rank lexicographically by label sequence. ``threads`` fans the
    first-pair prefixes out over worker processes; output is identical for
    any worker count.
    """
    if len(cfg.objects) < cfg.n:
        raise ValidationError(
            f"candidate set has {len(cfg.objects)} objects, need at least {cfg.n}"
        )
    pairs = [
        (o1, o2)
        for o1 in cfg.objects
        for o2 in cfg.objects
        if o1 != o2
    ]
    best = _BestList(cfg.top_k)
    if threads <= 1:
        engine = _DfsEngine(matrices, cfg)
        for o1, o2 in pairs:
            engine.run_prefix(o1, o2, engine.incumbent)
        best = engine.incumbent
        table = engine.table
    else:
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_pool_init, initargs=(matrices, cfg)
        ) as pool:
            for candidates in pool.map(_pool_task, pairs, chunksize=8):
                for total, labels in candidates:
                    best.offer(total, labels)
        table = PairTable(matrices, cfg.objects)

    return [_build_result(table, labels, total) for total, labels in best.snapshot()]


def _build_result(table: PairTable, labels, expected_total: float | None) -> SequenceResult:
    """Recover the per-leg schedule for a label sequence by backtracking the
    minimizing cell through the concatenation chain (smallest split index on
    ties)."""
    mats = [table.get(labels[t], labels[t + 1]) for t in range(len(labels) - 1)]
    spec = table.spec
    partials = [mats[0]]
    for m in mats[1:]:
        partials.append(direct_concat(partials[-1], m))
    total, i, j = matrix_min(partials[-1])
    if expected_total is not None and not (
        total == expected_total or (math.isinf(total) and math.isinf(expected_total))
    ):
        raise AssertionError(
            f"schedule recovery disagrees with search total: {total} != {expected_total}"
        )
    if math.isinf(total):
        return SequenceResult(labels=tuple(labels), total_dv=math.inf)

    h = spec.h
    legs_rev: list[Leg] = []
    for t in range(len(mats) - 1, 0, -1):
        prev, m = partials[t - 1], mats[t]
        target = partials[t].entry(i, j)
        split = None
        for k in range(1, min(h - j, i - 1) + 1):
            if prev.entry(k, j) + m.entry(i - k, j + k) == target:
                split = k
                break
        if split is None:  # unreachable: the minimizing term always exists
            raise AssertionError(f"no split reproduces entry ({i}, {j}) of {labels}")
        legs_rev.append(
            Leg(
                from_id=labels[t],
                to_id=labels[t + 1],
                departure_epoch=spec.departure_epoch(j + split),
                duration_days=spec.duration(i - split),
                dv_ms=m.entry(i - split, j + split),
            )
        )
        i, j = split, j
    legs_rev.append(
        Leg(
            from_id=labels[0],
            to_id=labels[1],
            departure_epoch=spec.departure_epoch(j),
            duration_days=spec.duration(i),
            dv_ms=mats[0].entry(i, j),
        )
    )
    return SequenceResult(labels=tuple(labels), total_dv=total, legs=tuple(reversed(legs_rev)))


def recover_schedule(matrices, labels) -> SequenceResult:
    """Schedule for one explicit label sequence (public helper)."""
    labels = tuple(labels)
    if len(labels) < 2:
        raise ValidationError("a sequence needs at least two objects")
    table = PairTable(matrices, labels)
    return _build_result(table, labels, None)


def budget_max_objects(
    matrices,
    objects,
    budget: float,
    spec: GridSpec | None = None,
    top_k: int | None = None,
) -> list[SequenceResult]:
    """Longest distinct-object sequences whose concatenated minimum fits a budget.

    Grows sequences by repeated concatenation, cutting any prefix whose matrix
    minimum already exceeds ``budget`` (the minimum can only grow under
    concatenation). A budget exactly equal to a sequence minimum is feasible.
    Growth stops when every extension is over budget, revisits an object, or
    the multi-leg infinity padding has exhausted the grid. Returns all
    maximal-length feasible sequences sorted by (total, labels), truncated to
    ``top_k`` when given; a budget below every single-leg minimum yields the
    length-1 sequences (no legs flown, zero delta-V).
    """
    if not budget > 0.0:
        raise ValidationError(f"budget must be > 0 m/s, got {budget}")
    objects = tuple(objects)
    table = PairTable(matrices, objects)
    if spec is not None and spec != table.spec:
        raise ValidationError(f"grid spec mismatch: {spec} != {table.spec}")

    best_len = 0
    found: list[tuple[float, tuple[str, ...]]] = []

    def visit(labels: tuple[str, ...], total: float) -> None:
        nonlocal best_len, found
        if len(labels) > best_len:
            best_len = len(labels)
            found = []
        if len(labels) == best_len:
            found.append((total, labels))

    def grow(prefix: tuple[str, ...], partial: DvMatrix | None, pmin: float) -> None:
        visit(prefix, pmin)
        for o in objects:
            if o in prefix:
                continue
            leg = table.get(prefix[-1], o)
            cand = leg if partial is None else direct_concat(partial, leg)
            cmin = matrix_min(cand)[0]
            if cmin <= budget:
                grow(prefix + (o,), cand, cmin)

    for o in objects:
        grow((o,), None, 0.0)

    found.sort()
    if top_k is not None:
        found = found[:top_k]
    results = []
    for total, labels in found:
        if len(labels) == 1:
            results.append(SequenceResult(labels=labels, total_dv=0.0))
        else:
            results.append(_build_result(table, labels, total))
    return results


# -- reporting ---------------------------------------------------------------

def format_report(results, title: str = "sequence search") -> str:
    """Human-readable ranked table with per-leg schedules."""
    lines = [title, "=" * len(title), ""]
    if not results:
        lines.append("(no sequences)")
    for rank, res in enumerate(results, start=1):
        seq = " -> ".join(res.labels)
        total = "inf" if math.isinf(res.total_dv) else f"{res.total_dv:.1f}"
        lines.append(f"rank {rank}: {seq}   total {total} m/s")
        for leg in res.legs:
            lines.append(
                f"    {leg.from_id} -> {leg.to_id}: depart {leg.departure_epoch:.1f} MJD2000, "
                f"{leg.duration_days:.1f} days, {leg.dv_ms:.1f} m/s"
            )
    return "\n".join(lines) + "\n"


def results_csv(results) -> str:
    """CSV mirror of the report: one row per leg plus a rank summary row."""
    lines = ["rank,sequence,total_dv_ms,leg,from,to,departure_epoch_mjd2000,duration_days,dv_ms"]
    for rank, res in enumerate(results, start=1):
        seq = ">".join(res.labels)
        total = "inf" if math.isinf(res.total_dv) else repr(res.total_dv)
        if not res.legs:
            lines.append(f"{rank},{seq},{total},,,,,,")
        for li, leg in enumerate(res.legs, start=1):
            lines.append(
                f"{rank},{seq},{total},{li},{leg.from_id},{leg.to_id},"
                f"{leg.departure_epoch!r},{leg.duration_days!r},{leg.dv_ms!r}"
            )
    return "\n".join(lines) + "\n"
