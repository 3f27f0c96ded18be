"""Sequence selection as a label-constrained shortest path.

The delta-V matrix set becomes a time-expanded directed acyclic graph: node
(X, j) is object X at departure-column j, an edge (X, a) -> (Y, b) carries the
matrix entry for the transfer departing column a with duration b - a and the
label Y, a start node s fans out to every (X, j) with label X, and every
(X, j) closes to an end node t with the empty label. A sequence automaton
over object labels (exact power-set variant, or a relaxed visit counter)
restricts admissible label strings; searching the synchronized product of
graph and automaton yields the cheapest admissible sequence.

Product states are generated on demand from the matrices; neither the product
nor the +inf (infeasible) edges are ever materialized.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dvmatrix import GridSpec, check_time_adjusted
from .errors import CapacityError, SequenceNotFoundError, ValidationError
from .sequence import Leg, PairTable, SequenceResult

_START = ("s", 0)
_END = ("t", 0)

EPSILON_LABEL = "eps"  # rendering of the empty label on t-edges


class TimeExpandedGraph:
    """Time-expanded object graph backed by a complete pair-matrix table.

    Edges exist only where the underlying matrix entry is finite and the
    arrival index stays on the grid (b <= h); infinite entries are never
    stored or enumerated. Matrices are expected to be wait-adjusted (stay and
    wait handling is baked in during preprocessing; the graph never re-handles
    delays).
    """

    def __init__(self, table: PairTable, objects: tuple[str, ...]):
        self.table = table
        self.objects = objects
        self.spec: GridSpec = table.spec

    # -- node helpers --------------------------------------------------------

    @property
    def start(self):
        return _START

    @property
    def end(self):
        return _END

    def is_body(self, node) -> bool:
        return node is not _START and node is not _END and node[0] not in ("s", "t")

    # -- edge enumeration ----------------------------------------------------

    def successors(self, node):
        """Yield (successor, weight, label) triples; label None is epsilon."""
        if node == _END:
            return
        if node == _START:
            for x in self.objects:
                for j in range(1, self.spec.h + 1):
                    yield (x, j), 0.0, x
            return
        x, a = node
        yield _END, 0.0, None
        h, d = self.spec.h, self.spec.d
        max_i = min(d, h - a)
        if max_i < 1:
            return
        for y in self.objects:
            if y == x:
                continue
            col = self.table.get(x, y).values[:max_i, a - 1]
            for i0 in range(max_i):
                w = col[i0]
                if math.isfinite(w):
                    yield (y, a + i0 + 1), float(w), y

    def edge_weight(self, u, v) -> float:
        """Weight of the edge u -> v (+inf when no such edge exists)."""
        if u == _START:
            return 0.0 if self.is_body(v) else math.inf
        if v == _END:
            return 0.0 if self.is_body(u) else math.inf
        if u == _END or v == _START:
            return math.inf
        x, a = u
        y, b = v
        if x == y or not (1 <= a < b <= self.spec.h) or b - a > self.spec.d:
            return math.inf
        return float(self.table.get(x, y).values[b - a - 1, a - 1])

    def object_edges(self):
        """All finite object-object edges as ((X, a), (Y, b), weight, label)."""
        for x in self.objects:
            for y in self.objects:
                if x == y:
                    continue
                vals = self.table.get(x, y).values
                for a in range(1, self.spec.h + 1):
                    max_i = min(self.spec.d, self.spec.h - a)
                    for i0 in range(max_i):
                        w = vals[i0, a - 1]
                        if math.isfinite(w):
                            yield (x, a), (y, a + i0 + 1), float(w), y

    def object_edge_count(self) -> int:
        count = 0
        d, h = self.spec.d, self.spec.h
        rows = np.arange(1, d + 1)[:, None]
        cols = np.arange(1, h + 1)[None, :]
        in_grid = rows + cols <= h  # arrival index b = i + j stays on the grid
        for x in self.objects:
            for y in self.objects:
                if x != y:
                    count += int(np.count_nonzero(np.isfinite(self.table.get(x, y).values) & in_grid))
        return count


def build_time_expanded_graph(matrices, objects, spec: GridSpec | None = None,
                              require_time_adjusted: bool = False) -> TimeExpandedGraph:
    """Assemble the time-expanded graph over a candidate object set.

    Missing pairs are treated as all-infinity (no edges). The shared grid must
    have ``dur_min == dt_step`` so the duration index b - a is exact. With
    ``require_time_adjusted`` the wait-adjustedness precondition is checked
    instead of trusted.
    """
    objects = tuple(objects)
    table = PairTable(matrices, objects)
    if spec is not None and spec != table.spec:
        raise ValidationError(f"grid spec mismatch: {spec} != {table.spec}")
    if not table.spec.unit_steps:
        raise ValidationError(
            "time-expanded graph requires dur_min == dt_step "
            f"(got dur_min={table.spec.dur_min}, dt_step={table.spec.dt_step})"
        )
    if require_time_adjusted:
        for key, m in matrices.items():
            if not check_time_adjusted(m):
                raise ValidationError(f"matrix for pair {key} is not wait-adjusted")
    return TimeExpandedGraph(table, objects)


# -- sequence automata --------------------------------------------------------

@dataclass(frozen=True)
class SequenceDfa:
    """Deterministic automaton over object labels.

    power-set variant: states are the visited-object subsets of size 0..n
    (the empty set is the start), transitions add one unvisited object,
    finals are the size-n subsets -- length and distinctness both enforced.

    counter variant: states 0..n count visits under a wildcard label, final
    state n -- length only; distinctness is recovered afterwards via
    k-shortest enumeration.
    """

    variant: str
    n: int
    alphabet: tuple[str, ...]
    states: tuple
    start: object
    finals: frozenset

    def __post_init__(self):
        object.__setattr__(self, "_alphabet_set", frozenset(self.alphabet))

    def step(self, state, label):
        """Successor state for one label, or None when not permitted."""
        if self.variant == "counter":
            return state + 1 if state < self.n else None
        if label in state or len(state) == self.n or label not in self._alphabet_set:
            return None
        return state | frozenset((label,))

    def is_final(self, state) -> bool:
        return state in self.finals

    def transitions(self):
        """Yield (state, label, successor) triples (lazy)."""
        if self.variant == "counter":
            for q in range(self.n):
                yield q, "*", q + 1
            return
        for q in self.states:
            if len(q) == self.n:
                continue
            for label in self.alphabet:
                if label not in q:
                    yield q, label, q | frozenset((label,))


def build_sequence_dfa(objects, n: int, variant: str = "power-set",
                       state_cap: int = 250_000) -> SequenceDfa:
    """Build the sequence automaton for visiting ``n`` objects.

    The power-set variant materializes 1 + sum_k C(|S|, k) states and refuses
    (with a :class:`CapacityError` recommending the counter variant) when that
    exceeds ``state_cap``.
    """
    objects = tuple(objects)
    if n < 1:
        raise ValidationError(f"sequence length must be >= 1, got {n}")
    if variant == "counter":
        return SequenceDfa(
            variant="counter",
            n=n,
            alphabet=objects,
            states=tuple(range(n + 1)),
            start=0,
            finals=frozenset((n,)),
        )
    if variant != "power-set":
        raise ValidationError(f"variant must be 'power-set' or 'counter', got {variant!r}")
    if n > len(objects):
        raise ValidationError(f"cannot visit {n} distinct objects out of {len(objects)}")
    count = 1 + sum(math.comb(len(objects), k) for k in range(1, n + 1))
    if count > state_cap:
        raise CapacityError(
            f"power-set automaton needs {count} states (cap {state_cap}); "
            "use the counter variant with k-shortest uniqueness recovery"
        )
    states = [frozenset()]
    for k in range(1, n + 1):
        states.extend(frozenset(c) for c in itertools.combinations(objects, k))
    finals = frozenset(q for q in states if len(q) == n)
    return SequenceDfa(
        variant="power-set",
        n=n,
        alphabet=objects,
        states=tuple(states),
        start=frozenset(),
        finals=finals,
    )


# -- product search ------------------------------------------------------------

def _product_successors(graph: TimeExpandedGraph, dfa: SequenceDfa, pnode):
    node, q = pnode
    if node == _END:
        return
    if node != _START and dfa.is_final(q):
        yield (_END, q), 0.0
    for succ, w, label in graph.successors(node):
        if succ == _END:
            continue  # epsilon handled above, gated on final states
        q2 = dfa.step(q, label)
        if q2 is not None:
            yield (succ, q2), w


def _dijkstra_product(graph, dfa, source_pnode, banned_nodes=frozenset(), banned_edges=frozenset()):
    """Cheapest product path from ``source_pnode`` to the end node.

    Returns (cost, [product nodes]) or None. Expansion order is deterministic,
    so tie costs resolve identically on every run.
    """
    counter = itertools.count()
    dist = {source_pnode: 0.0}
    parent = {source_pnode: None}
    heap = [(0.0, next(counter), source_pnode)]
    done = set()
    while heap:
        cost, _, pnode = heapq.heappop(heap)
        if pnode in done:
            continue
        done.add(pnode)
        if pnode[0] == _END:
            path = []
            cur = pnode
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return cost, path[::-1]
        for succ, w in _product_successors(graph, dfa, pnode):
            if succ in done or succ[0] in banned_nodes or (pnode[0], succ[0]) in banned_edges:
                continue
            new = cost + w
            if new < dist.get(succ, math.inf):
                dist[succ] = new
                parent[succ] = pnode
                heapq.heappush(heap, (new, next(counter), succ))
    return None


def _decode(graph: TimeExpandedGraph, pnodes) -> SequenceResult:
    """Turn a product path into labels, legs, and a cost re-read from matrices."""
    body = [pn[0] for pn in pnodes if graph.is_body(pn[0])]
    labels = tuple(node[0] for node in body)
    legs = []
    total = 0.0
    spec = graph.spec
    for (x, a), (y, b) in zip(body, body[1:]):
        w = graph.edge_weight((x, a), (y, b))
        total += w
        legs.append(
            Leg(
                from_id=x,
                to_id=y,
                departure_epoch=spec.departure_epoch(a),
                duration_days=spec.duration(b - a),
                dv_ms=w,
            )
        )
    return SequenceResult(labels=labels, total_dv=total, legs=tuple(legs))


def shortest_path_product(graph: TimeExpandedGraph, dfa: SequenceDfa) -> SequenceResult:
    """Cheapest object sequence admitted by the automaton.

    Runs Dijkstra on the lazily-expanded product of the time-expanded graph
    and the automaton, from (s, q0) to (t, any final state). Returns an empty
    result with +inf total when no admissible path exists.
    """
    if dfa.variant == "power-set" and not set(dfa.alphabet) <= set(graph.objects):
        raise ValidationError("automaton alphabet is not covered by the graph objects")
    hit = _dijkstra_product(graph, dfa, (_START, dfa.start))
    if hit is None:
        return SequenceResult(labels=(), total_dv=math.inf)
    _, pnodes = hit
    return _decode(graph, pnodes)


def product_paths_nondecreasing(graph: TimeExpandedGraph, dfa: SequenceDfa):
    """Lazily enumerate product paths in nondecreasing cost order (Yen deviations).

    Yields (cost, [product nodes]); each next path is computed only when
    requested. The product graph is acyclic, so every path is simple and the
    classic shortest-path-tree deviation scheme applies directly.
    """
    source = (_START, dfa.start)
    first = _dijkstra_product(graph, dfa, source)
    if first is None:
        return
    accepted = [first]
    yield first
    candidates: list[tuple[float, int, list]] = []
    seen = {tuple(first[1])}
    counter = itertools.count()
    while True:
        _, prev_path = accepted[-1]
        for i in range(len(prev_path) - 1):
            spur = prev_path[i]
            root = prev_path[: i + 1]
            banned_edges = set()
            for _, path in accepted:
                if len(path) > i and path[: i + 1] == root:
                    banned_edges.add((path[i][0], path[i + 1][0]))
            banned_nodes = frozenset(pn[0] for pn in root[:-1])
            spur_hit = _dijkstra_product(graph, dfa, spur, banned_nodes, banned_edges)
            if spur_hit is None:
                continue
            spur_cost, spur_path = spur_hit
            root_cost = sum(
                graph.edge_weight(u[0], v[0]) for u, v in zip(root, root[1:])
            )
            total = root_cost + spur_cost
            full = root[:-1] + spur_path
            key = tuple(full)
            if key not in seen:
                seen.add(key)
                heapq.heappush(candidates, (total, next(counter), full))
        if not candidates:
            return
        cost, _, path = heapq.heappop(candidates)
        accepted.append((cost, path))
        yield cost, path


def k_shortest_unique(graph: TimeExpandedGraph, dfa: SequenceDfa, max_k: int) -> SequenceResult:
    """First path (by cost) of the counter automaton whose objects are distinct.

    Enumerates product paths lazily in nondecreasing cost and returns the
    first with distinct object labels. Raises
    :class:`SequenceNotFoundError` -- carrying the cheapest repeated-label
    result for diagnostics -- when ``max_k`` paths are exhausted first.
    """
    if dfa.variant != "counter":
        raise ValidationError("uniqueness recovery expects the counter automaton")
    if max_k < 1:
        raise ValidationError(f"max_k must be >= 1, got {max_k}")
    best_repeated: SequenceResult | None = None
    for pulled, (cost, path) in enumerate(product_paths_nondecreasing(graph, dfa), start=1):
        result = _decode(graph, path)
        if len(set(result.labels)) == len(result.labels):
            return result
        if best_repeated is None:
            best_repeated = result
        if pulled >= max_k:
            break
    raise SequenceNotFoundError(
        f"no distinct-object sequence within the first {max_k} paths",
        best_path=best_repeated,
    )


# -- export --------------------------------------------------------------------

def export_edge_list(graph: TimeExpandedGraph, include_terminals: bool = True) -> str:
    """Plain text edge list: ``<from> <to> <weight> <label>`` per line.

    Body nodes render as ``X@j``; the start/end nodes as ``s``/``t`` and the
    empty label as ``eps``. Infinite edges are omitted.
    """
    def name(node):
        return node[0] if node in (_START, _END) else f"{node[0]}@{node[1]}"

    lines = []
    if include_terminals:
        for x in graph.objects:
            for j in range(1, graph.spec.h + 1):
                lines.append(f"s {x}@{j} 0.0 {x}")
    for u, v, w, label in graph.object_edges():
        lines.append(f"{name(u)} {name(v)} {w!r} {label}")
    if include_terminals:
        for x in graph.objects:
            for j in range(1, graph.spec.h + 1):
                lines.append(f"{x}@{j} t 0.0 {EPSILON_LABEL}")
    return "\n".join(lines) + "\n"
