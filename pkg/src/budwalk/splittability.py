"""Deciding whether a weighted tree splits into balanced connected parts.

Exact balance reduces to a single greedy leaf-to-root pass with integer
arithmetic.  Approximate balance runs an interval dynamic program over
"surplus" sets compressed by gap-closure, with all endpoint arithmetic kept
exact (ints / Fractions) so boundary comparisons near the upper crop limit
are never corrupted by rounding.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .graph import BalanceSpec
from .trees import SpanningTree, _canon


# ---------------------------------------------------------------------------
# Interval sets
# ---------------------------------------------------------------------------

class IntervalSet:
    """Disjoint, sorted union of closed intervals with exact endpoints."""

    __slots__ = ("intervals",)

    def __init__(self, intervals=(), _normalized=False):
        if _normalized:
            self.intervals = tuple(intervals)
            return
        ivs = sorted((a, b) for a, b in intervals if a <= b)
        merged: list[tuple] = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        self.intervals = tuple(merged)

    @classmethod
    def point(cls, x) -> "IntervalSet":
        return cls(((x, x),), _normalized=True)

    @classmethod
    def from_points(cls, points) -> "IntervalSet":
        return cls((p, p) for p in points)

    @property
    def empty(self) -> bool:
        return not self.intervals

    def __bool__(self):
        return bool(self.intervals)

    def __eq__(self, other):
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __contains__(self, x) -> bool:
        for a, b in self.intervals:
            if a <= x <= b:
                return True
            if a > x:
                break
        return False

    def union(self, other: "IntervalSet") -> "IntervalSet":
        if self.empty:
            return other
        if other.empty:
            return self
        return IntervalSet(self.intervals + other.intervals)

    def intersects(self, lo, hi) -> bool:
        for a, b in self.intervals:
            if b >= lo and a <= hi:
                return True
            if a > hi:
                break
        return False

    def min(self):
        return self.intervals[0][0]

    def __repr__(self):
        return "IntervalSet(%s)" % ", ".join(f"[{a}, {b}]" for a, b in self.intervals)


EMPTY = IntervalSet()


def gap_closure(s: IntervalSet, gap) -> IntervalSet:
    """Merge consecutive components whose gap is at most `gap`; idempotent."""
    if gap < 0:
        raise ValueError("gap must be >= 0")
    if len(s.intervals) <= 1:
        return s
    merged = [s.intervals[0]]
    for a, b in s.intervals[1:]:
        pa, pb = merged[-1]
        if a - pb <= gap:
            merged[-1] = (pa, b if b > pb else pb)
        else:
            merged.append((a, b))
    return IntervalSet(merged, _normalized=True)


def minkowski_sum(a: IntervalSet, b: IntervalSet) -> IntervalSet:
    if a.empty or b.empty:
        return EMPTY
    return IntervalSet(
        (x1 + x2, y1 + y2) for x1, y1 in a.intervals for x2, y2 in b.intervals
    )


def crop(a: IntervalSet, limit) -> IntervalSet:
    """Intersection with (-inf, limit]."""
    out = []
    for lo, hi in a.intervals:
        if lo > limit:
            break
        out.append((lo, hi if hi <= limit else limit))
    return IntervalSet(out, _normalized=True)


# ---------------------------------------------------------------------------
# Exact balance: the unique split
# ---------------------------------------------------------------------------

def unique_exact_split(tree: SpanningTree, k: int):
    """The unique set of k-1 cut edges giving k equal-weight parts, or None.

    Greedy leaf-to-root: cut every edge whose residual subtree weight hits
    the exact share; this is maximal, and exact splits are unique.
    """
    graph = tree.graph
    total = graph.total_population
    if k < 1:
        return None
    if k == 1:
        return frozenset()
    if total % k != 0:
        return None
    share = total // k
    if share == 0:
        return None
    residual = list(graph.pop)
    cuts = []
    parent = tree.parent
    for v in reversed(tree.bfs_order()):
        w = residual[v]
        if w > share:
            return None
        p = parent[v]
        if w == share:
            if p >= 0:
                cuts.append(_canon((v, p)))
            continue
        if p >= 0:
            residual[p] += w
        elif w != 0:
            return None  # leftover weight at the root
    if len(cuts) != k - 1:
        return None
    return frozenset(cuts)


def is_exactly_splittable(adjacency, weights, share: int, parts: int, root: int = 0) -> bool:
    """Greedy exact-split check on an adjacency-list tree (sampler fast lane)."""
    n = len(weights)
    order = [root]
    parent = [-1] * n
    seen = [False] * n
    seen[root] = True
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for u in adjacency[v]:
            if not seen[u]:
                seen[u] = True
                parent[u] = v
                order.append(u)
    residual = list(weights)
    cuts = 0
    for v in reversed(order):
        w = residual[v]
        if w > share:
            return False
        if w == share:
            cuts += 1
            continue
        p = parent[v]
        if p >= 0:
            residual[p] += w
        elif w != 0:
            return False
    return cuts == parts


# ---------------------------------------------------------------------------
# Approximate balance: the surplus-interval DP
# ---------------------------------------------------------------------------

@dataclass
class SurplusTable:
    """Per-vertex surplus interval sets produced by the DP.

    mode "general": tables[v] is a list indexed by completed-district count.
    mode "fast": tables[v] is a single union-over-counts IntervalSet.
    """

    mode: str
    tables: dict
    splittable: bool


def _rooted(adjacency, root):
    n = len(adjacency)
    order = [root]
    children = [[] for _ in range(n)]
    seen = [False] * n
    seen[root] = True
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for u in adjacency[v]:
            if not seen[u]:
                seen[u] = True
                children[v].append(u)
                order.append(u)
    if len(order) != n:
        raise ValueError("adjacency does not describe a connected tree")
    return order, children


def _feasible_counts(total, lower, upper, limit):
    """All m with m*lower <= total <= m*upper, capped at limit."""
    out = []
    m = 1
    while m * lower <= total and m <= limit:
        if total <= m * upper:
            out.append(m)
        m += 1
    return out


def tapp_split(adjacency, weights, lower, upper, parts, root=0, method="auto",
               want_table=False):
    """Does the tree admit a partition into `parts` connected pieces, each
    with weight in [lower, upper]?

    method: "auto" picks the single-table variant when `parts` is the only
    feasible piece count for the total weight, else runs the count-indexed
    general DP; "general"/"fast" force a variant.
    """
    n = len(weights)
    if parts < 1:
        raise ValueError("parts must be >= 1")
    # Integer bounds keep the whole DP in fast int arithmetic.
    if isinstance(lower, Fraction) and lower.denominator == 1:
        lower = int(lower)
    if isinstance(upper, Fraction) and upper.denominator == 1:
        upper = int(upper)
    total = sum(weights)
    if parts > n or not (parts * lower <= total <= parts * upper):
        result = (False, SurplusTable("general", {}, False))
        return result if want_table else False
    if parts == 1:
        ok = lower <= total <= upper
        result = (ok, SurplusTable("general", {}, ok))
        return result if want_table else ok

    if method == "auto":
        method = "fast" if _feasible_counts(total, lower, upper, n) == [parts] else "general"

    order, children = _rooted(adjacency, root)
    gap = upper - lower

    if method == "fast":
        table: dict = {}
        decision = False
        for v in reversed(order):
            acc = IntervalSet.point(weights[v])
            for u in children[v]:
                acc = gap_closure(crop(minkowski_sum(acc, table[u]), upper), gap)
            closes = acc.intersects(lower, upper)
            if v == root:
                decision = closes
            f = acc.union(IntervalSet.point(0)) if closes else acc
            table[v] = gap_closure(crop(f, upper), gap)
        result = (decision, SurplusTable("fast", table, decision))
        return result if want_table else decision

    # General path: surplus sets indexed by number of completed districts.
    table = {}
    decision = False
    for v in reversed(order):
        acc = [EMPTY] * parts
        acc[0] = crop(IntervalSet.point(weights[v]), upper)
        for u in children[v]:
            child = table[u]
            new = [EMPTY] * parts
            for a in range(parts):
                if acc[a].empty:
                    continue
                for b in range(parts - a):
                    if child[b].empty:
                        continue
                    new[a + b] = new[a + b].union(minkowski_sum(acc[a], child[b]))
            acc = [gap_closure(crop(s, upper), gap) for s in new]
        if v == root:
            decision = acc[parts - 1].intersects(lower, upper)
        f = []
        for level in range(parts):
            s = acc[level]
            if level >= 1 and acc[level - 1].intersects(lower, upper):
                s = s.union(IntervalSet.point(0))
            f.append(gap_closure(crop(s, upper), gap))
        table[v] = f
    result = (decision, SurplusTable("general", table, decision))
    return result if want_table else decision


def tapp_decide(tree: SpanningTree, spec: BalanceSpec, parts: int,
                method="auto") -> tuple[bool, SurplusTable]:
    """Splittability of a spanning tree under the spec's [lower, upper]."""
    graph = tree.graph
    if spec.lower == spec.upper:
        # Exact balance short-circuit; the DP agrees but the greedy pass is
        # much cheaper and this dominates chain runtime at epsilon = 0.
        share = spec.lower
        ok = (
            share.denominator == 1
            and graph.total_population == parts * int(share)
            and is_exactly_splittable(
                _tree_adjacency(tree), graph.pop, int(share), parts
            )
        )
        return ok, SurplusTable("exact", {}, ok)
    ok, table = tapp_split(
        _tree_adjacency(tree), graph.pop, spec.lower, spec.upper, parts,
        method=method, want_table=True,
    )
    return ok, table


def _tree_adjacency(tree: SpanningTree):
    adj = [[] for _ in range(tree.graph.n)]
    for a, b in tree.edge_set:
        adj[a].append(b)
        adj[b].append(a)
    return adj


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

ORACLE_EDGE_LIMIT = 25


def tapp_oracle(tree: SpanningTree, spec: BalanceSpec, parts: int) -> bool:
    """Ground truth by exhaustive enumeration of cut-edge subsets."""
    edges = tree.edges
    if len(edges) > ORACLE_EDGE_LIMIT:
        raise ValueError(f"oracle limited to {ORACLE_EDGE_LIMIT} edges, got {len(edges)}")
    graph = tree.graph
    if parts == 1:
        return spec.contains(graph.total_population)
    if parts > graph.n:
        return False
    adj = _tree_adjacency(tree)
    for cut in itertools.combinations(edges, parts - 1):
        cutset = set(cut)
        if _components_balanced(adj, graph.pop, cutset, spec):
            return True
    return False


def _components_balanced(adj, pop, cutset, spec) -> bool:
    n = len(pop)
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        weight = pop[s]
        stack = [s]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                e = (v, u) if v < u else (u, v)
                if e in cutset or seen[u]:
                    continue
                seen[u] = True
                weight += pop[u]
                stack.append(u)
        if not spec.contains(weight):
            return False
    return True
