"""Exhaustive ground truth for small instances.

Everything here is brute force with hard size guards: enumeration of
balanced partitions, splittable-tree counts, valid marked sets, and exact
one-step transition matrices for the tree-level and marked-tree chains.
Guards raise instead of truncating, so oracle output is never partial.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chains import (
    MeasureSpec,
    _restricted_context,
    removable_edges,
    target_weight,
)
from .graph import BalanceSpec, Partition, WeightedGraph
from .marking import SamplerConfig, marked_set_prob_work
from .splittability import _components_balanced, _tree_adjacency
from .trees import SpanningTree, _canon, count_spanning_trees

PARTITION_VERTEX_LIMIT = 24
MARKED_EDGE_LIMIT = 25
STATE_LIMIT = 50_000


class OracleGuardError(ValueError):
    """Instance exceeds the brute-force size guard."""


# ---------------------------------------------------------------------------
# Partitions
# ---------------------------------------------------------------------------

def enumerate_partitions(graph: WeightedGraph, spec: BalanceSpec):
    """All partitions into spec.k connected districts with weights in [L, U].

    Districts are grown from the smallest unassigned vertex, which yields
    each unordered partition exactly once.
    """
    if graph.n > PARTITION_VERTEX_LIMIT:
        raise OracleGuardError(
            f"partition enumeration limited to {PARTITION_VERTEX_LIMIT} "
            f"vertices, got {graph.n}"
        )
    k = spec.k
    pop = graph.pop
    total = graph.total_population
    out: list[Partition] = []

    def districts_left_feasible(remaining_weight, remaining_parts):
        return (remaining_parts * spec.lower <= remaining_weight
                <= remaining_parts * spec.upper)

    def place(unassigned: set, districts: list):
        parts_left = k - len(districts)
        if parts_left == 0:
            if not unassigned:
                out.append(Partition.from_district_sets(districts))
            return
        if not unassigned:
            return
        anchor = min(unassigned)
        rest_weight = sum(pop[v] for v in unassigned)
        if not districts_left_feasible(rest_weight, parts_left):
            return

        # Enumerate connected subsets of `unassigned` containing the anchor.
        def grow(current: set, weight, frontier: list, banned: set):
            if spec.contains(weight):
                remaining = unassigned - current
                place(remaining, districts + [sorted(current)])
            for i, v in enumerate(frontier):
                w = weight + pop[v]
                if w > spec.upper:
                    continue
                new_frontier = frontier[i + 1:] + [
                    u for u in graph.adj[v]
                    if u in unassigned and u not in current
                    and u not in banned and u not in frontier
                ]
                grow(current | {v}, w, new_frontier,
                     banned | set(frontier[:i + 1]))

        start_frontier = [u for u in graph.adj[anchor] if u in unassigned]
        grow({anchor}, pop[anchor], start_frontier, {anchor})

    place(set(range(graph.n)), [])
    return out


def count_splittable_trees(graph: WeightedGraph, spec: BalanceSpec) -> int:
    """Number of spanning trees splittable into k exactly-balanced districts.

    Sums tau(forest) * tau(quotient) over all balanced partitions; exact
    balance makes the cut set of each splittable tree unique, so every tree
    is counted exactly once.
    """
    if spec.k == 1:
        return _tau_whole(graph) if spec.contains(graph.total_population) else 0
    if spec.lower != spec.upper:
        raise OracleGuardError("count_splittable_trees requires exact balance (L = U)")
    total = 0
    for part in enumerate_partitions(graph, spec):
        total += _tau_forest(graph, part) * _tau_quotient(graph, part)
    return total


def _tau_whole(graph: WeightedGraph) -> int:
    n = graph.n
    m = [[0] * n for _ in range(n)]
    for a, b in graph.edges:
        m[a][b] += 1
        m[b][a] += 1
    return count_spanning_trees(m)


def _tau_forest(graph: WeightedGraph, part: Partition) -> int:
    from .trees import count_spanning_trees_subgraph

    out = 1
    for members in part.districts():
        out *= count_spanning_trees_subgraph(graph, members)
    return out


def _tau_quotient(graph: WeightedGraph, part: Partition) -> int:
    from .graph import quotient

    return count_spanning_trees(quotient(graph, part).multiplicity)


# ---------------------------------------------------------------------------
# Trees and marked sets
# ---------------------------------------------------------------------------

def enumerate_spanning_trees(graph: WeightedGraph):
    """All spanning trees, by filtering (n-1)-edge subsets; guarded."""
    n, edges = graph.n, graph.edges
    if len(edges) > MARKED_EDGE_LIMIT:
        raise OracleGuardError(
            f"spanning-tree enumeration limited to {MARKED_EDGE_LIMIT} edges"
        )
    out = []
    for subset in itertools.combinations(edges, n - 1):
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            out.append(SpanningTree(graph, subset))
    return out


def enumerate_marked_sets(tree: SpanningTree, spec: BalanceSpec, parts: int):
    """All (parts-1)-subsets of tree edges cutting into valid districts."""
    edges = tree.edges
    if len(edges) > MARKED_EDGE_LIMIT:
        raise OracleGuardError(
            f"marked-set enumeration limited to {MARKED_EDGE_LIMIT} edges"
        )
    adj = _tree_adjacency(tree)
    pop = tree.graph.pop
    out = []
    for cut in itertools.combinations(edges, parts - 1):
        if _components_balanced(adj, pop, set(cut), spec):
            out.append(frozenset(cut))
    return out


def _worktree_marked_sets(wt, spec: BalanceSpec, parts: int):
    """Valid (parts-1)-subsets of a work tree's edges, as label frozensets."""
    nodes, weights, adj_idx = wt.adjacency_lists()
    idx = {v: i for i, v in enumerate(nodes)}
    edge_list = []
    for v, nbrs in wt.adj.items():
        for u, lab in nbrs.items():
            if v < u:
                edge_list.append((idx[v], idx[u], lab))
    out = []
    for cut in itertools.combinations(edge_list, parts - 1):
        cutset = {(a, b) if a < b else (b, a) for a, b, _ in cut}
        if _components_balanced(adj_idx, weights, cutset, spec):
            out.append(frozenset(lab for _, _, lab in cut))
    return out


# ---------------------------------------------------------------------------
# Transition matrices
# ---------------------------------------------------------------------------

@dataclass
class TransitionMatrix:
    """Exact one-step matrix over canonically encoded states."""

    states: list
    index: dict
    rows: list  # list of dicts: column index -> Fraction

    @property
    def n(self) -> int:
        return len(self.states)

    def dense(self) -> np.ndarray:
        mat = np.zeros((self.n, self.n))
        for i, row in enumerate(self.rows):
            for j, p in row.items():
                mat[i, j] = float(p)
        return mat

    def row_sums_exact(self):
        return [sum(row.values(), Fraction(0)) for row in self.rows]

    def is_symmetric(self) -> bool:
        for i, row in enumerate(self.rows):
            for j, p in row.items():
                if i != j and self.rows[j].get(i, Fraction(0)) != p:
                    return False
        return True

    def stationary(self, tol: float = 1e-14, max_iter: int = 200_000) -> np.ndarray:
        mat = self.dense()
        pi = np.full(self.n, 1.0 / self.n)
        for _ in range(max_iter):
            nxt = pi @ mat
            if np.abs(nxt - pi).sum() < tol:
                return nxt / nxt.sum()
            pi = nxt
        return pi / pi.sum()

    def residual(self, pi: np.ndarray) -> float:
        return float(np.abs(pi @ self.dense() - pi).max())

    def communicating_class(self, start: int = 0) -> set:
        seen = {start}
        stack = [start]
        while stack:
            i = stack.pop()
            for j, p in self.rows[i].items():
                if p > 0 and j not in seen:
                    seen.add(j)
                    stack.append(j)
        return seen


def _tree_key(tree: SpanningTree):
    return tuple(sorted(tree.edge_set))


def _marked_key(state):
    return (tuple(sorted(state.tree.edge_set)), tuple(sorted(state.marks)))


def splittable_spanning_trees(graph: WeightedGraph, spec: BalanceSpec):
    from .splittability import tapp_decide

    trees = []
    for t in enumerate_spanning_trees(graph):
        ok, _ = tapp_decide(t, spec, spec.k)
        if ok:
            trees.append(t)
    return trees


def build_transition_matrix(graph: WeightedGraph, spec: BalanceSpec,
                            chain: str = "bud-tree",
                            measure: MeasureSpec | None = None, d: int = 0,
                            config: SamplerConfig | None = None) -> TransitionMatrix:
    """Exact one-step transition matrix for a chain kind.

    bud-tree: states are splittable spanning trees; moves are (edge added,
    removable edge removed), each exactly 1/(|E|-|V|+1) * 1/|removables|.

    bud-marked: states are marked trees; every (added edge, removed edge,
    re-marking) channel is enumerated with exact replay probabilities and
    Metropolis-Hastings acceptance toward `measure`.
    """
    if chain == "bud-tree":
        return _tree_matrix(graph, spec)
    if chain == "bud-marked":
        return _marked_matrix(graph, spec, measure or MeasureSpec(), d,
                              config or SamplerConfig())
    raise ValueError(f"no exact matrix for chain kind {chain!r}")


def _tree_matrix(graph: WeightedGraph, spec: BalanceSpec) -> TransitionMatrix:
    trees = splittable_spanning_trees(graph, spec)
    if len(trees) > STATE_LIMIT:
        raise OracleGuardError(f"state space {len(trees)} exceeds {STATE_LIMIT}")
    index = {_tree_key(t): i for i, t in enumerate(trees)}
    m = len(graph.edges) - (graph.n - 1)
    if m == 0:
        raise OracleGuardError("graph is a tree; the walk has no moves")
    rows = [dict() for _ in trees]
    for i, t in enumerate(trees):
        row = rows[i]
        for e in t.non_tree_edges():
            rem = removable_edges(graph, t, e, spec, spec.k)
            p_each = Fraction(1, m * len(rem))
            for c in rem:
                j = i if c == e else index[_tree_key(t.swap(e, c))]
                row[j] = row.get(j, Fraction(0)) + p_each
    return TransitionMatrix([_tree_key(t) for t in trees], index, rows)


def _marked_matrix(graph: WeightedGraph, spec: BalanceSpec, measure: MeasureSpec,
                   d: int, config: SamplerConfig) -> TransitionMatrix:
    from .marking import MarkedTree

    states: list[MarkedTree] = []
    for t in splittable_spanning_trees(graph, spec):
        for marks in enumerate_marked_sets(t, spec, spec.k):
            states.append(MarkedTree(t, marks))
    if len(states) > STATE_LIMIT:
        raise OracleGuardError(f"state space {len(states)} exceeds {STATE_LIMIT}")
    index = {_marked_key(s): i for i, s in enumerate(states)}
    m = len(graph.edges) - (graph.n - 1)
    if m == 0:
        raise OracleGuardError("graph is a tree; the walk has no moves")
    weights = [target_weight(s, measure) for s in states]

    rows = [dict() for _ in states]
    for i, state in enumerate(states):
        row = rows[i]
        moved = Fraction(0)
        for e in state.tree.non_tree_edges():
            ctx = _restricted_context(state.tree, state.marks, e, d, spec)
            rev_wt = ctx.worktree_minus(e)
            rev_prob = marked_set_prob_work(rev_wt, spec, ctx.parts, config,
                                            sorted(ctx.near_marks))
            p_channel = Fraction(1, m * len(ctx.removable))
            for c in ctx.removable:
                fwd_wt = ctx.worktree_minus(c)
                for near in _worktree_marked_sets(fwd_wt, spec, ctx.parts):
                    fwd_prob = marked_set_prob_work(fwd_wt, spec, ctx.parts,
                                                    config, sorted(near))
                    if fwd_prob == 0:
                        continue
                    new_tree = state.tree if c == e else state.tree.swap(e, c)
                    prop = MarkedTree(new_tree, set(ctx.far_marks) | set(near))
                    j = index[_marked_key(prop)]
                    if j == i:
                        continue  # proposing the current state moves nothing
                    ratio = (Fraction(rev_prob) / fwd_prob) * (weights[j] / weights[i])
                    accept = min(Fraction(1), ratio)
                    p = p_channel * fwd_prob * accept
                    if p:
                        row[j] = row.get(j, Fraction(0)) + p
                        moved += p
        row[i] = row.get(i, Fraction(0)) + (1 - moved)
    return TransitionMatrix([_marked_key(s) for s in states], index, rows)
