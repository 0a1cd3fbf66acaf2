"""Chain drivers: balanced tree steps, restricted marked proposals, targets.

Three chain kinds are exposed:

* ``bud-tree``  — add a uniform non-tree edge, remove a uniform cycle edge
  among those keeping the tree splittable (uniform over splittable trees).
* ``bud-marked`` — the distance-d restricted proposal over marked trees with
  Metropolis-Hastings acceptance toward a configurable target measure.
* ``up-down``  — the unconstrained basis-exchange walk over all spanning
  trees (baseline; ignores balance entirely).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .graph import BalanceSpec, Partition, WeightedGraph, quotient
from .marking import (
    MarkedTree,
    NotSplittableError,
    SamplerConfig,
    WorkTree,
    marked_set_logprob_work,
    marked_set_prob_work,
    select_marked_tree,
    select_marked_tree_work,
)
from .splittability import is_exactly_splittable, tapp_decide, tapp_split
from .trees import (
    SpanningTree,
    TreeError,
    _canon,
    count_spanning_trees,
    count_spanning_trees_subgraph,
    fundamental_cycle,
    tree_diameter,
    up_down_step,
    wilson_uniform_spanning_tree,
)


class ChainError(RuntimeError):
    pass


class InitError(ChainError):
    """Could not produce a valid starting state within the attempt budget."""


# ---------------------------------------------------------------------------
# Target measures
# ---------------------------------------------------------------------------

UNIFORM_SPLITTABLE_TREES = "uniform-splittable"
UNIFORM_FORESTS = "uniform-forest"
UNIFORM_PARTITIONS = "uniform-partition"
CUSTOM = "custom"

MEASURE_KINDS = (UNIFORM_SPLITTABLE_TREES, UNIFORM_FORESTS, UNIFORM_PARTITIONS, CUSTOM)


@dataclass(frozen=True)
class MeasureSpec:
    """Which invariant measure the marked chain should target.

    For CUSTOM, log_pi is a user log-weight over partitions; the marked-tree
    weight divides out the spanning-tree multiplicities so that the partition
    marginal is proportional to exp(log_pi).
    """

    kind: str = UNIFORM_SPLITTABLE_TREES
    log_pi: Optional[Callable[[Partition], float]] = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == CUSTOM and self.log_pi is None:
            raise ValueError("CUSTOM measure requires log_pi")


def _tau_forest(graph: WeightedGraph, partition: Partition, cache=None) -> int:
    """Product over districts of each induced subgraph's spanning-tree count."""
    out = 1
    for members in partition.districts():
        key = ("d", frozenset(members))
        tau = cache.get(key) if cache is not None else None
        if tau is None:
            tau = count_spanning_trees_subgraph(graph, members)
            if cache is not None:
                cache[key] = tau
        out *= tau
    return out


def _tau_quotient(graph: WeightedGraph, partition: Partition, cache=None) -> int:
    key = ("q", partition.canonical_key()) if cache is not None else None
    if cache is not None:
        tau = cache.get(key)
        if tau is not None:
            return tau
    k = partition.k
    m = [[0] * k for _ in range(k)]
    assign = partition.assignment
    for i, j in graph.edges:
        di, dj = assign[i], assign[j]
        if di != dj:
            m[di][dj] += 1
            m[dj][di] += 1
    tau = count_spanning_trees(m)
    if cache is not None:
        cache[key] = tau
    return tau


def target_weight(marked: MarkedTree, measure: MeasureSpec, cache=None) -> Fraction:
    """Unnormalized target weight as an exact rational (CUSTOM unsupported)."""
    if measure.kind == UNIFORM_SPLITTABLE_TREES:
        return Fraction(1)
    graph = marked.tree.graph
    part = marked.partition()
    tau_q = _tau_quotient(graph, part, cache)
    if measure.kind == UNIFORM_FORESTS:
        return Fraction(1, tau_q)
    if measure.kind == UNIFORM_PARTITIONS:
        return Fraction(1, _tau_forest(graph, part, cache) * tau_q)
    raise ValueError("target_weight is not defined for CUSTOM measures")


def log_target(marked: MarkedTree, measure: MeasureSpec, cache=None) -> float:
    """Log of the unnormalized target weight of a marked tree."""
    if measure.kind == UNIFORM_SPLITTABLE_TREES:
        return 0.0
    graph = marked.tree.graph
    part = marked.partition()
    out = -math.log(_tau_quotient(graph, part, cache))
    if measure.kind == UNIFORM_FORESTS:
        return out
    out -= math.log(_tau_forest(graph, part, cache))
    if measure.kind == UNIFORM_PARTITIONS:
        return out
    return out + measure.log_pi(part)


# ---------------------------------------------------------------------------
# Tree-level balanced step
# ---------------------------------------------------------------------------

def _adj_splittable(adjacency, weights, spec: BalanceSpec, parts: int) -> bool:
    total = sum(weights)
    if spec.lower == spec.upper and spec.lower.denominator == 1:
        share = int(spec.lower)
        return total == parts * share and is_exactly_splittable(
            adjacency, weights, share, parts
        )
    return tapp_split(adjacency, weights, spec.lower, spec.upper, parts)


def removable_edges(graph: WeightedGraph, tree: SpanningTree, e, spec: BalanceSpec,
                    parts: int):
    """Cycle edges of T + e whose removal leaves a splittable tree.

    Never empty: removing e itself restores the current tree.
    """
    e = _canon(e)
    cyc = fundamental_cycle(tree, e)
    adj = tree.adjacency()
    adj[e[0]].append(e[1])
    adj[e[1]].append(e[0])
    pop = graph.pop
    out = []
    for c in cyc.edges:
        x, y = c
        adj[x].remove(y)
        adj[y].remove(x)
        if _adj_splittable(adj, pop, spec, parts):
            out.append(c)
        adj[x].append(y)
        adj[y].append(x)
    return out


def bud_step(graph: WeightedGraph, tree: SpanningTree, spec: BalanceSpec,
             parts: int, rng: np.random.Generator) -> SpanningTree:
    """One balanced step: uniform non-tree edge in, uniform removable edge out."""
    nte = tree.non_tree_edges()
    if not nte:
        raise TreeError("graph is a tree: no non-tree edges to add")
    e = nte[rng.integers(len(nte))]
    removable = removable_edges(graph, tree, e, spec, parts)
    c = removable[rng.integers(len(removable))]
    return tree.swap(e, c)


# ---------------------------------------------------------------------------
# Restricted marked proposal
# ---------------------------------------------------------------------------

@dataclass
class RestrictedContext:
    """The distance-d neighborhood construction shared by a forward proposal
    and its reverse: the unicyclic contracted graph H, its edges with host
    labels, the near/far mark split, and the removable cycle edges."""

    added: tuple
    cycle_edges: list
    near_marks: frozenset
    far_marks: frozenset
    parts: int
    node_weights: dict
    node_members: dict
    work_edges: list          # (node_a, node_b, host edge label)
    pre_contracted: frozenset  # host edges absorbed when forming H
    removable: list

    def worktree_minus(self, label) -> WorkTree:
        keys = {v: v for v in self.node_weights}
        edges = [t for t in self.work_edges if t[2] != label]
        wt = WorkTree(self.node_weights, keys, edges, members=self.node_members)
        wt.contracted = set(self.pre_contracted)
        return wt


def _restricted_context(tree: SpanningTree, marks, e, d: int,
                        spec: BalanceSpec) -> RestrictedContext:
    graph = tree.graph
    e = _canon(e)
    cyc = fundamental_cycle(tree, e)
    cyc_set = set(cyc.vertices)

    adj_u = tree.adjacency()
    adj_u[e[0]].append(e[1])
    adj_u[e[1]].append(e[0])

    # Distances to the cycle, measured in the unicyclic graph T + e.
    dist = {v: 0 for v in cyc_set}
    queue = list(cyc_set)
    head = 0
    while head < len(queue):
        v = queue[head]
        head += 1
        for u in adj_u[v]:
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)

    near = frozenset(m for m in marks if dist[m[0]] <= d and dist[m[1]] <= d)
    far = frozenset(marks) - near

    # Component of the cycle once the far marks are deleted.
    members = set(cyc_set)
    stack = list(cyc_set)
    while stack:
        v = stack.pop()
        for u in adj_u[v]:
            if u in members or _canon((v, u)) in far:
                continue
            members.add(u)
            stack.append(u)

    # Re-walk inside the component to get contraction ancestors: every vertex
    # farther than d collapses onto the vertex at distance exactly d on its
    # path back to the cycle.
    rep = {v: v for v in cyc_set}
    dist2 = {v: 0 for v in cyc_set}
    order = list(cyc_set)
    head = 0
    while head < len(order):
        v = order[head]
        head += 1
        for u in adj_u[v]:
            if u in dist2 or u not in members or _canon((v, u)) in far:
                continue
            dist2[u] = dist2[v] + 1
            rep[u] = u if dist2[u] <= d else rep[v]
            order.append(u)

    node_weights: dict = {}
    node_members: dict = {}
    for v in members:
        r = rep[v]
        node_weights[r] = node_weights.get(r, 0) + graph.pop[v]
        node_members.setdefault(r, set()).add(v)

    work_edges = []
    pre_contracted = set()
    seen_pairs = set()
    host_edges = [(a, b) for a, b in tree.edge_set
                  if a in members and b in members and (a, b) not in far]
    host_edges.append(e)
    for a, b in host_edges:
        ra, rb = rep[a], rep[b]
        if ra == rb:
            pre_contracted.add((a, b))
            continue
        pair = (ra, rb) if ra < rb else (rb, ra)
        if pair in seen_pairs:
            raise ChainError("contraction produced a parallel edge")
        seen_pairs.add(pair)
        work_edges.append((ra, rb, (a, b)))

    parts = len(near) + 1
    ctx = RestrictedContext(
        added=e,
        cycle_edges=list(cyc.edges),
        near_marks=near,
        far_marks=far,
        parts=parts,
        node_weights=node_weights,
        node_members=node_members,
        work_edges=work_edges,
        pre_contracted=frozenset(pre_contracted),
        removable=[],
    )
    for c in cyc.edges:
        wt = ctx.worktree_minus(c)
        if wt.splittable(spec, parts):
            ctx.removable.append(c)
    return ctx


@dataclass
class ProposalOutcome:
    proposed: MarkedTree
    added: Optional[tuple]
    removed: Optional[tuple]
    forward_logp: float
    reverse_logp: float
    self_loop: bool = False
    reason: Optional[str] = None
    internal: bool = False
    context: Optional[RestrictedContext] = None


def restricted_bud_propose(graph: WeightedGraph, current: MarkedTree, d: int,
                           config: SamplerConfig, spec: BalanceSpec,
                           rng: np.random.Generator) -> ProposalOutcome:
    """One distance-d restricted proposal from a marked tree.

    Marks farther than d from the step's cycle are frozen; the rest are
    redrawn on the contracted neighborhood.  Failures become self-loops.
    """
    nte = current.tree.non_tree_edges()
    if not nte:
        raise TreeError("graph is a tree: no non-tree edges to add")
    e = nte[rng.integers(len(nte))]
    assign = current.partition().assignment
    internal = assign[e[0]] == assign[e[1]]

    ctx = _restricted_context(current.tree, current.marks, e, d, spec)
    c = ctx.removable[rng.integers(len(ctx.removable))]
    try:
        labels, fwd = select_marked_tree_work(
            ctx.worktree_minus(c), spec, ctx.parts, config, rng
        )
    except NotSplittableError:
        return ProposalOutcome(current, e, c, 0.0, 0.0, self_loop=True,
                               reason="re-marking failed", internal=internal,
                               context=ctx)
    rev = marked_set_logprob_work(
        ctx.worktree_minus(e), spec, ctx.parts, config, sorted(ctx.near_marks)
    )
    if rev is None:
        return ProposalOutcome(current, e, c, 0.0, 0.0, self_loop=True,
                               reason="reverse replay impossible",
                               internal=internal, context=ctx)
    new_tree = current.tree if c == e else current.tree.swap(e, c)
    proposed = MarkedTree(new_tree, set(ctx.far_marks) | set(labels))
    return ProposalOutcome(proposed, e, c, fwd, rev, internal=internal,
                           context=ctx)


def mh_step(state: MarkedTree, measure: MeasureSpec, d: int,
            config: SamplerConfig, spec: BalanceSpec,
            rng: np.random.Generator, cache=None):
    """Metropolis-Hastings step; returns (state, accepted, outcome).

    The uniform edge-addition and edge-removal factors are identical in both
    directions (the forward and reverse neighborhoods coincide), so only the
    marked-set replay ratio and the target ratio enter the acceptance.
    """
    graph = state.tree.graph
    outcome = restricted_bud_propose(graph, state, d, config, spec, rng)
    if outcome.self_loop:
        return state, False, outcome
    log_ratio = (
        outcome.reverse_logp - outcome.forward_logp
        + log_target(outcome.proposed, measure, cache)
        - log_target(state, measure, cache)
    )
    if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
        return outcome.proposed, True, outcome
    return state, False, outcome


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

def _induced_subgraph(graph: WeightedGraph, members):
    ids = [graph.ids[v] for v in sorted(members)]
    mset = set(members)
    verts = [(vid, graph.pop[graph.index(vid)]) for vid in ids]
    edges = [
        (graph.ids[a], graph.ids[b]) for a, b in graph.edges if a in mset and b in mset
    ]
    return WeightedGraph(verts, edges)


def _bisect(graph: WeightedGraph, members, parts: int, spec: BalanceSpec,
            rng: np.random.Generator, budget: int):
    """Recursively split a region into `parts` districts by tree bisection."""
    weight = sum(graph.pop[v] for v in members)
    if parts == 1:
        if not spec.contains(weight):
            raise InitError(f"region weight {weight} not a valid district")
        return [sorted(members)]
    sub = _induced_subgraph(graph, members)
    if not sub.is_connected():
        raise InitError("region is not connected")
    back = [graph.index(vid) for vid in sub.ids]
    for _ in range(budget):
        t = wilson_uniform_spanning_tree(sub, rng)
        w = t.subtree_weights()
        total = sub.total_population
        candidates = []
        for v in range(1, sub.n):
            for m in range(1, parts):
                if (m * spec.lower <= w[v] <= m * spec.upper
                        and (parts - m) * spec.lower <= total - w[v]
                        <= (parts - m) * spec.upper):
                    candidates.append((v, m))
        rng.shuffle(candidates)
        for v, m in candidates:
            side = t.component_of(v, [(v, t.parent[v])])
            rest = set(range(sub.n)) - side
            try:
                return (
                    _bisect(graph, [back[x] for x in side], m, spec, rng, budget)
                    + _bisect(graph, [back[x] for x in rest], parts - m, spec,
                              rng, budget)
                )
            except InitError:
                continue
    raise InitError(f"bisection failed after {budget} tree draws")


def _assemble_marked(graph: WeightedGraph, districts, rng) -> MarkedTree:
    """Spanning trees inside each district plus random crossing edges."""
    edges = set()
    district_of = {}
    for d, members in enumerate(districts):
        for v in members:
            district_of[v] = d
        sub = _induced_subgraph(graph, members)
        t = wilson_uniform_spanning_tree(sub, rng)
        for a, b in t.edge_set:
            edges.add(_canon((graph.index(sub.ids[a]), graph.index(sub.ids[b]))))
    crossing = [e for e in graph.edges if district_of[e[0]] != district_of[e[1]]]
    order = list(rng.permutation(len(crossing)))
    parent = list(range(len(districts)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    marks = []
    for i in order:
        a, b = crossing[i]
        ra, rb = find(district_of[a]), find(district_of[b])
        if ra != rb:
            parent[ra] = rb
            marks.append(crossing[i])
            edges.add(crossing[i])
    tree = SpanningTree(graph, edges)
    return MarkedTree(tree, marks)


def init_state(graph: WeightedGraph, spec: BalanceSpec, rng: np.random.Generator,
               strategy: str = "rejection", config: SamplerConfig | None = None,
               max_attempts: int = 5000) -> MarkedTree:
    """Produce a valid starting marked tree.

    REJECTION: uniform trees until one is splittable, then draw marks.
    BISECTION: recursive tree bisection into valid shares, then reassemble.
    """
    config = config or SamplerConfig()
    k = spec.k
    if k > graph.n:
        raise InitError(f"k={k} exceeds |V|={graph.n}")
    strategy = strategy.lower()
    if strategy == "rejection":
        for _ in range(max_attempts):
            t = wilson_uniform_spanning_tree(graph, rng)
            ok, _ = tapp_decide(t, spec, k)
            if ok:
                marks, _ = select_marked_tree(t, spec, k, config, rng)
                return MarkedTree(t, marks).validate(spec)
        raise InitError(f"no splittable tree found in {max_attempts} draws")
    if strategy == "bisection":
        districts = _bisect(graph, list(range(graph.n)), k, spec, rng,
                            budget=max_attempts)
        return _assemble_marked(graph, districts, rng).validate(spec)
    raise ValueError(f"unknown init strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Chain driver
# ---------------------------------------------------------------------------

CHAIN_KINDS = ("bud-marked", "bud-tree", "up-down")


def _emit(sink, record: dict):
    line = json.dumps(record, separators=(",", ":"))
    if callable(sink):
        sink(record)
    elif hasattr(sink, "write"):
        sink.write(line + "\n")


def run_chain(graph: WeightedGraph, spec: BalanceSpec, measure: MeasureSpec,
              steps: int, record_every: int = 1, d: int = 0,
              config: SamplerConfig | None = None,
              rng: np.random.Generator | None = None, sink=None,
              chain: str = "bud-marked", initial=None, init: str = "rejection",
              include_assignment: bool = False, share_attrs=(),
              max_attempts: int = 5000) -> dict:
    """Drive a chain for `steps` iterations, emitting trace records.

    `sink` may be a callable taking a record dict or a writable text stream
    receiving one JSON line per record.  share_attrs is a sequence of
    (numerator, denominator) attribute-name pairs for vote-share observables.
    """
    from .diagnostics import cut_edges as _cut_edges
    from .diagnostics import isoperimetric_ratios, ranked_shares

    if chain not in CHAIN_KINDS:
        raise ValueError(f"unknown chain kind {chain!r}")
    if steps < 0 or record_every < 1:
        raise ValueError("need steps >= 0 and record_every >= 1")
    config = config or SamplerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    cache: dict = {}

    t0 = time.perf_counter()
    if initial is not None:
        state = initial
    elif chain == "bud-marked":
        state = init_state(graph, spec, rng, strategy=init, config=config,
                           max_attempts=max_attempts)
    elif chain == "bud-tree":
        state = init_state(graph, spec, rng, strategy=init, config=config,
                           max_attempts=max_attempts).tree
    else:
        state = wilson_uniform_spanning_tree(graph, rng)

    accepted = 0
    internal = 0
    recorded = 0
    for step in range(1, steps + 1):
        step_internal = None
        if chain == "bud-marked":
            state, ok, outcome = mh_step(state, measure, d, config, spec, rng,
                                         cache=cache)
            step_internal = bool(outcome.internal)
            accepted += ok
            internal += outcome.internal
        elif chain == "bud-tree":
            new = bud_step(graph, state, spec, spec.k, rng)
            ok = new.edge_set != state.edge_set
            accepted += ok
            state = new
        else:
            new = up_down_step(graph, state, rng)
            ok = new.edge_set != state.edge_set
            accepted += ok
            state = new

        if sink is not None and step % record_every == 0:
            tree = state.tree if chain == "bud-marked" else state
            obs = {"tree_diameter": tree_diameter(tree),
                   "cut_edges": None, "iso": None, "shares": {}}
            record = {"step": step, "kind": chain, "accepted": bool(ok),
                      "internal": step_internal, "obs": obs}
            if chain == "bud-marked":
                part = state.partition()
                obs["cut_edges"] = _cut_edges(graph, part)
                obs["iso"] = [float(r) for r in isoperimetric_ratios(graph, part)]
                obs["shares"] = {
                    num: ranked_shares(part, graph, num, den)
                    for num, den in share_attrs
                }
                if include_assignment:
                    record["assignment"] = {
                        graph.ids[v]: int(dd)
                        for v, dd in sorted(part.assignment.items())
                    }
            _emit(sink, record)
            recorded += 1

    return {
        "chain": chain,
        "measure": measure.kind,
        "steps": steps,
        "recorded": recorded,
        "accepted": accepted,
        "acceptance_rate": accepted / steps if steps else 0.0,
        "internal": internal,
        "internal_fraction": internal / steps if steps and chain == "bud-marked" else None,
        "wall_time": time.perf_counter() - t0,
    }
