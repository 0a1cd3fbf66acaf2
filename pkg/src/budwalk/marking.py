"""Randomized selection of marked split edges with replayable probabilities.

The sampler walks a contracted "work tree" whose nodes are supernodes of
host vertices.  Every work edge keeps the identity of the host-tree edge it
descends from, so chosen marks are reported in host coordinates.  Given the
output set, every random choice the sampler made is forced, which is what
makes the selection probability of a marked set exactly recomputable by
deterministic replay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import BalanceSpec, Partition
from .splittability import tapp_split
from .trees import SpanningTree, _canon


class NotSplittableError(ValueError):
    pass


class GapHypothesisError(ValueError):
    """The viable-edge containment bound (2*lower > upper) does not hold."""


@dataclass(frozen=True)
class SamplerConfig:
    """Branch-contraction probability; the vertex ordering is always the
    canonical dense order (supernodes sort by the minimum index they hold)."""

    p: Fraction = Fraction(1, 4)

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        if not 0 < self.p < 1:
            raise ValueError("contraction probability must be in (0, 1)")


class MarkedTree:
    """A splittable spanning tree with its k-1 marked split edges."""

    __slots__ = ("tree", "marks", "_districts", "_weights")

    def __init__(self, tree: SpanningTree, marks):
        self.tree = tree
        self.marks = frozenset(_canon(e) for e in marks)
        for e in self.marks:
            if e not in tree.edge_set:
                raise ValueError(f"marked edge {e} not in tree")
        self._districts = None
        self._weights = None

    @property
    def k(self) -> int:
        return len(self.marks) + 1

    def partition(self) -> Partition:
        if self._districts is None:
            self._compute()
        return self._districts

    def district_weights(self) -> list[int]:
        if self._weights is None:
            self._compute()
        return self._weights

    def _compute(self):
        tree = self.tree
        graph = tree.graph
        assigned = {}
        districts = []
        for v in range(graph.n):
            if v in assigned:
                continue
            comp = tree.component_of(v, self.marks)
            d = len(districts)
            for u in comp:
                assigned[u] = d
            districts.append(sorted(comp))
        part = Partition(assigned, len(districts))
        self._districts = part
        self._weights = part.district_populations(graph)

    def validate(self, spec: BalanceSpec) -> "MarkedTree":
        if self.k != spec.k:
            raise ValueError(f"{len(self.marks)} marks but spec.k = {spec.k}")
        for w in self.district_weights():
            if not spec.contains(w):
                raise ValueError(f"district weight {w} outside [{spec.lower}, {spec.upper}]")
        return self

    def key(self):
        return (self.tree.edge_set, self.marks)

    def __eq__(self, other):
        return isinstance(other, MarkedTree) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


# ---------------------------------------------------------------------------
# Work trees
# ---------------------------------------------------------------------------

class WorkTree:
    """Mutable contracted tree over supernodes, with host-edge labels."""

    def __init__(self, weights: dict, keys: dict, edges, members=None):
        self.weight = dict(weights)
        self.key = dict(keys)
        self.adj: dict = {v: {} for v in self.weight}
        self.label: dict = {}
        for a, b, lab in edges:
            self.adj[a][b] = lab
            self.adj[b][a] = lab
        if members is not None:
            self.members = {v: set(ms) for v, ms in members.items()}
        else:
            self.members = {v: {v} for v in self.weight}
        self.contracted: set = set()

    @classmethod
    def from_tree(cls, tree: SpanningTree) -> "WorkTree":
        graph = tree.graph
        weights = {v: graph.pop[v] for v in range(graph.n)}
        keys = {v: v for v in range(graph.n)}
        edges = [(a, b, (a, b)) for a, b in tree.edge_set]
        return cls(weights, keys, edges)

    def copy(self) -> "WorkTree":
        wt = WorkTree.__new__(WorkTree)
        wt.weight = dict(self.weight)
        wt.key = dict(self.key)
        wt.adj = {v: dict(nbrs) for v, nbrs in self.adj.items()}
        wt.members = {v: set(ms) for v, ms in self.members.items()}
        wt.contracted = set(self.contracted)
        return wt

    @property
    def n(self) -> int:
        return len(self.weight)

    def total_weight(self):
        return sum(self.weight.values())

    def degree(self, v) -> int:
        return len(self.adj[v])

    def max_degree(self) -> int:
        return max((len(nbrs) for nbrs in self.adj.values()), default=0)

    def leaves(self) -> list:
        return [v for v, nbrs in self.adj.items() if len(nbrs) == 1]

    def merge(self, a, b):
        """Contract the work edge (a, b): fold a into b."""
        lab = self.adj[a].pop(b)
        self.adj[b].pop(a)
        self.contracted.add(lab)
        for u, ulab in self.adj[a].items():
            self.adj[u].pop(a)
            self.adj[u][b] = ulab
            self.adj[b][u] = ulab
        self.weight[b] += self.weight[a]
        if self.key[a] < self.key[b]:
            self.key[b] = self.key[a]
        self.members[b] |= self.members[a]
        del self.adj[a], self.weight[a], self.key[a], self.members[a]

    def remove_nodes(self, nodes):
        for v in nodes:
            for u in list(self.adj[v]):
                self.adj[u].pop(v)
            del self.adj[v], self.weight[v], self.key[v], self.members[v]

    def state_sig(self):
        verts = frozenset().union(*self.members.values()) if self.members else frozenset()
        return (verts, frozenset(self.contracted))

    def adjacency_lists(self):
        """(nodes, weights, adjacency) in a dense indexing for the DP."""
        nodes = sorted(self.adj, key=lambda v: self.key[v])
        idx = {v: i for i, v in enumerate(nodes)}
        weights = [self.weight[v] for v in nodes]
        adj = [[] for _ in nodes]
        for v, nbrs in self.adj.items():
            for u in nbrs:
                adj[idx[v]].append(idx[u])
        return nodes, weights, adj

    def splittable(self, spec: BalanceSpec, parts: int, cache=None) -> bool:
        if cache is not None:
            sig = (self.state_sig(), parts)
            hit = cache.get(sig)
            if hit is not None:
                return hit
        _, weights, adj = self.adjacency_lists()
        ok = tapp_split(adj, weights, spec.lower, spec.upper, parts) if weights else False
        if cache is not None:
            cache[sig] = ok
        return ok


def worktree_sigma_min(wt: WorkTree):
    return min(wt.key.values())


# ---------------------------------------------------------------------------
# Branch / viable-edge primitives
# ---------------------------------------------------------------------------

def branch_path(wt: WorkTree, leaf):
    """Nodes from `leaf` to the nearest degree >= 3 node inclusive; the whole
    tree (as a path) when the maximum degree is < 3."""
    if wt.degree(leaf) != 1:
        raise ValueError(f"{leaf} is not a leaf")
    path = [leaf]
    prev = None
    v = leaf
    while True:
        if wt.degree(v) >= 3:
            break
        nxt = [u for u in wt.adj[v] if u != prev]
        if not nxt:
            break  # reached the far end of a path tree
        prev, v = v, nxt[0]
        path.append(v)
    return path


def viable_edges(wt: WorkTree, leaf, spec: BalanceSpec, parts: int, cache=None):
    """Edges along the branch whose cut detaches a valid district containing
    the leaf and leaves a (parts-1)-splittable remainder.

    Returns a list of (node_near, node_far, label, cut_index) along the path.
    """
    path = branch_path(wt, leaf)
    out = []
    weight_v = 0
    for i in range(len(path) - 1):
        weight_v += wt.weight[path[i]]
        if weight_v > spec.upper:
            break
        if weight_v < spec.lower:
            continue
        a, b = path[i], path[i + 1]
        if _remainder_splittable(wt, path[: i + 1], spec, parts - 1, cache):
            out.append((a, b, wt.adj[a][b], i))
    return out


def _remainder_splittable(wt: WorkTree, removed, spec, parts, cache):
    if parts == 0:
        return len(removed) == wt.n
    removed_set = set(removed)
    if cache is not None:
        verts = frozenset().union(*(wt.members[v] for v in wt.adj if v not in removed_set))
        sig = ((verts, frozenset(wt.contracted)), parts)
        hit = cache.get(sig)
        if hit is not None:
            return hit
    nodes = [v for v in wt.adj if v not in removed_set]
    if not nodes:
        ok = False
    else:
        idx = {v: i for i, v in enumerate(nodes)}
        weights = [wt.weight[v] for v in nodes]
        adj = [[] for _ in nodes]
        for v in nodes:
            for u in wt.adj[v]:
                if u not in removed_set:
                    adj[idx[v]].append(idx[u])
        ok = tapp_split(adj, weights, spec.lower, spec.upper, parts)
    if cache is not None:
        cache[sig] = ok
    return ok


def _contracted_splittable(wt: WorkTree, path, spec, parts, cache):
    trial = wt.copy()
    _contract_branch(trial, path)
    return trial, trial.splittable(spec, parts, cache)


# ---------------------------------------------------------------------------
# The sampler engine (shared by random draw and deterministic replay)
# ---------------------------------------------------------------------------

def _contract_branch(wt: WorkTree, path):
    for i in range(len(path) - 1):
        wt.merge(path[i], path[i + 1])
    return path[-1]


def _engine(wt: WorkTree, spec: BalanceSpec, parts: int, config: SamplerConfig,
            rng=None, target=None, cache=None):
    """Run SelectMarkedTree.  With rng: random draw.  With target: replay.

    Returns (marks, probability Fraction) or None when replay hits a
    contradiction.
    """
    replay = target is not None
    remaining = set(target) if replay else None
    marks = []
    prob = Fraction(1)

    while True:
        if parts == 1:
            if replay and remaining:
                return None
            if replay and not spec.contains(wt.total_weight()):
                return None
            return marks, prob

        # Contract leaves lighter than the lower bound into their neighbor.
        changed = True
        while changed:
            changed = False
            for v in wt.leaves():
                w = wt.weight[v]
                if w < spec.lower:
                    (nbr, lab), = wt.adj[v].items()
                    if replay and lab in remaining:
                        return None
                    wt.merge(v, nbr)
                    changed = True
                elif w > spec.upper:
                    if replay:
                        return None
                    raise NotSplittableError(f"leaf weight {w} exceeds upper bound")
        if wt.n == 1:
            if replay:
                return None
            raise NotSplittableError("tree collapsed before all districts were cut")

        leaf = min(wt.leaves(), key=lambda v: wt.key[v])
        path = branch_path(wt, leaf)
        path_labels = [wt.adj[path[i]][path[i + 1]] for i in range(len(path) - 1)]

        contract_ok = False
        if wt.max_degree() >= 3:
            trial, ok = _contracted_splittable(wt, path, spec, parts, cache)
            contract_ok = ok
        else:
            trial = None

        vv = viable_edges(wt, leaf, spec, parts, cache)

        if replay:
            in_branch = [lab for lab in path_labels if lab in remaining]
            if not in_branch:
                if not contract_ok:
                    return None
                prob *= Fraction(1) if not vv else config.p
                _contract_branch(wt, path)
                continue
            chosen_label = in_branch[0]  # nearest to the leaf along the path
            match = [t for t in vv if t[2] == chosen_label]
            if not match:
                return None
            a, b, lab, cut_index = match[0]
            if contract_ok:
                prob *= (1 - config.p) * Fraction(1, len(vv))
            else:
                prob *= Fraction(1, len(vv))
            detached = path[: cut_index + 1]
            for i in range(cut_index):
                if path_labels[i] in remaining:
                    return None  # a target edge vanishes inside the district
            remaining.discard(lab)
            marks.append(lab)
            wt.remove_nodes(detached)
            parts -= 1
            continue

        # Random draw.
        if contract_ok and (not vv or rng.random() < float(config.p)):
            prob *= Fraction(1) if not vv else config.p
            _contract_branch(wt, path)
            continue
        if not vv:
            raise NotSplittableError("no viable edge and contraction unavailable")
        choice = int(rng.integers(len(vv)))
        a, b, lab, cut_index = vv[choice]
        if contract_ok:
            prob *= (1 - config.p) * Fraction(1, len(vv))
        else:
            prob *= Fraction(1, len(vv))
        marks.append(lab)
        wt.remove_nodes(path[: cut_index + 1])
        parts -= 1


def _require_gap_hypothesis(spec: BalanceSpec):
    if not 2 * spec.lower > spec.upper:
        raise GapHypothesisError(
            f"need 2*lower > upper for branch containment; got "
            f"[{spec.lower}, {spec.upper}]"
        )


def select_marked_tree_work(wt: WorkTree, spec: BalanceSpec, parts: int,
                            config: SamplerConfig, rng: np.random.Generator,
                            cache=None):
    """Draw a marked edge set on an arbitrary work tree.

    Returns (labels, log_probability).
    """
    _require_gap_hypothesis(spec)
    result = _engine(wt.copy(), spec, parts, config, rng=rng, cache=cache)
    marks, prob = result
    return marks, math.log(prob)


def marked_set_logprob_work(wt: WorkTree, spec: BalanceSpec, parts: int,
                            config: SamplerConfig, target, cache=None):
    """Exact replay probability of producing `target`; None if impossible."""
    _require_gap_hypothesis(spec)
    result = _engine(wt.copy(), spec, parts, config, target=list(target), cache=cache)
    if result is None:
        return None
    marks, prob = result
    return math.log(prob)


def marked_set_prob_work(wt: WorkTree, spec: BalanceSpec, parts: int,
                         config: SamplerConfig, target, cache=None):
    """Replay probability as an exact Fraction (0 when impossible)."""
    _require_gap_hypothesis(spec)
    result = _engine(wt.copy(), spec, parts, config, target=list(target), cache=cache)
    if result is None:
        return Fraction(0)
    return result[1]


def select_marked_tree(tree: SpanningTree, spec: BalanceSpec, parts: int,
                       config: SamplerConfig, rng: np.random.Generator,
                       cache=None):
    """SelectMarkedTree on a host spanning tree.

    Returns (marked edge frozenset, log_probability of the realized draw).
    """
    marks, logp = select_marked_tree_work(
        WorkTree.from_tree(tree), spec, parts, config, rng, cache=cache
    )
    return frozenset(marks), logp


def marked_set_logprob(tree: SpanningTree, spec: BalanceSpec, parts: int,
                       config: SamplerConfig, marks, cache=None):
    """Log-probability that SelectMarkedTree outputs `marks`; None if it
    cannot."""
    return marked_set_logprob_work(
        WorkTree.from_tree(tree), spec, parts, config,
        [_canon(e) for e in marks], cache=cache,
    )
