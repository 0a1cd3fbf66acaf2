"""Spanning-tree primitives: sampling, cycles, exact counting, Up-Down steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import GraphError, WeightedGraph


class TreeError(ValueError):
    pass


def _canon(e):
    a, b = e
    return (a, b) if a < b else (b, a)


class SpanningTree:
    """Spanning tree of a host graph, rooted at dense index 0.

    Keeps a parent array, children adjacency, and per-vertex depth; these are
    rebuilt by one BFS whenever the edge set changes (cheap at target scales).
    """

    __slots__ = ("graph", "edge_set", "parent", "children", "depth", "_order")

    def __init__(self, graph: WeightedGraph, edges):
        self.graph = graph
        self.edge_set = frozenset(_canon(e) for e in edges)
        if len(self.edge_set) != graph.n - 1:
            raise TreeError(f"expected {graph.n - 1} edges, got {len(self.edge_set)}")
        for e in self.edge_set:
            if not graph.has_edge(*e):
                raise TreeError(f"edge {e} is not a host-graph edge")
        self._rebuild()

    def _rebuild(self):
        n = self.graph.n
        adj = [[] for _ in range(n)]
        for a, b in self.edge_set:
            adj[a].append(b)
            adj[b].append(a)
        parent = [-1] * n
        depth = [0] * n
        children = [[] for _ in range(n)]
        order = [0]
        seen = [False] * n
        seen[0] = True
        head = 0
        while head < len(order):
            v = order[head]
            head += 1
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    parent[u] = v
                    depth[u] = depth[v] + 1
                    children[v].append(u)
                    order.append(u)
        if len(order) != n:
            raise TreeError("edge set does not span the graph")
        self.parent = parent
        self.children = children
        self.depth = depth
        self._order = order  # BFS order: parents precede children

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.edge_set)

    def bfs_order(self) -> list[int]:
        return self._order

    def adjacency(self) -> list[list[int]]:
        adj = [[] for _ in range(self.graph.n)]
        for a, b in self.edge_set:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def non_tree_edges(self) -> list[tuple[int, int]]:
        return [e for e in self.graph.edges if e not in self.edge_set]

    def swap(self, add_edge, remove_edge) -> "SpanningTree":
        add_edge, remove_edge = _canon(add_edge), _canon(remove_edge)
        if add_edge == remove_edge:
            return self
        edges = set(self.edge_set)
        edges.remove(remove_edge)
        edges.add(add_edge)
        return SpanningTree(self.graph, edges)

    def subtree_weights(self) -> list[int]:
        """Total population of the subtree rooted at each vertex."""
        pop = self.graph.pop
        w = [pop[v] for v in range(self.graph.n)]
        for v in reversed(self._order):
            p = self.parent[v]
            if p >= 0:
                w[p] += w[v]
        return w

    def component_of(self, v: int, cut_edges) -> set[int]:
        """Vertices reachable from v without crossing any edge in cut_edges."""
        cut = {_canon(e) for e in cut_edges}
        adj = self.adjacency()
        seen = {v}
        stack = [v]
        while stack:
            x = stack.pop()
            for u in adj[x]:
                if _canon((x, u)) in cut or u in seen:
                    continue
                seen.add(u)
                stack.append(u)
        return seen

    def __eq__(self, other):
        return isinstance(other, SpanningTree) and self.edge_set == other.edge_set

    def __hash__(self):
        return hash(self.edge_set)

    def __repr__(self):
        return f"SpanningTree({sorted(self.edge_set)})"


@dataclass
class Cycle:
    """The unique cycle of T + e: vertices in cyclic order, edges along it."""

    vertices: list[int]
    edges: list[tuple[int, int]]


def fundamental_cycle(tree: SpanningTree, e) -> Cycle:
    a, b = _canon(e)
    if (a, b) in tree.edge_set:
        raise TreeError(f"edge {(a, b)} is already in the tree")
    if not tree.graph.has_edge(a, b):
        raise TreeError(f"edge {(a, b)} is not a host-graph edge")
    # Walk both endpoints up to their LCA.
    pa, pb = [a], [b]
    x, y = a, b
    while tree.depth[x] > tree.depth[y]:
        x = tree.parent[x]
        pa.append(x)
    while tree.depth[y] > tree.depth[x]:
        y = tree.parent[y]
        pb.append(y)
    while x != y:
        x = tree.parent[x]
        y = tree.parent[y]
        pa.append(x)
        pb.append(y)
    vertices = pa + pb[-2::-1]  # a .. lca .. b, without repeating the LCA
    edges = [_canon((vertices[i], vertices[i + 1])) for i in range(len(vertices) - 1)]
    edges.append((a, b))
    return Cycle(vertices, edges)


def wilson_uniform_spanning_tree(graph: WeightedGraph, rng: np.random.Generator) -> SpanningTree:
    """Uniform spanning tree via loop-erased random walks."""
    graph.require_connected()
    n = graph.n
    in_tree = [False] * n
    nxt = [-1] * n
    root = 0
    in_tree[root] = True
    for start in range(n):
        v = start
        while not in_tree[v]:
            nbrs = graph.adj[v]
            nxt[v] = nbrs[rng.integers(len(nbrs))]
            v = nxt[v]
        v = start
        while not in_tree[v]:
            in_tree[v] = True
            v = nxt[v]
    edges = [(v, nxt[v]) for v in range(n) if v != root]
    return SpanningTree(graph, edges)


def up_down_step(graph: WeightedGraph, tree: SpanningTree, rng: np.random.Generator) -> SpanningTree:
    """Classic unconstrained Up-Down step: add a uniform non-tree edge, drop a
    uniform edge of the created cycle."""
    nte = tree.non_tree_edges()
    if not nte:
        raise TreeError("graph is a tree: no non-tree edges to add")
    e = nte[rng.integers(len(nte))]
    cyc = fundamental_cycle(tree, e)
    c = cyc.edges[rng.integers(len(cyc.edges))]
    return tree.swap(e, c)


def tree_diameter(tree: SpanningTree) -> int:
    """Longest path length in edges, via double BFS."""
    adj = tree.adjacency()

    def farthest(src):
        dist = {src: 0}
        queue = [src]
        head = 0
        far, fd = src, 0
        while head < len(queue):
            v = queue[head]
            head += 1
            for u in adj[v]:
                if u not in dist:
                    dist[u] = dist[v] + 1
                    if dist[u] > fd:
                        far, fd = u, dist[u]
                    queue.append(u)
        return far, fd

    far, _ = farthest(0)
    _, diameter = farthest(far)
    return diameter


def _bareiss_determinant(m: list[list[int]]) -> int:
    """Exact integer determinant by fraction-free elimination."""
    a = [row[:] for row in m]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for i in range(n - 1):
        if a[i][i] == 0:
            for r in range(i + 1, n):
                if a[r][i] != 0:
                    a[i], a[r] = a[r], a[i]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                a[r][c] = (a[r][c] * a[i][i] - a[r][i] * a[i][c]) // prev
            a[r][i] = 0
        prev = a[i][i]
    return sign * a[n - 1][n - 1]


def count_spanning_trees(multiplicity: list[list[int]]) -> int:
    """Matrix-tree count for a multigraph given by a symmetric multiplicity
    matrix; returns 0 when disconnected."""
    k = len(multiplicity)
    if k == 0:
        return 0
    if k == 1:
        return 1
    lap = [[0] * k for _ in range(k)]
    for i in range(k):
        deg = 0
        for j in range(k):
            if i != j:
                mij = multiplicity[i][j]
                if mij < 0:
                    raise ValueError("multiplicities must be >= 0")
                lap[i][j] = -mij
                deg += mij
        lap[i][i] = deg
    minor = [row[1:] for row in lap[1:]]
    det = _bareiss_determinant(minor)
    return max(det, 0)


def count_spanning_trees_subgraph(graph: WeightedGraph, members) -> int:
    """Spanning-tree count of the induced subgraph on `members`."""
    members = sorted(members)
    idx = {v: i for i, v in enumerate(members)}
    k = len(members)
    m = [[0] * k for _ in range(k)]
    for a, b in graph.edges:
        if a in idx and b in idx:
            m[idx[a]][idx[b]] += 1
            m[idx[b]][idx[a]] += 1
    return count_spanning_trees(m)


def log_count_spanning_trees(multiplicity: list[list[int]]) -> float:
    """Floating-point fallback for graphs whose tau overflows practical use.

    Exact integer counting is the default everywhere; this exists for very
    large districts where only log-ratios are needed.
    """
    import math

    tau = count_spanning_trees(multiplicity)
    if tau == 0:
        return float("-inf")
    return math.log(tau)


def contract(graph: WeightedGraph, mapping: dict[str, str], multigraph: bool = False):
    """Merge vertex classes given by mapping (id -> representative id).

    Classes must induce connected subgraphs.  Populations are summed.  With
    multigraph=False parallel edges collapse and a WeightedGraph is returned;
    with multigraph=True returns (representatives, populations, multiplicity).
    """
    reps: dict[str, str] = {}
    for vid in graph.ids:
        reps[vid] = mapping.get(vid, vid)
    classes: dict[str, list[int]] = {}
    for vid, rep in reps.items():
        classes.setdefault(rep, []).append(graph.index(vid))
    for rep, members in classes.items():
        if rep not in {graph.ids[v] for v in members}:
            raise GraphError(f"representative {rep!r} not a member of its class")
        from .graph import _is_connected_subset

        if not _is_connected_subset(graph, members):
            raise GraphError(f"class of {rep!r} is not connected")

    rep_ids = sorted(classes, key=graph.index)
    rep_index = {r: i for i, r in enumerate(rep_ids)}
    pops = [sum(graph.pop[v] for v in classes[r]) for r in rep_ids]
    k = len(rep_ids)
    mult = [[0] * k for _ in range(k)]
    for a, b in graph.edges:
        ra, rb = rep_index[reps[graph.ids[a]]], rep_index[reps[graph.ids[b]]]
        if ra != rb:
            mult[ra][rb] += 1
            mult[rb][ra] += 1
    if multigraph:
        return rep_ids, pops, mult
    edges = [
        (rep_ids[i], rep_ids[j]) for i in range(k) for j in range(i + 1, k) if mult[i][j]
    ]
    return WeightedGraph(zip(rep_ids, pops), edges)
