"""Host graphs, balance specifications, partitions, and quotient multigraphs.

Vertex ids are arbitrary strings; internally they are mapped to dense
indices 0..n-1 in insertion order.  That dense order is the canonical
vertex ordering used by every downstream component (sampler orderings,
trace reproducibility), so two loads of the same document always agree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence


class GraphError(ValueError):
    """Malformed or unusable graph input."""


class InvalidPartitionError(ValueError):
    """Partition violates connectivity or balance requirements."""


class WeightedGraph:
    """Simple undirected graph with non-negative integer vertex populations.

    Immutable after construction; safe to share between concurrent chains.
    Edges are stored canonically as (i, j) with i < j in dense-index space.
    """

    def __init__(self, vertices, edges, attrs=None):
        """vertices: iterable of (id, population); edges: iterable of id pairs."""
        self.ids: list[str] = []
        self.pop: list[int] = []
        self._index: dict[str, int] = {}
        for vid, p in vertices:
            vid = str(vid)
            if vid in self._index:
                raise GraphError(f"duplicate vertex id {vid!r}")
            p = int(p)
            if p < 0:
                raise GraphError(f"negative population at vertex {vid!r}")
            self._index[vid] = len(self.ids)
            self.ids.append(vid)
            self.pop.append(p)
        self.attrs: dict[str, dict[str, float]] = dict(attrs or {})

        self.edges: list[tuple[int, int]] = []
        seen = set()
        for a, b in edges:
            try:
                i, j = self._index[str(a)], self._index[str(b)]
            except KeyError as exc:
                raise GraphError(f"edge references unknown vertex id {exc.args[0]!r}")
            if i == j:
                raise GraphError(f"self-loop at vertex {a!r}")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({a!r}, {b!r})")
            seen.add((i, j))
            self.edges.append((i, j))
        self.edges.sort()
        self._edge_set = frozenset(self.edges)

        self.n = len(self.ids)
        self.total_population = sum(self.pop)
        self.adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            self.adj[i].append(j)
            self.adj[j].append(i)

    def index(self, vid: str) -> int:
        return self._index[vid]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_set

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        seen = [False] * self.n
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            v = stack.pop()
            for u in self.adj[v]:
                if not seen[u]:
                    seen[u] = True
                    count += 1
                    stack.append(u)
        return count == self.n

    def require_connected(self) -> "WeightedGraph":
        if not self.is_connected():
            raise GraphError("graph is not connected")
        return self

    def to_json(self) -> str:
        doc = {
            "vertices": [
                {"id": vid, "pop": self.pop[i], "attrs": self.attrs.get(vid, {})}
                for i, vid in enumerate(self.ids)
            ],
            "edges": [[self.ids[i], self.ids[j]] for i, j in self.edges],
        }
        return json.dumps(doc, separators=(",", ":"), sort_keys=False)

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, m={len(self.edges)}, pop={self.total_population})"


def make_grid(rows: int, cols: int, pop_per_vertex: int = 1) -> WeightedGraph:
    """rows x cols square lattice with orthogonal-neighbor edges."""
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be >= 1")
    if pop_per_vertex < 1:
        raise ValueError("pop_per_vertex must be >= 1")
    vertices = []
    edges = []
    for r in range(rows):
        for c in range(cols):
            vertices.append((f"{r},{c}", pop_per_vertex))
            if r + 1 < rows:
                edges.append((f"{r},{c}", f"{r + 1},{c}"))
            if c + 1 < cols:
                edges.append((f"{r},{c}", f"{r},{c + 1}"))
    return WeightedGraph(vertices, edges)


def load_graph(data) -> WeightedGraph:
    """Parse the graph JSON document (bytes, str, or file-like).

    Schema: {"vertices":[{"id":s,"pop":int,"attrs":{...}},...],"edges":[[id,id],...]}
    """
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from exc
    try:
        verts = [(v["id"], v["pop"]) for v in doc["vertices"]]
        attrs = {str(v["id"]): dict(v.get("attrs", {})) for v in doc["vertices"]}
        edges = doc["edges"]
    except (KeyError, TypeError) as exc:
        raise GraphError(f"document missing required field: {exc}") from exc
    g = WeightedGraph(verts, edges, attrs=attrs)
    g.require_connected()
    return g


@dataclass(frozen=True)
class BalanceSpec:
    """District count k and exact rational population bounds [lower, upper]."""

    k: int
    lower: Fraction
    upper: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lower", Fraction(self.lower))
        object.__setattr__(self, "upper", Fraction(self.upper))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.lower <= self.upper:
            raise ValueError("need 0 < lower <= upper")

    @property
    def gap(self) -> Fraction:
        return self.upper - self.lower

    @property
    def fast_path(self) -> bool:
        # Guarantees at most one feasible part count for any total weight.
        return self.lower > (self.k - 1) * self.gap

    @classmethod
    def from_epsilon(cls, k: int, epsilon, total_population: int) -> "BalanceSpec":
        """Bounds P/k +- P*eps/2 in the normalized tolerance convention."""
        eps = Fraction(epsilon)
        p = Fraction(total_population)
        return cls(k, p / k - p * eps / 2, p / k + p * eps / 2)

    def validate_for(self, graph: WeightedGraph) -> "BalanceSpec":
        ideal = Fraction(graph.total_population, self.k)
        if not self.lower <= ideal <= self.upper:
            raise ValueError(
                f"bounds [{self.lower}, {self.upper}] exclude ideal district "
                f"population {ideal}"
            )
        return self

    def contains(self, weight) -> bool:
        return self.lower <= weight <= self.upper

    def allows_marked_sampling(self, total_population: int) -> bool:
        """Viable-edge containment hypothesis: 2*lower > upper.

        Equivalent to gap < 2P/(3k) for bounds symmetric around P/k.
        """
        return 2 * self.lower > self.upper


@dataclass
class Partition:
    """Assignment of every vertex to a district index in 0..k-1."""

    assignment: dict[int, int]
    k: int

    @classmethod
    def from_district_sets(cls, districts: Sequence[Iterable[int]]) -> "Partition":
        assignment = {}
        for d, members in enumerate(districts):
            for v in members:
                assignment[v] = d
        return cls(assignment, len(districts))

    def districts(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for v, d in self.assignment.items():
            out[d].append(v)
        for members in out:
            members.sort()
        return out

    def district_populations(self, graph: WeightedGraph) -> list[int]:
        pops = [0] * self.k
        for v, d in self.assignment.items():
            pops[d] += graph.pop[v]
        return pops

    def canonical_key(self) -> tuple:
        """District-relabeling-invariant identity."""
        return tuple(sorted(tuple(m) for m in self.districts()))

    def validate(self, graph: WeightedGraph, spec: BalanceSpec | None = None) -> "Partition":
        if set(self.assignment) != set(range(graph.n)):
            raise InvalidPartitionError("assignment does not cover all vertices exactly")
        for d, members in enumerate(self.districts()):
            if not members:
                raise InvalidPartitionError(f"district {d} is empty")
            if not _is_connected_subset(graph, members):
                raise InvalidPartitionError(f"district {d} is not connected")
        if spec is not None:
            for d, p in enumerate(self.district_populations(graph)):
                if not spec.contains(p):
                    raise InvalidPartitionError(
                        f"district {d} population {p} outside [{spec.lower}, {spec.upper}]"
                    )
        return self

    def to_json(self, graph: WeightedGraph) -> str:
        return json.dumps(
            {"assignment": {graph.ids[v]: d for v, d in sorted(self.assignment.items())}}
        )


def _is_connected_subset(graph: WeightedGraph, members: Sequence[int]) -> bool:
    mset = set(members)
    if not mset:
        return False
    start = next(iter(mset))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in graph.adj[v]:
            if u in mset and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(mset)


@dataclass
class QuotientMultigraph:
    """Districts contracted to nodes; m[i][j] counts crossing host edges."""

    k: int
    multiplicity: list[list[int]]

    def edge_count(self) -> int:
        return sum(self.multiplicity[i][j] for i in range(self.k) for j in range(i + 1, self.k))


def quotient(graph: WeightedGraph, partition: Partition) -> QuotientMultigraph:
    """Contract each district to a node, keeping inter-district multiplicities."""
    partition.validate(graph)
    k = partition.k
    m = [[0] * k for _ in range(k)]
    assign = partition.assignment
    for i, j in graph.edges:
        di, dj = assign[i], assign[j]
        if di != dj:
            m[di][dj] += 1
            m[dj][di] += 1
    return QuotientMultigraph(k, m)
