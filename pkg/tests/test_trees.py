import itertools
import math

import numpy as np
import pytest

from budwalk.graph import GraphError, WeightedGraph, make_grid
from budwalk.trees import (
    SpanningTree,
    TreeError,
    contract,
    count_spanning_trees,
    count_spanning_trees_subgraph,
    fundamental_cycle,
    tree_diameter,
    up_down_step,
    wilson_uniform_spanning_tree,
)


def path_graph(weights):
    n = len(weights)
    return WeightedGraph(
        [(str(i), weights[i]) for i in range(n)],
        [(str(i), str(i + 1)) for i in range(n - 1)],
    )


class TestSpanningTree:
    def test_rejects_wrong_edge_count(self):
        g = make_grid(2, 2)
        with pytest.raises(TreeError):
            SpanningTree(g, g.edges)

    def test_rejects_non_host_edge(self):
        g = make_grid(2, 2)
        with pytest.raises(TreeError):
            SpanningTree(g, [(0, 1), (0, 3)])

    def test_rejects_disconnected(self):
        g = make_grid(1, 4)
        with pytest.raises(TreeError):
            SpanningTree(g, [(0, 1), (0, 1), (2, 3)])

    def test_subtree_weights(self):
        g = path_graph([2, 1, 2])
        t = SpanningTree(g, g.edges)
        assert t.subtree_weights() == [5, 3, 2]

    def test_swap_identity(self):
        g = make_grid(2, 2)
        t = SpanningTree(g, [(0, 1), (0, 2), (1, 3)])
        assert t.swap((2, 3), (2, 3)) is t

    def test_component_of(self):
        g = path_graph([1, 1, 1, 1])
        t = SpanningTree(g, g.edges)
        assert t.component_of(0, [(1, 2)]) == {0, 1}


class TestFundamentalCycle:
    def test_four_cycle(self):
        g = make_grid(2, 2)
        t = SpanningTree(g, [(0, 1), (1, 3), (2, 3)])
        cyc = fundamental_cycle(t, (0, 2))
        assert set(cyc.vertices) == {0, 1, 2, 3}
        assert len(cyc.edges) == 4 and (0, 2) in cyc.edges

    def test_star_on_k4(self):
        g = WeightedGraph(
            [(str(i), 1) for i in range(4)],
            list(itertools.combinations("0123", 2)),
        )
        t = SpanningTree(g, [(0, 1), (0, 2), (0, 3)])
        cyc = fundamental_cycle(t, (1, 2))
        assert sorted(cyc.vertices) == [0, 1, 2]
        assert len(cyc.edges) == 3

    def test_errors(self):
        g = make_grid(2, 2)
        t = SpanningTree(g, [(0, 1), (1, 3), (2, 3)])
        with pytest.raises(TreeError):
            fundamental_cycle(t, (0, 1))
        with pytest.raises(TreeError):
            fundamental_cycle(t, (0, 3))

    def test_every_removal_restores_a_tree(self):
        g = make_grid(3, 3)
        rng = np.random.default_rng(0)
        t = wilson_uniform_spanning_tree(g, rng)
        for e in t.non_tree_edges():
            for c in fundamental_cycle(t, e).edges:
                if c != e:
                    t.swap(e, c)  # constructor validates the result


class TestWilson:
    def test_tree_graph_returns_itself(self):
        g = path_graph([1, 1, 1])
        t = wilson_uniform_spanning_tree(g, np.random.default_rng(0))
        assert t.edge_set == frozenset(g.edges)

    def test_four_cycle_uniform(self):
        g = make_grid(2, 2)
        rng = np.random.default_rng(42)
        draws = 100_000
        counts = {}
        for _ in range(draws):
            t = wilson_uniform_spanning_tree(g, rng)
            counts[t.edge_set] = counts.get(t.edge_set, 0) + 1
        assert len(counts) == 4
        sigma = math.sqrt(draws * 0.25 * 0.75)
        for c in counts.values():
            assert abs(c - draws / 4) < 3 * sigma

    def test_disconnected_errors(self):
        g = WeightedGraph([("a", 1), ("b", 1), ("c", 1)], [("a", "b")])
        with pytest.raises(GraphError):
            wilson_uniform_spanning_tree(g, np.random.default_rng(0))


class TestCountSpanningTrees:
    def test_single_vertex(self):
        assert count_spanning_trees([[0]]) == 1

    def test_triangle(self):
        m = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
        assert count_spanning_trees(m) == 3

    def test_multigraph_doubled_edge(self):
        assert count_spanning_trees([[0, 2], [2, 0]]) == 2

    def test_disconnected_returns_zero(self):
        m = [[0, 1, 0], [1, 0, 0], [0, 0, 0]]
        assert count_spanning_trees(m) == 0

    def test_grid_4x4_known_count(self):
        g = make_grid(4, 4)
        assert count_spanning_trees_subgraph(g, range(16)) == 100352

    def test_agrees_with_enumeration_on_small_graphs(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = int(rng.integers(2, 6))
            possible = list(itertools.combinations(range(n), 2))
            mask = rng.random(len(possible)) < 0.7
            edges = [e for e, keep in zip(possible, mask) if keep]
            if len(edges) > 8:
                continue
            m = [[0] * n for _ in range(n)]
            for a, b in edges:
                m[a][b] = m[b][a] = 1
            brute = 0
            for subset in itertools.combinations(edges, n - 1):
                parent = list(range(n))

                def find(x):
                    while parent[x] != x:
                        x = parent[x]
                    return x

                good = True
                for a, b in subset:
                    ra, rb = find(a), find(b)
                    if ra == rb:
                        good = False
                        break
                    parent[ra] = rb
                brute += good
            assert count_spanning_trees(m) == brute


class TestTreeDiameter:
    def test_single_vertex(self):
        g = make_grid(1, 1)
        assert tree_diameter(SpanningTree(g, [])) == 0

    def test_path(self):
        g = path_graph([1] * 6)
        assert tree_diameter(SpanningTree(g, g.edges)) == 5

    def test_star(self):
        g = WeightedGraph([(str(i), 1) for i in range(5)],
                          [("0", str(i)) for i in range(1, 5)])
        assert tree_diameter(SpanningTree(g, g.edges)) == 2


class TestUpDownStep:
    def test_graph_equal_tree_errors(self):
        g = path_graph([1, 1, 1])
        t = SpanningTree(g, g.edges)
        with pytest.raises(TreeError):
            up_down_step(g, t, np.random.default_rng(0))

    def test_k3_distribution(self):
        g = WeightedGraph([("a", 1), ("b", 1), ("c", 1)],
                          [("a", "b"), ("b", "c"), ("a", "c")])
        t = SpanningTree(g, [(0, 1), (1, 2)])
        rng = np.random.default_rng(3)
        draws = 30_000
        counts = {}
        for _ in range(draws):
            nxt = up_down_step(g, t, rng)
            counts[nxt.edge_set] = counts.get(nxt.edge_set, 0) + 1
        assert len(counts) == 3
        sigma = math.sqrt(draws * (1 / 3) * (2 / 3))
        for c in counts.values():
            assert abs(c - draws / 3) < 3 * sigma

    def test_invariants_preserved_over_many_steps(self):
        g = make_grid(3, 3)
        rng = np.random.default_rng(9)
        t = wilson_uniform_spanning_tree(g, rng)
        for _ in range(2000):
            t = up_down_step(g, t, rng)
            assert len(t.edge_set) == g.n - 1


class TestContract:
    def test_identity(self):
        g = make_grid(2, 2)
        h = contract(g, {})
        assert h.n == g.n and h.edges == g.edges

    def test_path_merge(self):
        g = path_graph([1, 1, 1])
        h = contract(g, {"1": "0"})
        assert h.n == 2 and h.pop == [2, 1]

    def test_cycle_merge_multigraph(self):
        g = make_grid(2, 2)
        ids, pops, mult = contract(g, {g.ids[1]: g.ids[0]}, multigraph=True)
        assert len(ids) == 3 and sum(pops) == 4
        # the two parallel paths around the cycle survive as multiplicities
        assert sum(mult[i][j] for i in range(3) for j in range(i + 1, 3)) == 3

    def test_disconnected_class_errors(self):
        g = path_graph([1, 1, 1])
        with pytest.raises(GraphError):
            contract(g, {"2": "0"})
