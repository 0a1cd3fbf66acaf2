from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from budwalk.graph import BalanceSpec, WeightedGraph
from budwalk.splittability import (
    EMPTY,
    IntervalSet,
    crop,
    gap_closure,
    minkowski_sum,
    tapp_decide,
    tapp_oracle,
    tapp_split,
    unique_exact_split,
)
from budwalk.trees import SpanningTree


def tree_from(edges, weights):
    n = len(weights)
    g = WeightedGraph(
        [(str(i), weights[i]) for i in range(n)],
        [(str(a), str(b)) for a, b in edges],
    )
    return SpanningTree(g, g.edges)


def unit_path(n):
    return tree_from([(i, i + 1) for i in range(n - 1)], [1] * n)


points = st.lists(st.integers(min_value=0, max_value=40), min_size=1, max_size=8)


class TestIntervalSet:
    def test_normalization_merges_overlaps(self):
        s = IntervalSet([(0, 2), (1, 4), (7, 7)])
        assert s.intervals == ((0, 4), (7, 7))

    def test_membership(self):
        s = IntervalSet([(0, 2), (5, 5)])
        assert 1 in s and 5 in s and 3 not in s

    def test_intersects(self):
        s = IntervalSet([(0, 2), (8, 9)])
        assert s.intersects(2, 4) and not s.intersects(3, 7)

    def test_union(self):
        a, b = IntervalSet.point(1), IntervalSet.point(3)
        assert a.union(b).intervals == ((1, 1), (3, 3))


class TestGapClosure:
    def test_simple(self):
        s = IntervalSet.from_points([0, 3, 10])
        assert gap_closure(s, 3).intervals == ((0, 3), (10, 10))

    def test_zero_gap_identity(self):
        s = IntervalSet.from_points([0, 2, 5])
        assert gap_closure(s, 0) == s

    def test_chain_merging(self):
        s = IntervalSet.from_points([0, 2, 4, 9])
        assert gap_closure(s, 2).intervals == ((0, 4), (9, 9))

    def test_negative_gap_rejected(self):
        with pytest.raises(ValueError):
            gap_closure(EMPTY, -1)

    @given(points, st.integers(min_value=0, max_value=10))
    def test_idempotent_and_extensive(self, pts, gap):
        s = IntervalSet.from_points(pts)
        c = gap_closure(s, gap)
        assert gap_closure(c, gap) == c
        assert all(p in c for p in pts)

    @given(points, points, st.integers(min_value=0, max_value=10))
    def test_monotone(self, pts_a, extra, gap):
        a = IntervalSet.from_points(pts_a)
        b = IntervalSet.from_points(pts_a + extra)
        ca, cb = gap_closure(a, gap), gap_closure(b, gap)
        # every point of C(A) is inside C(B)
        for lo, hi in ca.intervals:
            assert lo in cb and hi in cb


class TestMinkowskiSum:
    def test_identity_element(self):
        a = IntervalSet([(0, 1), (4, 4)])
        assert minkowski_sum(a, IntervalSet.point(0)) == a

    def test_shifted_copies(self):
        a = IntervalSet([(0, 1)])
        b = IntervalSet([(0, 0), (5, 5)])
        assert minkowski_sum(a, b).intervals == ((0, 1), (5, 6))

    def test_self_sum(self):
        a = IntervalSet([(0, 1), (4, 4)])
        assert minkowski_sum(a, a).intervals == ((0, 2), (4, 5), (8, 8))

    def test_empty_absorbs(self):
        assert minkowski_sum(EMPTY, IntervalSet.point(3)) == EMPTY

    @given(points, points, st.integers(min_value=0, max_value=6))
    @settings(max_examples=60)
    def test_closure_commutes_with_sum(self, pa, pb, gap):
        # C(C(A) + C(B)) == C(A + B)
        a, b = IntervalSet.from_points(pa), IntervalSet.from_points(pb)
        lhs = gap_closure(
            minkowski_sum(gap_closure(a, gap), gap_closure(b, gap)), gap
        )
        rhs = gap_closure(minkowski_sum(a, b), gap)
        assert lhs == rhs


class TestCrop:
    def test_truncates(self):
        assert crop(IntervalSet([(0, 5)]), 3).intervals == ((0, 3),)

    def test_drops(self):
        assert crop(IntervalSet([(4, 5)]), 3) == EMPTY

    def test_keeps_boundary(self):
        assert crop(IntervalSet([(0, 1), (2, 9)]), 2).intervals == ((0, 1), (2, 2))


class TestUniqueExactSplit:
    def test_unit_path_middle(self):
        assert unique_exact_split(unit_path(4), 2) == frozenset({(1, 2)})

    def test_indivisible(self):
        assert unique_exact_split(unit_path(3), 2) is None

    def test_all_edges(self):
        assert unique_exact_split(unit_path(4), 4) == frozenset({(0, 1), (1, 2), (2, 3)})

    def test_star_fails(self):
        star = tree_from([(0, 1), (0, 2), (0, 3)], [1, 1, 1, 1])
        assert unique_exact_split(star, 2) is None

    def test_k_one(self):
        assert unique_exact_split(unit_path(3), 1) == frozenset()


class TestTappDecide:
    def test_unit_path_pairs(self):
        ok, _ = tapp_decide(unit_path(4), BalanceSpec(2, 2, 2), 2)
        assert ok

    def test_star_not_splittable(self):
        star = tree_from([(0, 1), (0, 2), (0, 3)], [1, 1, 1, 1])
        ok, _ = tapp_decide(star, BalanceSpec(2, 2, 2), 2)
        assert not ok

    def test_weighted_path_both_cuts(self):
        t = tree_from([(0, 1), (1, 2)], [2, 1, 2])
        spec = BalanceSpec(2, 2, 3)
        ok, _ = tapp_decide(t, spec, 2)
        assert ok
        assert tapp_oracle(t, spec, 2)

    def test_single_vertex(self):
        t = tree_from([], [5])
        assert tapp_decide(t, BalanceSpec(1, 5, 5), 1)[0]
        assert not tapp_decide(t, BalanceSpec(1, 6, 7), 1)[0]

    def test_parts_exceeding_vertices(self):
        assert not tapp_decide(unit_path(3), BalanceSpec(4, 1, 1), 4)[0]

    def test_fractional_bounds(self):
        t = tree_from([(0, 1), (1, 2)], [1, 1, 1])
        spec = BalanceSpec(2, Fraction(3, 2), Fraction(3, 2))
        assert not tapp_decide(t, spec, 2)[0]


class TestOracleEquivalence:
    def test_random_instances(self):
        rng = np.random.default_rng(123)
        for _ in range(150):
            n = int(rng.integers(2, 9))
            weights = [int(rng.integers(1, 12)) for _ in range(n)]
            edges = [(int(rng.integers(i)), i) for i in range(1, n)]
            t = tree_from(edges, weights)
            parts = int(rng.integers(1, 5))
            lower = int(rng.integers(1, 12))
            upper = lower + int(rng.integers(0, 10))
            spec = BalanceSpec(max(parts, 1), lower, upper)
            assert tapp_decide(t, spec, parts)[0] == tapp_oracle(t, spec, parts)

    def test_fast_and_general_agree_under_gate(self):
        rng = np.random.default_rng(321)
        checked = 0
        while checked < 60:
            n = int(rng.integers(2, 10))
            weights = [int(rng.integers(1, 12)) for _ in range(n)]
            edges = [(int(rng.integers(i)), i) for i in range(1, n)]
            parts = int(rng.integers(2, 5))
            total = sum(weights)
            lower = max(1, total // parts - 1)
            upper = total // parts + 1
            from budwalk.splittability import _feasible_counts

            if _feasible_counts(total, lower, upper, n) != [parts]:
                continue
            checked += 1
            adj = [[] for _ in range(n)]
            for a, b in edges:
                adj[a].append(b)
                adj[b].append(a)
            fast = tapp_split(adj, weights, lower, upper, parts, method="fast")
            general = tapp_split(adj, weights, lower, upper, parts, method="general")
            assert fast == general


class TestFastVariantSoundness:
    def test_forced_fast_unsound_without_unique_count(self):
        # lower > (parts-1)*(upper-lower) holds, yet 3 pieces are also
        # feasible for the total; the count-free fast table accepts the
        # 3-piece split as if it were a 2-piece one.  The dispatcher must
        # therefore route this instance to the general DP.
        weights = [4, 17, 6, 13, 2, 15, 9]
        edges = [(0, 3), (2, 3), (3, 1), (1, 5), (5, 4), (4, 6)]
        lower, upper, parts = 17, 33, 2
        assert lower > (parts - 1) * (upper - lower)
        adj = [[] for _ in weights]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        assert tapp_split(adj, weights, lower, upper, parts, method="fast")
        assert not tapp_split(adj, weights, lower, upper, parts, method="general")
        assert not tapp_split(adj, weights, lower, upper, parts)  # auto
        tree = tree_from(edges, weights)
        assert not tapp_oracle(tree, BalanceSpec(parts, lower, upper), parts)


class TestComponentBound:
    def test_general_tables_bounded_by_level(self):
        rng = np.random.default_rng(77)
        for _ in range(40):
            n = int(rng.integers(3, 10))
            weights = [int(rng.integers(1, 8)) for _ in range(n)]
            edges = [(int(rng.integers(i)), i) for i in range(1, n)]
            adj = [[] for _ in range(n)]
            for a, b in edges:
                adj[a].append(b)
                adj[b].append(a)
            parts = int(rng.integers(2, 5))
            total = sum(weights)
            lower = max(1, total // parts - 2)
            upper = total // parts + 2
            _, table = tapp_split(adj, weights, lower, upper, parts,
                                  method="general", want_table=True)
            for levels in table.tables.values():
                for l, s in enumerate(levels):
                    # at most one surplus component per completed district,
                    # plus the fresh {0} restart
                    assert len(s) <= l + 1


def test_oracle_guard():
    big = unit_path(28)
    with pytest.raises(ValueError, match="oracle"):
        tapp_oracle(big, BalanceSpec(2, 14, 14), 2)
