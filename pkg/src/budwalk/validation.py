"""Tiered self-validation checks.

Each check returns a CheckResult; the fast tier covers exact counts and
small-instance equivalences, the full tier adds the long chain runs.  The
acceptance test suite and the `validate` CLI subcommand both run these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .chains import MeasureSpec, MeasureSpec as _Measure, init_state, run_chain
from .chains import UNIFORM_FORESTS, UNIFORM_PARTITIONS, UNIFORM_SPLITTABLE_TREES
from .diagnostics import Histogram, autocorrelation, cut_edges, effective_sample_size
from .graph import BalanceSpec, make_grid
from .marking import MarkedTree, SamplerConfig, marked_set_prob_work, select_marked_tree
from .marking import WorkTree
from .oracle import (
    build_transition_matrix,
    count_splittable_trees,
    enumerate_marked_sets,
    enumerate_partitions,
    splittable_spanning_trees,
)
from .splittability import tapp_decide, tapp_oracle, tapp_split
from .trees import SpanningTree, count_spanning_trees_subgraph, wilson_uniform_spanning_tree


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} - {self.name}: {self.detail}"


# ---------------------------------------------------------------------------
# 1. Exact counts
# ---------------------------------------------------------------------------

def check_exact_counts() -> CheckResult:
    grid = make_grid(4, 4)
    total = count_spanning_trees_subgraph(grid, range(grid.n))
    spec = BalanceSpec(4, 4, 4)
    splittable = count_splittable_trees(grid, spec)
    ok = total == 100352 and splittable == 35624
    return CheckResult(
        "exact counts (4x4 grid)",
        ok,
        f"spanning trees {total} (want 100352), splittable {splittable} (want 35624)",
    )


# ---------------------------------------------------------------------------
# 2. Oracle equivalence of the splittability decision
# ---------------------------------------------------------------------------

def _random_tree(rng, n):
    """Uniform labeled tree edges on n vertices."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    prufer = [int(rng.integers(n)) for _ in range(n - 2)]
    degree = [1] * n
    for v in prufer:
        degree[v] += 1
    edges = []
    import heapq

    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    for v in prufer:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, w = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, w))
    return edges


def _tree_graph(edges, weights):
    from .graph import WeightedGraph

    n = len(weights)
    return WeightedGraph(
        [(str(i), weights[i]) for i in range(n)],
        [(str(a), str(b)) for a, b in edges],
    )


def check_oracle_equivalence(seed: int = 20260824, trials: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    disagreements = 0
    fast_mismatches = 0
    checked_fast = 0
    for _ in range(trials):
        n = int(rng.integers(2, 13))
        weights = [int(rng.integers(1, 21)) for _ in range(n)]
        edges = _random_tree(rng, n)
        graph = _tree_graph(edges, weights)
        tree = SpanningTree(graph, graph.edges)
        parts = int(rng.integers(1, min(6, n + 1)))
        total = sum(weights)
        center = total / parts
        lower = Fraction(int(rng.integers(1, max(2, int(center) + 2))))
        upper = lower + int(rng.integers(0, max(2, int(center))))
        spec = BalanceSpec(max(parts, 1), lower, upper)
        got, _ = tapp_decide(tree, spec, parts)
        want = tapp_oracle(tree, spec, parts)
        if got != want:
            disagreements += 1
        from .splittability import _feasible_counts

        # The single-table variant is sound exactly when `parts` is the only
        # feasible piece count for the total weight (a count above `parts`
        # can otherwise masquerade as a valid split).
        if _feasible_counts(total, lower, upper, n) == [parts]:
            checked_fast += 1
            adj = [[] for _ in range(n)]
            for a, b in tree.edge_set:
                adj[a].append(b)
                adj[b].append(a)
            fast = tapp_split(adj, weights, lower, upper, parts, method="fast")
            general = tapp_split(adj, weights, lower, upper, parts, method="general")
            if fast != general:
                fast_mismatches += 1
    ok = disagreements == 0 and fast_mismatches == 0
    return CheckResult(
        "splittability oracle equivalence",
        ok,
        f"{trials} trials, {disagreements} oracle disagreements, "
        f"{fast_mismatches}/{checked_fast} fast/general mismatches",
    )


# ---------------------------------------------------------------------------
# 3. Detailed balance of the tree-level walk
# ---------------------------------------------------------------------------

def check_detailed_balance() -> CheckResult:
    problems = []
    for rows, cols, share in ((2, 3, 3), (2, 4, 4)):
        grid = make_grid(rows, cols)
        spec = BalanceSpec(2, share, share)
        tm = build_transition_matrix(grid, spec, chain="bud-tree")
        if not tm.is_symmetric():
            problems.append(f"{rows}x{cols}: matrix not symmetric")
        cls = tm.communicating_class(0)
        if len(cls) != tm.n:
            problems.append(f"{rows}x{cols}: class {len(cls)}/{tm.n}")
        pi = tm.stationary()
        res = tm.residual(pi)
        unif = float(np.abs(pi - 1.0 / tm.n).max())
        if res >= 1e-12 or unif >= 1e-10:
            problems.append(f"{rows}x{cols}: residual {res:.2e}, uniform dev {unif:.2e}")
    return CheckResult(
        "tree-walk detailed balance",
        not problems,
        "; ".join(problems) if problems else "2x3 and 2x4 grids symmetric, uniform stationary",
    )


# ---------------------------------------------------------------------------
# 4. Marked-sampler support, normalization, and frequencies
# ---------------------------------------------------------------------------

def _sampler_corpus():
    """Small splittable trees with 2*lower > upper for the sampler."""
    corpus = []
    # unit path of 8, 4 districts of 2
    corpus.append((list(zip(range(7), range(1, 8))), [1] * 8, BalanceSpec(4, 2, 2)))
    # caterpillar, 3 districts in [2,3]
    corpus.append((
        [(0, 1), (1, 2), (2, 3), (1, 4), (2, 5), (3, 6)],
        [1] * 7,
        BalanceSpec(3, 2, 3),
    ))
    # star-ish tree with weighted leaves, 3 districts in [3,4]
    corpus.append((
        [(0, 1), (0, 2), (0, 3), (3, 4), (2, 5)],
        [2, 3, 1, 1, 2, 1],
        BalanceSpec(3, 3, 4),
    ))
    # spider on 10 vertices, 3 districts in [3,4]
    corpus.append((
        [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6), (0, 7), (7, 8), (8, 9)],
        [1] * 10,
        BalanceSpec(3, 3, 4),
    ))
    # binary-ish tree, 2 districts in [4,5]
    corpus.append((
        [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6), (3, 7), (4, 8)],
        [1] * 9,
        BalanceSpec(2, 4, 5),
    ))
    return corpus


def check_marked_sampler(seed: int = 7, draws: int = 100_000) -> CheckResult:
    rng = np.random.default_rng(seed)
    config = SamplerConfig()
    problems = []
    for idx, (edges, weights, spec) in enumerate(_sampler_corpus()):
        graph = _tree_graph(edges, weights)
        tree = SpanningTree(graph, graph.edges)
        valid = enumerate_marked_sets(tree, spec, spec.k)
        if not valid:
            problems.append(f"tree {idx}: corpus entry not splittable")
            continue
        cache: dict = {}
        probs = {}
        for m in valid:
            p = marked_set_prob_work(
                WorkTree.from_tree(tree), spec, spec.k, config, sorted(m),
                cache=cache,
            )
            probs[m] = p
        if any(p == 0 for p in probs.values()):
            problems.append(f"tree {idx}: support misses a valid marked set")
        total = sum(probs.values(), Fraction(0))
        if abs(float(total) - 1.0) > 1e-12:
            problems.append(f"tree {idx}: probabilities sum to {float(total)}")
        counts = {m: 0 for m in probs}
        for _ in range(draws):
            marks, _ = select_marked_tree(tree, spec, spec.k, config, rng,
                                          cache=cache)
            if marks not in counts:
                problems.append(f"tree {idx}: sampler produced invalid set {sorted(marks)}")
                break
            counts[marks] += 1
        for m, p in probs.items():
            q = float(p)
            sigma = math.sqrt(draws * q * (1 - q))
            if abs(counts[m] - draws * q) > 3 * sigma + 1e-9:
                problems.append(
                    f"tree {idx}: set {sorted(m)} count {counts[m]} vs "
                    f"expected {draws * q:.1f} (3 sigma = {3 * sigma:.1f})"
                )
    return CheckResult(
        "marked-sampler correctness",
        not problems,
        "; ".join(problems) if problems else
        f"{len(_sampler_corpus())} trees: support exact, sums 1, frequencies in 3 sigma",
    )


# ---------------------------------------------------------------------------
# 5. MH targeting on marked trees
# ---------------------------------------------------------------------------

def check_mh_targeting() -> CheckResult:
    from .chains import target_weight

    grid = make_grid(2, 4)
    spec = BalanceSpec(2, 3, 5)
    problems = []
    for kind in (UNIFORM_SPLITTABLE_TREES, UNIFORM_FORESTS, UNIFORM_PARTITIONS):
        measure = MeasureSpec(kind)
        tm = build_transition_matrix(grid, spec, chain="bud-marked",
                                     measure=measure, d=0)
        weights = np.array([
            float(target_weight(_reconstruct(grid, key), measure))
            for key in tm.states
        ])
        target = weights / weights.sum()
        res = tm.residual(target)
        if res >= 1e-10:
            problems.append(f"{kind}: residual {res:.2e}")
    return CheckResult(
        "MH stationary targeting (2x4 grid)",
        not problems,
        "; ".join(problems) if problems else
        "all three measures stationary, residual < 1e-10",
    )


def _reconstruct(graph, key) -> MarkedTree:
    tree_edges, marks = key
    return MarkedTree(SpanningTree(graph, tree_edges), marks)


# ---------------------------------------------------------------------------
# 6. Grid validation run against the exact distribution
# ---------------------------------------------------------------------------

def _partition_key(assignment_items):
    groups: dict = {}
    for v, d in assignment_items:
        groups.setdefault(d, []).append(v)
    return tuple(sorted(tuple(sorted(g)) for g in groups.values()))


def check_grid_validation_run(seed: int = 20260824, steps: int = 200_000) -> CheckResult:
    grid = make_grid(4, 4)
    spec = BalanceSpec(4, 4, 4)

    parts = enumerate_partitions(grid, spec)
    exact_weights = {}
    exact_cut = {}
    for p in parts:
        w = 1
        for members in p.districts():
            w *= count_spanning_trees_subgraph(grid, members)
        from .graph import quotient
        from .trees import count_spanning_trees

        w *= count_spanning_trees(quotient(grid, p).multiplicity)
        exact_weights[p.canonical_key()] = w
        exact_cut[p.canonical_key()] = cut_edges(grid, p)
    total_w = sum(exact_weights.values())
    exact_cut_dist: dict = {}
    for key, w in exact_weights.items():
        c = exact_cut[key]
        exact_cut_dist[c] = exact_cut_dist.get(c, 0) + w / total_w

    rng = np.random.default_rng(seed)
    visited = set()
    emp_cut: dict = {}

    def sink(record):
        key = _partition_key(
            (grid.index(v), d) for v, d in record["assignment"].items()
        )
        visited.add(key)
        c = record["obs"]["cut_edges"]
        emp_cut[c] = emp_cut.get(c, 0) + 1

    summary = run_chain(grid, spec, MeasureSpec(), steps, record_every=1, d=0,
                        rng=rng, sink=sink, chain="bud-marked",
                        include_assignment=True)
    n_rec = sum(emp_cut.values())
    tv = 0.5 * sum(
        abs(emp_cut.get(c, 0) / n_rec - exact_cut_dist.get(c, 0.0))
        for c in set(emp_cut) | set(exact_cut_dist)
    )
    missing = len(exact_weights) - len(visited)
    ok = missing == 0 and tv <= 0.05
    return CheckResult(
        "4x4 grid validation run",
        ok,
        f"{len(visited)}/{len(exact_weights)} partitions visited, cut-edge TV "
        f"{tv:.4f} (budget 0.05), acceptance {summary['acceptance_rate']:.3f}, "
        f"wall {summary['wall_time']:.1f}s",
    )


# ---------------------------------------------------------------------------
# 7. Multi-start mixing on the 5-district grid
# ---------------------------------------------------------------------------

def check_multistart_mixing(seed: int = 3, steps: int = 100_000,
                            n_chains: int = 6) -> CheckResult:
    grid = make_grid(4, 4)
    spec = BalanceSpec(5, 3, 4)
    checkpoints = [steps // 10, steps // 3, steps]
    series = []
    for i in range(n_chains):
        rng = np.random.default_rng([seed, i])
        values = []
        run_chain(grid, spec, MeasureSpec(), steps, record_every=1, d=0,
                  rng=rng, sink=lambda r: values.append(r["obs"]["cut_edges"]),
                  chain="bud-marked")
        series.append(values)

    def max_pairwise_tv(upto):
        hists = [Histogram.from_values(s[:upto], 1.0) for s in series]
        worst = 0.0
        for a in range(n_chains):
            for b in range(a + 1, n_chains):
                from .diagnostics import tv_distance

                worst = max(worst, tv_distance(hists[a], hists[b]))
        return worst

    tvs = [max_pairwise_tv(c) for c in checkpoints]
    decaying = all(tvs[i + 1] <= tvs[i] + 0.01 for i in range(len(tvs) - 1))
    ok = decaying and tvs[-1] < 0.1
    return CheckResult(
        "multi-start mixing (4x4, 5 districts)",
        ok,
        f"max pairwise TV at {checkpoints}: "
        + ", ".join(f"{t:.4f}" for t in tvs)
        + " (final budget 0.1)",
    )


# ---------------------------------------------------------------------------
# 8. Baseline parity harness on the 8x8 grid
# ---------------------------------------------------------------------------

def check_baseline_parity(seed: int = 11, steps: int = 200_000) -> CheckResult:
    grid = make_grid(8, 8)
    spec = BalanceSpec(4, 16, 16)
    results = {}
    for sub, chain in enumerate(("bud-tree", "up-down")):
        rng = np.random.default_rng([seed, sub])
        diam = []
        initial = None
        if chain == "bud-tree":
            initial = init_state(grid, spec, np.random.default_rng([seed, 99]),
                                 strategy="bisection").tree
        summary = run_chain(grid, spec, MeasureSpec(), steps, record_every=10,
                            rng=rng,
                            sink=lambda r: diam.append(r["obs"]["tree_diameter"]),
                            chain=chain, initial=initial)
        rho = autocorrelation(diam, 100)
        ess = effective_sample_size(diam)
        results[chain] = (rho, ess, summary["wall_time"])
    finite = all(
        np.all(np.isfinite(rho)) and math.isfinite(ess) and ess > 0
        for rho, ess, _ in results.values()
    )
    detail = ", ".join(
        f"{chain}: ESS {ess:.0f} of {steps // 10} recorded (wall {wall:.0f}s)"
        for chain, (_, ess, wall) in results.items()
    )
    return CheckResult("8x8 baseline parity harness", finite, detail)


FAST_CHECKS = (
    check_exact_counts,
    check_oracle_equivalence,
    check_detailed_balance,
    check_marked_sampler,
    check_mh_targeting,
)
FULL_CHECKS = FAST_CHECKS + (
    check_grid_validation_run,
    check_multistart_mixing,
    check_baseline_parity,
)


def run_checks(level: str = "fast"):
    checks = FAST_CHECKS if level == "fast" else FULL_CHECKS
    return [c() for c in checks]
