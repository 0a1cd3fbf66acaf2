"""Exact checks on instances small enough to enumerate.

Counts splittable spanning trees of the 4x4 grid two independent ways, then
builds the exact one-step transition matrix of the marked-tree chain on a
2x4 grid and verifies its stationary distribution matches the target.
"""

import numpy as np

from budwalk import (
    BalanceSpec,
    MarkedTree,
    MeasureSpec,
    SpanningTree,
    build_transition_matrix,
    count_splittable_trees,
    count_spanning_trees_subgraph,
    make_grid,
    target_weight,
)
from budwalk.chains import UNIFORM_PARTITIONS

# --- counting ---------------------------------------------------------------
grid = make_grid(4, 4)
spec = BalanceSpec(4, 4, 4)
total = count_spanning_trees_subgraph(grid, range(grid.n))
splittable = count_splittable_trees(grid, spec)
print(f"4x4 grid: {total} spanning trees, {splittable} splittable into "
      f"4 districts of 4 ({splittable / total:.1%})")

# --- stationarity of the marked chain ---------------------------------------
small = make_grid(2, 4)
spec = BalanceSpec(2, 3, 5)
for kind in ("uniform-splittable", "uniform-forest", UNIFORM_PARTITIONS):
    measure = MeasureSpec(kind)
    tm = build_transition_matrix(small, spec, chain="bud-marked",
                                 measure=measure)
    weights = np.array([
        float(target_weight(MarkedTree(SpanningTree(small, edges), marks),
                            measure))
        for edges, marks in tm.states
    ])
    target = weights / weights.sum()
    print(f"{kind}: {tm.n} marked trees, stationarity residual "
          f"{tm.residual(target):.2e}")
