"""Quickstart: sample balanced 4-district plans of a 4x4 grid.

Runs the marked-tree chain for a few thousand steps and prints the summary
plus the empirical cut-edge distribution.
"""

import numpy as np

from budwalk import BalanceSpec, MeasureSpec, make_grid, run_chain

grid = make_grid(4, 4)
spec = BalanceSpec(k=4, lower=4, upper=4)  # exact balance: 4 vertices each

cut_counts: dict = {}


def sink(record):
    c = record["obs"]["cut_edges"]
    cut_counts[c] = cut_counts.get(c, 0) + 1


summary = run_chain(
    grid, spec, MeasureSpec(), steps=5000, record_every=1,
    rng=np.random.default_rng(0), sink=sink,
)

print("summary:")
for key in ("chain", "steps", "acceptance_rate", "internal_fraction", "wall_time"):
    print(f"  {key}: {summary[key]}")

print("\ncut-edge distribution:")
total = sum(cut_counts.values())
for c in sorted(cut_counts):
    bar = "#" * round(60 * cut_counts[c] / total)
    print(f"  {c:3d}  {cut_counts[c] / total:6.3f}  {bar}")
