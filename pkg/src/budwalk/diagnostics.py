"""Observables and convergence statistics for chain traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .graph import Partition, WeightedGraph


class DiagnosticsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------

def cut_edges(graph: WeightedGraph, partition: Partition) -> int:
    """Host edges whose endpoints lie in different districts."""
    assign = partition.assignment
    return sum(1 for a, b in graph.edges if assign[a] != assign[b])


def isoperimetric_ratios(graph: WeightedGraph, partition: Partition):
    """Per-district (leaving-edge count)^2 / vertex count, ascending.

    The discrete stand-in for perimeter^2/area; exact rationals so ties sort
    deterministically.
    """
    assign = partition.assignment
    boundary = [0] * partition.k
    size = [0] * partition.k
    for v, d in assign.items():
        size[d] += 1
    for a, b in graph.edges:
        da, db = assign[a], assign[b]
        if da != db:
            boundary[da] += 1
            boundary[db] += 1
    return sorted(Fraction(b * b, s) for b, s in zip(boundary, size))


def ranked_shares(partition: Partition, graph: WeightedGraph,
                  numerator: str, denominator: str):
    """Sorted per-district attribute shares (e.g. vote shares)."""
    num = [0.0] * partition.k
    den = [0.0] * partition.k
    for v, d in partition.assignment.items():
        attrs = graph.attrs.get(graph.ids[v])
        if attrs is None or numerator not in attrs or denominator not in attrs:
            raise DiagnosticsError(
                f"vertex {graph.ids[v]!r} lacks attribute "
                f"{numerator!r}/{denominator!r}"
            )
        num[d] += attrs[numerator]
        den[d] += attrs[denominator]
    for d, dd in enumerate(den):
        if dd <= 0:
            raise DiagnosticsError(f"district {d} has non-positive denominator sum")
    return sorted(n / dd for n, dd in zip(num, den))


# ---------------------------------------------------------------------------
# Series statistics
# ---------------------------------------------------------------------------

def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelation rho_0..rho_max_lag; 0 beyond lag 0 when the
    series has no variance."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n <= max_lag:
        raise DiagnosticsError(f"series length {n} must exceed max_lag {max_lag}")
    x = x - x.mean()
    var = float(x @ x)
    rho = np.zeros(max_lag + 1)
    rho[0] = 1.0
    if var == 0.0:
        return rho
    for t in range(1, max_lag + 1):
        rho[t] = float(x[:-t] @ x[t:]) / var
    return rho


def effective_sample_size(series) -> float:
    """n / (1 + 2 sum rho_t), truncating at the first rho_t < 0.05 or < 0."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < 2 or np.all(x == x[0]):
        raise DiagnosticsError("effective sample size of a degenerate series")
    rho = autocorrelation(x, n - 1)
    acc = 0.0
    for t in range(1, n):
        if rho[t] < 0.05:
            break
        acc += rho[t]
    return n / (1.0 + 2.0 * acc)


# ---------------------------------------------------------------------------
# Histograms and total variation
# ---------------------------------------------------------------------------

@dataclass
class Histogram:
    """Fixed-width binning anchored at 0."""

    bin_width: float
    counts: dict = field(default_factory=dict)
    total: int = 0

    def __post_init__(self):
        if self.bin_width <= 0:
            raise DiagnosticsError("bin width must be > 0")

    def add(self, value) -> None:
        b = int(np.floor(float(value) / self.bin_width))
        self.counts[b] = self.counts.get(b, 0) + 1
        self.total += 1

    def add_many(self, values) -> None:
        for v in values:
            self.add(v)

    @classmethod
    def from_values(cls, values, bin_width: float) -> "Histogram":
        h = cls(bin_width)
        h.add_many(values)
        return h

    def density(self) -> dict:
        if self.total == 0:
            return {}
        return {b: c / self.total for b, c in self.counts.items()}


DEFAULT_SHARE_BIN_WIDTH = 0.002


def tv_distance(a: Histogram, b: Histogram) -> float:
    """Half the L1 distance between the normalized histograms."""
    if a.bin_width != b.bin_width:
        raise DiagnosticsError(
            f"histograms have different bin widths: {a.bin_width} vs {b.bin_width}"
        )
    if a.total == 0 or b.total == 0:
        raise DiagnosticsError("total variation of an empty histogram")
    da, db = a.density(), b.density()
    return 0.5 * sum(abs(da.get(k, 0.0) - db.get(k, 0.0)) for k in set(da) | set(db))
