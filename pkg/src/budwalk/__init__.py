"""Balanced spanning-tree walks for sampling population-balanced partitions.

The package implements a Markov chain over spanning trees that are
splittable into k connected, population-balanced districts, together with a
marked-tree variant whose Metropolis-Hastings acceptance targets several
partition measures, exact brute-force oracles for small instances, and MCMC
diagnostics.
"""

from .chains import (
    CHAIN_KINDS,
    MEASURE_KINDS,
    UNIFORM_FORESTS,
    UNIFORM_PARTITIONS,
    UNIFORM_SPLITTABLE_TREES,
    ChainError,
    InitError,
    MeasureSpec,
    ProposalOutcome,
    bud_step,
    init_state,
    log_target,
    mh_step,
    removable_edges,
    restricted_bud_propose,
    run_chain,
    target_weight,
)
from .diagnostics import (
    Histogram,
    autocorrelation,
    cut_edges,
    effective_sample_size,
    isoperimetric_ratios,
    ranked_shares,
    tv_distance,
)
from .graph import (
    BalanceSpec,
    GraphError,
    InvalidPartitionError,
    Partition,
    QuotientMultigraph,
    WeightedGraph,
    load_graph,
    make_grid,
    quotient,
)
from .oracle import (
    OracleGuardError,
    TransitionMatrix,
    build_transition_matrix,
    count_splittable_trees,
    enumerate_marked_sets,
    enumerate_partitions,
    enumerate_spanning_trees,
)
from .marking import (
    GapHypothesisError,
    MarkedTree,
    NotSplittableError,
    SamplerConfig,
    marked_set_logprob,
    select_marked_tree,
)
from .splittability import (
    IntervalSet,
    crop,
    gap_closure,
    minkowski_sum,
    tapp_decide,
    tapp_oracle,
    tapp_split,
    unique_exact_split,
)
from .trees import (
    Cycle,
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

__version__ = "0.1.0"
