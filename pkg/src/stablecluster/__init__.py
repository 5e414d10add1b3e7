"""Exact clustering of perturbation-stable point sets."""

from .clustering import Clustering, canonical_labels, same_partition
from .coreset import Coreset, build_multiplicative_coreset, check_multiplicative_property, solve_via_coreset
from .dp import CostTable, fill_table, reconstruct, solve_dp
from .errors import BudgetError, InfeasibleError, ParameterError, StableClusterError, UnsupportedEngineError
from .geometry import (
    EUCLIDEAN,
    L1,
    DirectionSet,
    MetricKind,
    MetricSpec,
    Objective,
    build_direction_set,
    distance,
    pairwise,
    read_points_csv,
    resolve_metric,
    write_points_csv,
)
from .local_search import (
    best_1swap,
    classify_swap_diagnostics,
    local_search_kmedian,
    swap_cost_accelerated,
    swap_cost_naive,
)
from .l1_subdivision import RangeIndex, build_swap_subdivision, trapezoid_sum
from .mst import MergeTree, SpanningTree, build_merge_tree, minimum_spanning_tree
from .one_clustering import (
    CenterAccumulator,
    MeanAccumulator,
    MedianStructure,
    cost_1center,
    cost_1mean,
    cost_1median,
    make_median_accumulator,
)
from .oracle import brute_force_optimal
from .seeding import gonzalez_kcenter
from .stability import (
    StableInstance,
    certify,
    generate_stable_instance,
    perturbation_trial,
    perturbed_distances,
    spread,
    verify_center_proximity,
    verify_separation,
)

__version__ = "0.1.0"
