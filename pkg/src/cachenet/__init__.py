"""Coded caching over two-hop helper networks: placement, XOR delivery,
routing LPs, and reuse/avalanche scheduling under collision interference."""

from .avalanche import ScheduleTrace, avalanche_run, replay_violations
from .collision import (
    Association,
    Coloring,
    ExactSolveUnavailable,
    associate_exact,
    associate_greedy,
    associate_random,
    color_dsatur,
    color_exact,
    reuse_delivery_time,
)
from .harness import ExperimentConfig, ResultRecord, run_experiment, summarize
from .model import (
    CacheAssignment,
    CacheScheme,
    LibraryParams,
    assign_caches,
    man_load,
    subpacketize,
)
from .multiround import (
    DeliveryArray,
    append_user,
    build_delivery_array,
    delivery_epochs,
    multiround_load,
    round_xor_count,
)
from .scenario import (
    CollisionGraph,
    Layout,
    TopologicalGraph,
    build_collision_graph,
    build_helper_conflict_graph,
    build_topological_graph,
    generate_layout,
)
from .topo import (
    RoutingSolution,
    solve_centralized_routing,
    solve_multiround_routing,
    solve_new_decentralized_routing,
)

__version__ = "0.1.0"
