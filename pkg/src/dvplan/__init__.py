"""Minimum delta-V multi-rendezvous itinerary planning.

Builds delta-V matrices between catalog objects from Lambert transfers,
adjusts them for stay and wait times, concatenates them with a
structure-preserving min-plus operator, and selects object sequences either
by pruned depth-first search or by a label-constrained shortest path on a
time-expanded graph -- two solvers that cross-validate each other.
"""

from .constants import AU_M, AU_PER_DAY_MS, DAY_S, SUN_MU
from .dvmatrix import (
    DvMatrix,
    GridSpec,
    augment_for_stay,
    build_porkchop,
    check_time_adjusted,
    concat_chain,
    deserialize,
    direct_concat,
    export_csv,
    export_pgm,
    matrix_min,
    serialize,
    stay_adjust,
    wait_adjust,
)
from .ephemeris import (
    Catalog,
    OrbitalElements,
    StateVector,
    parse_catalog,
    propagate_to_epoch,
    serialize_catalog,
    solve_kepler,
)
from .errors import (
    CapacityError,
    CatalogParseError,
    DegenerateGeometryError,
    DvPlanError,
    KeplerConvergenceError,
    LambertInfeasibleError,
    MatrixFormatError,
    SequenceNotFoundError,
    UnsupportedOrbitError,
    ValidationError,
)
from .graphsearch import (
    SequenceDfa,
    TimeExpandedGraph,
    build_sequence_dfa,
    build_time_expanded_graph,
    export_edge_list,
    k_shortest_unique,
    shortest_path_product,
)
from .lambert import TransferSolution, rendezvous_dv, rendezvous_solutions, solve_lambert
from .sequence import (
    Leg,
    SearchConfig,
    SequenceResult,
    budget_max_objects,
    dfs_best_sequences,
    format_report,
    recover_schedule,
    results_csv,
)

__version__ = "0.1.0"
