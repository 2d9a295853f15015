"""Sparse M-matrix precision estimation by bridge-block decomposition.

The thresholded sample covariance determines a graph whose bridges split
the estimation problem into independent sub-problems, one per cluster of
the bridge-block decomposition. Each is solved on its own and the global
optimum is assembled from the pieces in closed form.
"""

from .assembler import (
    AssembledSolution,
    EstimationReport,
    assemble,
    bridge_entry,
    closed_form_acyclic,
    estimate,
    structured_logdet,
    structured_objective,
    zeta,
)
from .exceptions import (
    AssumptionViolated,
    DegenerateDenominator,
    MaxIterationsExceeded,
    NotAcyclic,
    NotPositiveDefinite,
    OracleTimeout,
    PartitionMismatch,
    SameCluster,
)
from .extensions import (
    VertexPartition,
    check_glasso_condition,
    glasso_threshold,
    read_partition,
    singleton_closed_form,
    warm_start,
    warm_start_or_diagonal,
    write_partition,
)
from .graph import (
    BridgeBlockPartition,
    BridgeTree,
    ThresholdedMatrix,
    UndirectedGraph,
    bridge_block_decomposition,
    bridge_path,
    check_assumption,
    connected_components,
    find_bridges,
    support_graph,
    threshold,
)
from .matrix_core import SpdFactorization, factorize, invert, logdet, objective
from .subsolver import SolverConfig, SubSolution, kkt_residual, solve_subproblem
from .synthetic import (
    GeneratorConfig,
    SyntheticInstance,
    build_regularizer,
    community_regularizer,
    make_instance,
    ratio_of_improvement,
    relative_error,
)
from .verifier import (
    InverseWitness,
    build_R,
    dense_oracle,
    path_product_identity_check,
    verify_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledSolution",
    "AssumptionViolated",
    "BridgeBlockPartition",
    "BridgeTree",
    "DegenerateDenominator",
    "EstimationReport",
    "GeneratorConfig",
    "InverseWitness",
    "MaxIterationsExceeded",
    "NotAcyclic",
    "NotPositiveDefinite",
    "OracleTimeout",
    "PartitionMismatch",
    "SameCluster",
    "SolverConfig",
    "SpdFactorization",
    "SubSolution",
    "SyntheticInstance",
    "ThresholdedMatrix",
    "UndirectedGraph",
    "VertexPartition",
    "assemble",
    "bridge_block_decomposition",
    "bridge_entry",
    "bridge_path",
    "build_R",
    "build_regularizer",
    "check_assumption",
    "check_glasso_condition",
    "closed_form_acyclic",
    "community_regularizer",
    "connected_components",
    "dense_oracle",
    "estimate",
    "factorize",
    "find_bridges",
    "glasso_threshold",
    "invert",
    "kkt_residual",
    "logdet",
    "make_instance",
    "objectiveSolverConfig",
    "objective",
    "path_product_identity_check",
    "ratio_of_improvement",
    "read_partition",
    "relative_error",
    "singleton_closed_form",
    "solve_subproblem",
    "structured_logdet",
    "structured_objective",
    "support_graph",
    "threshold",
    "verify_inverse",
    "warm_start",
    "warm_start_or_diagonal",
    "write_partition",
    "zeta",
]
