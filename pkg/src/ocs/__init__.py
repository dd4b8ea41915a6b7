"""Optimal contribution selection for seed orchards.

Maximize genetic gain subject to a group-coancestry cap, solved through
second-order cone programming built directly from pedigree structure.
See the README for the library tour and the CLI reference.
"""

__version__ = "0.1.0"

from .pedigree import (
    ParentGroups,
    Pedigree,
    PedigreeError,
    classify,
    parse_pedigree,
    write_pedigree,
)
from .kinship import (
    DenseLimitError,
    group_coancestry,
    henderson_weights,
    inbreeding,
    inverse_relationship,
    inverse_root,
    relationship_matrix,
)
from .factorization import (
    InverseFactor,
    NotPositiveDefiniteError,
    Permutation,
    dense_cholesky,
    fill_reducing_permutation,
    natural_order,
    sparse_cholesky,
)
from .formulation import (
    ConicProblem,
    InvalidInstanceError,
    RecoveryMap,
    SelectionInstance,
    build,
    build_compact,
    build_simple,
    build_sparse,
    recover_x,
    selection_instance,
    write_conic,
)
from .sdp import SdpProblem, build_sdp, export_sdpa, read_sdpa
from .solver import (
    ResidualReport,
    Solution,
    SolverConfig,
    Status,
    residuals,
    solve,
)
from .verify import (
    EquivalenceReport,
    GeneratorConfig,
    SplitMix64,
    cross_check,
    feasibility_check,
    generate_pedigree,
)

__all__ = [
    "__version__",
    "Pedigree",
    "PedigreeError",
    "ParentGroups",
    "parse_pedigree",
    "write_pedigree",
    "classify",
    "relationship_matrix",
    "inbreeding",
    "henderson_weights",
    "inverse_relationship",
    "inverse_root",
    "group_coancestry",
    "DenseLimitError",
    "dense_cholesky",
    "sparse_cholesky",
    "fill_reducing_permutation",
    "natural_order",
    "Permutation",
    "InverseFactor",
    "NotPositiveDefiniteError",
    "SelectionInstance",
    "selection_instance",
    "ConicProblem",
    "RecoveryMap",
    "recover_x",
    "build",
    "build_simple",
    "build_sparse",
    "build_compact",
    "write_conic",
    "InvalidInstanceError",
    "SdpProblem",
    "build_sdp",
    "export_sdpa",
    "read_sdpa",
    "Status",
    "SolverConfig",
    "Solution",
    "ResidualReport",
    "solve",
    "residuals",
    "SplitMix64",
    "GeneratorConfig",
    "generate_pedigree",
    "cross_check",
    "feasibility_check",
    "EquivalenceReport",
]
