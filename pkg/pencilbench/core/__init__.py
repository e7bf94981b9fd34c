"""Core Numerical Engines

Tensors and CPDs, matrix contracts, the pencil-based algorithm, ALS
refinement, conditioning and error metrics.
"""

from .als_engine import AlsConfig, AlsRefiner, AlsResult, als_refine
from .conditioning import (
    ConditionReport, RNiceReport, TerraciniMatrix, check_r_nice, condition_number,
    kruskal_rank, limiting_ccdf, pair_lower_bound, tangent_basis, terracini_matrix
)
from .linalg import (
    UNIT_ROUNDOFF, PencilEig, fix_signs, orthonormal_complement, orthonormalize,
    pseudoinverse, singular_values, solve_pencil, svd
)
from .metrics import (
    MatchMethod, MatchResult, excess_factor, forward_error, match_columns, representation_backward_norm
)
from .pba_engine import (
    PbaConfig, PbaReport, PencilBasedAlgorithm, ProjectionStrategy, choose_projection,
    pba_decompose, pba_decompose_projected, st_hosvd_compress
)
from .tensor_core import (
    Cpd, Rank1Fit, Rank1Term, Tensor3, best_rank1, flatten, khatri_rao,
    multilinear_multiply, rank1_inner, reconstruct
)

__all__ = [
    # Tensors
    "Tensor3",
    "Rank1Term",
    "Cpd",
    "Rank1Fit",
    "reconstruct",
    "flatten",
    "khatri_rao",
    "multilinear_multiply",
    "rank1_inner",
    "best_rank1",
    # Linear algebra
    "UNIT_ROUNDOFF",
    "PencilEig",
    "svd",
    "singular_values",
    "orthonormalize",
    "orthonormal_complement",
    "pseudoinverse",
    "fix_signs",
    "solve_pencil",
    # PBA
    "ProjectionStrategy",
    "PbaConfig",
    "PbaReport",
    "PencilBasedAlgorithm",
    "choose_projection",
    "st_hosvd_compress",
    "pba_decompose",
    "pba_decompose_projected",
    # Refinement
    "AlsConfig",
    "AlsResult",
    "AlsRefiner",
    "als_refine",
    # Conditioning
    "TerraciniMatrix",
    "ConditionReport",
    "RNiceReport",
    "tangent_basis",
    "terracini_matrix",
    "condition_number",
    "pair_lower_bound",
    "kruskal_rank",
    "check_r_nice",
    "limiting_ccdf",
    # Metrics
    "MatchMethod",
    "MatchResult",
    "match_columns",
    "forward_error",
    "representation_backward_norm",
    "excess_factor",
]
