"""Optimal low-rank approximation of linear maps in Schatten norms.

Closed-form rank-constrained regression ``min ||Y - M X||_{S,p}`` with
weighted, kernel (Gram-matrix) and quadrature-discretized variants, plus
brute-force oracles that check the closed form empirically.
"""

__version__ = "0.1.0"

from .errors import (
    DimensionMismatch,
    InputError,
    KernelEvalFailure,
    LowRankError,
    NonConvergence,
    NotConverged,
    NotPsd,
    NotSymmetric,
    NumericalError,
    ParseError,
    RaggedRows,
    SingularSubproblemWarning,
    TooFewSnapshots,
)
from .linalg import (
    SvdFactors,
    ToleranceConfig,
    numerical_rank,
    pinv,
    psd_sqrt,
    schatten_norm,
    svd,
)
from .solver import (
    LowRankSolution,
    build_z,
    predicted_error,
    projector_topk,
    solve_lowrank,
    solve_weighted,
)
from .dmd import SnapshotSeries, SpectralSummary, dmd_modes, lowrank_dmd, snapshot_pairs, unconstrained_dmd
from .kernel import KernelSolution, KernelSpec, eigenfunction_eval, gram, kernel_lowrank_solve
from .continuous import (
    HsKernel,
    QuadratureRule,
    composite_trapezoid,
    continuous_lowrank,
    discretize_hs,
    gauss_legendre,
    refine_to_convergence,
)
from .oracle import (
    OracleReport,
    als_refine,
    consistency_report,
    eckart_young_reference,
    optimality_certificate,
    random_rank_k_search,
)
