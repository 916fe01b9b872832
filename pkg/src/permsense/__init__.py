"""permsense: vector estimation from sparsely shuffled linear measurements
with a few trusted correspondences."""

from .errors import (
    ConfigInvalid,
    DegenerateDenominator,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidSparsity,
    NoConvergence,
    PermsenseError,
    RankDeficient,
    ZeroReference,
)
from .model import (
    ProblemConfig,
    ProblemInstance,
    SparsePermutation,
    generate_instance,
    noise_sigma_from_percent,
    permutation_error_vector,
    sample_sparse_permutation,
)
from .solver import (
    EstimateResult,
    EstimatorConfig,
    estimate_joint_altmin,
    estimate_two_stage,
    lambda_from_theorem,
    lasso_projected,
    robust_regression,
    soft_threshold,
)
from .theory import BoundParams, BoundResult, lemma_empirical_check, theorem1_bound

__version__ = "0.1.0"

__all__ = [
    "BoundParams",
    "BoundResult",
    "ConfigInvalid",
    "DegenerateDenominator",
    "DimensionMismatch",
    "EstimateResult",
    "EstimatorConfig",
    "IndexOutOfRange",
    "InvalidSparsity",
    "NoConvergence",
    "PermsenseError",
    "ProblemConfig",
    "ProblemInstance",
    "RankDeficient",
    "SparsePermutation",
    "ZeroReference",
    "estimate_joint_altmin",
    "estimate_two_stage",
    "generate_instance",
    "lambda_from_theorem",
    "lasso_projected",
    "lemma_empirical_check",
    "noise_sigma_from_percent",
    "permutation_error_vector",
    "robust_regression",
    "sample_sparse_permutation",
    "soft_threshold",
    "theorem1_bound",
]
