"""Free Carnot groups, path signatures and log-signature densities of fractional Brownian motion."""

from .cameron_martin import GridFunction, cm_norm_discrete, dirichlet_norm, rescale_check
from .chow import (
    ChowSolveError,
    DistanceEstimate,
    cc_norm_estimate,
    chow_path,
    controlling_distance,
    distance_equivalence_scan,
    second_kind_solve,
)
from .density import (
    DensityEstimate,
    LogSigSampleSet,
    kde_density,
    local_lower_bound_check,
    mc_logsig_samples,
    scaling_check,
    scaling_exponent,
    tail_check,
    varadhan_check,
)
from .estimators import LogSignature, LogSignatureKDE
from .fbm import FbmBatch, fbm_cov, sample_fbm_cholesky, sample_fbm_circulant
from .free_lie import HallBasis, NotLieElementError, build_hall_basis, hausdorff_dim, layer_dims
from .group import GroupElement, dilate, group_inv, group_mul, homogeneous_norm
from .signature import PLPath, chen_strichartz_logsig, log_sig_pl_path, sig_pl_path
from .tensor import TruncatedTensor, tensor_exp, tensor_log, tensor_mul

__version__ = "0.1.0"

__all__ = [
    "ChowSolveError",
    "DensityEstimate",
    "DistanceEstimate",
    "FbmBatch",
    "GridFunction",
    "GroupElement",
    "HallBasis",
    "LogSigSampleSet",
    "LogSignature",
    "LogSignatureKDE",
    "NotLieElementError",
    "PLPath",
    "TruncatedTensor",
    "build_hall_basis",
    "cc_norm_estimate",
    "chen_strichartz_logsig",
    "chow_path",
    "cm_norm_discrete",
    "controlling_distance",
    "dilate",
    "dirichlet_norm",
    "distance_equivalence_scan",
    "fbm_cov",
    "group_inv",
    "group_mul",
    "hausdorff_dim",
    "homogeneous_norm",
    "kde_density",
    "layer_dims",
    "local_lower_bound_check",
    "log_sig_pl_path",
    "mc_logsig_samples",
    "rescale_check",
    "sample_fbm_cholesky",
    "sample_fbm_circulant",
    "scaling_check",
    "scaling_exponent",
    "second_kind_solve",
    "sig_pl_path",
    "tail_check",
    "tensor_exp",
    "tensor_log",
    "tensor_mul",
    "varadhan_check",
]
