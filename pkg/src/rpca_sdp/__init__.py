"""Robust principal components via semidefinite rounding and low-leverage decomposition."""

__version__ = "0.1.0"

from .baselines import nl1_components, nl1_solve, pca_components, sph_components, shrink_entries
from .core import (
    ComponentSet,
    HouseholderStack,
    compact_svd,
    householder_reduce,
    lift_component,
    norm_2to1_bruteforce,
    norm_inf_to_1_bruteforce,
    truncated_svd,
)
from .exceptions import (
    ConvergenceError,
    DegenerateColumnError,
    DegenerateRowError,
    DegenerateTrialError,
    InvalidArgumentError,
    InvalidInputError,
    RankDeficientError,
    ResourceLimitError,
    RpcaError,
)
from .lld import LldOptions, gamma_heuristic, lld_components, lld_solve, shrink_rows, shrink_spectral
from .mdr import CgParams, bm_objective, mdr_components, mdr_top_component, round_once, solve_sdp_bm
from .robust_stats import box_stats, center_rows, euclidean_median, leverage_scores, madn, surface_distances
