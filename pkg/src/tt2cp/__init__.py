"""CP decomposition of high-order tensors through their tensor-train form."""
from .convert import (
    ConversionWarning,
    PermScale,
    kt_to_tt,
    match_permutation,
    tt_to_cp_exact,
    tt_to_cp_sequential,
    tt_to_kt_full,
)
from .cpd3 import Cpd3Options, DTLDError, best_rank1, cp_als, cp_als3, dtld
from .fit import ContractionCache, FitOptions, fast_cost, fit_tt2cp, structured_gradient
from .kernels import BACKEND
from .report import FitReport, Termination
from .tensor_core import (
    KruskalTensor,
    ShapeError,
    TTTensor,
    fold,
    khatri_rao,
    kruskal_full,
    tt_full,
    unfold,
)
from .tt import GroupedTT, TTOptions, regroup_for_sequential, tt_norm, tt_svd

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConversionWarning",
    "ContractionCache",
    "Cpd3Options",
    "DTLDError",
    "FitOptions",
    "FitReport",
    "GroupedTT",
    "KruskalTensor",
    "PermScale",
    "ShapeError",
    "TTOptions",
    "TTTensor",
    "Termination",
    "best_rank1",
    "cp_als",
    "cp_als3",
    "dtld",
    "fast_cost",
    "fit_tt2cp",
    "fold",
    "khatri_rao",
    "kruskal_full",
    "kt_to_tt",
    "match_permutation",
    "regroup_for_sequential",
    "structured_gradient",
    "tt_full",
    "tt_norm",
    "tt_svd",
    "tt_to_cp_exact",
    "tt_to_cp_sequential",
    "tt_to_kt_full",
    "unfold",
]
