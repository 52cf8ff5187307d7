"""Sparse-recovery algorithms: OMP, BP-denoise, fast BCS, and the
prior-exploiting multi-station variant."""

from .backend import available_kernels, get_kernel, kernel_name
from .bp import bp_denoise
from .engine import COUPLING_STRATEGIES, CsUwbSolver, bcs, cs_uwb
from .omp import RankDeficientError, omp
from .types import BcsState, ReconResult, TemplateDictionary, recon_percentage

__all__ = [
    "omp",
    "bp_denoise",
    "bcs",
    "cs_uwb",
    "CsUwbSolver",
    "COUPLING_STRATEGIES",
    "RankDeficientError",
    "BcsState",
    "ReconResult",
    "TemplateDictionary",
    "recon_percentage",
    "get_kernel",
    "kernel_name",
    "available_kernels",
]
