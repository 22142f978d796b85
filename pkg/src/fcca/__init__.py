"""Regularized canonical correlation analysis for pairs of random functions."""

from .cca_core import BlockCovariance, CCAResult, population_cca
from .estimation import fit_tikhonov, fit_truncated_tikhonov, fit_tsvd, fit_unregularized, sample_covariance
from .grid_core import FunctionVec, Grid
from .model_sim import ProcessModel, decaying_model, population_operators, random_model, sample_paths, toy_model_2
from .operators import LinOp, eig_self_adjoint
from .tikhonov import cca_tikhonov, s1_alpha, sweep_alpha
from .tsvd import cca_tsvd, s1_m, sweep_m

__version__ = "0.1.0"

__all__ = [
    "BlockCovariance",
    "CCAResult",
    "FunctionVec",
    "Grid",
    "LinOp",
    "ProcessModel",
    "cca_tikhonov",
    "cca_tsvd",
    "decaying_model",
    "eig_self_adjoint",
    "fit_tikhonov",
    "fit_truncated_tikhonov",
    "fit_tsvd",
    "fit_unregularized",
    "population_cca",
    "population_operators",
    "random_model",
    "s1_alpha",
    "s1_m",
    "sample_covariance",
    "sample_paths",
    "sweep_alpha",
    "sweep_m",
    "toy_model_2",
]
