"""Tikhonov-regularized canonical correlation: ``S + alpha I`` replaces S before inversion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cca_core import (
    BlockCovariance,
    CCAResult,
    ConvergenceTable,
    FilteredOperator,
    SpectralSystem,
    cca_from_operator,
    compare_to_reference,
    default_component_count,
    filtered_operator,
)
from .errors import InvalidParameter
from .operators import DEFAULT_GROUP_TOL, EigenSystem, LinOp


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    return alpha


def tikhonov_filter(alpha: float):
    """``h(lambda) = 1 / (lambda + alpha)``."""
    alpha = _check_alpha(alpha)
    return lambda lam: 1.0 / (np.clip(lam, 0.0, None) + alpha)


@dataclass(frozen=True, eq=False)
class TikhonovOperator:
    """``S12 (S2 + a I)^-1 S21 (S1 + a I)^-1`` with its spectral decomposition.

    ``op`` is self-adjoint for the inner product ``<x, (S1 + a I)^-1 y>``;
    ``sym`` is the congruent symmetric form sharing its spectrum.
    """

    alpha: float
    op: LinOp
    sym: LinOp
    eig: SpectralSystem
    companions: dict
    filtered: FilteredOperator

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.eigenvalues


def r_alpha(C: BlockCovariance, alpha: float) -> LinOp:
    """``(S1 + a I)^{-1/2} S12 (S2 + a I)^{-1/2}`` (grid2 -> grid1)."""
    alpha = _check_alpha(alpha)
    E1, E2 = C.eig1(), C.eig2()
    f = lambda lam: (np.clip(lam, 0.0, None) + alpha) ** -0.5
    return E1.function(f) @ C.s12 @ E2.function(f)


def s1_alpha(
    C: BlockCovariance,
    alpha: float,
    eig1: EigenSystem | None = None,
    eig2: EigenSystem | None = None,
    group_tol: float = DEFAULT_GROUP_TOL,
) -> TikhonovOperator:
    """Regularized side-1 operator; its eigenvalues are the squared correlations."""
    h = tikhonov_filter(alpha)
    F = filtered_operator(C, h, h, eig1, eig2, group_tol)
    companions = {"s1_inv": F.d(1), "s2_inv": F.d(2)}
    return TikhonovOperator(float(alpha), F.op, F.sym, F.spectral, companions, F)


def cca_tikhonov(
    C: BlockCovariance,
    alpha: float,
    k_max: int | None = None,
    reference: CCAResult | None = None,
    eig1: EigenSystem | None = None,
    eig2: EigenSystem | None = None,
) -> CCAResult:
    """Canonical correlations ``rho_k(alpha)`` and unit-RKHS-norm weights.

    With ``reference`` the weights are sign-aligned to it.
    """
    T = s1_alpha(C, alpha, eig1, eig2)
    K = default_component_count(C) if k_max is None else k_max
    return cca_from_operator(T.filtered, K, {"method": "tikhonov", "alpha": float(alpha)}, reference)


def sweep_alpha(C: BlockCovariance, alphas: Sequence[float], reference: CCAResult, k_max: int | None = None) -> ConvergenceTable:
    """Convergence of correlations, projections and weights as alpha decreases."""
    alphas = [_check_alpha(a) for a in alphas]
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise InvalidParameter("alphas must be strictly descending")
    E1, E2 = C.eig1(), C.eig2()
    K = reference.rho.size if k_max is None else k_max
    table = ConvergenceTable("alpha")
    for a in alphas:
        res = cca_tikhonov(C, a, K, reference, E1, E2)
        compare_to_reference(table, a, res, reference)
    return table
