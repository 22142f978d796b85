"""Truncated-spectrum regularization: keep the m leading eigen-directions on each side."""

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
    filtered_operator,
)
from .errors import InvalidParameter, StraddleError
from .operators import DEFAULT_RANK_TOL, EigenSystem, LinOp, hs_norm, spectral_sum


def _leading_groups(E: EigenSystem, m: int, rank_tol: float = DEFAULT_RANK_TOL) -> list[int]:
    """Indices of the eigen-groups that make up the m leading eigenvalues."""
    m = int(m)
    r = E.rank(rank_tol)
    if not 1 <= m <= r:
        raise InvalidParameter(f"m = {m} outside 1..{r} (retained rank)")
    count, groups = 0, []
    for h, g in enumerate(E.groups):
        if count >= m:
            break
        groups.append(h)
        count += g.multiplicity
        if count > m:
            raise StraddleError(
                f"m = {m} splits eigen-group {h} (indices {g.indices[0] + 1}..{g.indices[-1] + 1}, "
                f"eigenvalue {g.value:.6g})"
            )
    return groups


def cumulative_projection(E: EigenSystem, m: int, rank_tol: float = DEFAULT_RANK_TOL) -> LinOp:
    """``Pi(m)``: sum of the eigenprojections of the m leading eigenvalues."""
    return spectral_sum(E, _leading_groups(E, m, rank_tol))


def truncation_filter(E: EigenSystem, m: int, alpha: float = 0.0) -> np.ndarray:
    """``1 / (lambda + alpha)`` on the m leading eigenvalues, 0 elsewhere."""
    _leading_groups(E, m)
    h = np.zeros(E.eigenvalues.size)
    h[:m] = 1.0 / (E.eigenvalues[:m] + alpha)
    return h


@dataclass(frozen=True, eq=False)
class TsvdOperator:
    """``Pi1(m) S12 S2(m)^+ S21 S1(m)^+`` with its cumulative projections."""

    m: int
    op: LinOp
    sym: LinOp
    eig: SpectralSystem
    pi1: LinOp
    pi2: LinOp
    filtered: FilteredOperator
    alpha: float = 0.0
    distance_to_tsvd: float = 0.0

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.eigenvalues


def _build(C: BlockCovariance, m: int, alpha: float, eig1=None, eig2=None) -> TsvdOperator:
    E1 = C.eig1() if eig1 is None else eig1
    E2 = C.eig2() if eig2 is None else eig2
    F = filtered_operator(C, truncation_filter(E1, m, alpha), truncation_filter(E2, m, alpha), E1, E2)
    return TsvdOperator(int(m), F.op, F.sym, F.spectral, cumulative_projection(E1, m), cumulative_projection(E2, m), F, alpha)


def s1_m(C: BlockCovariance, m: int, eig1: EigenSystem | None = None, eig2: EigenSystem | None = None) -> TsvdOperator:
    """TSVD side-1 operator with the same m on both sides."""
    return _build(C, m, 0.0, eig1, eig2)


def cca_tsvd(
    C: BlockCovariance,
    m: int,
    k_max: int | None = None,
    reference: CCAResult | None = None,
    eig1: EigenSystem | None = None,
    eig2: EigenSystem | None = None,
) -> CCAResult:
    """Canonical correlations ``rho_k(m)``; at most m are reported."""
    T = s1_m(C, m, eig1, eig2)
    K = m if k_max is None else min(k_max, m)
    return cca_from_operator(T.filtered, K, {"method": "tsvd", "m": int(m)}, reference)


def sweep_m(C: BlockCovariance, ms: Sequence[int], reference: CCAResult, k_max: int | None = None) -> ConvergenceTable:
    """Convergence diagnostics along increasing truncation levels."""
    ms = [int(m) for m in ms]
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise InvalidParameter("ms must be strictly increasing")
    E1, E2 = C.eig1(), C.eig2()
    table = ConvergenceTable("m")
    for m in ms:
        K = m if k_max is None else min(k_max, m)
        res = cca_tsvd(C, m, K, reference, E1, E2)
        compare_to_reference(table, m, res, reference)
    return table


def truncated_tikhonov(C: BlockCovariance, alpha: float, m: int, eig1: EigenSystem | None = None, eig2: EigenSystem | None = None) -> TsvdOperator:
    """Hybrid operator with ``S_i(alpha, m) = (S_i + alpha I) Pi_i(m)``.

    ``distance_to_tsvd`` is ``||S1(alpha, m) - S1(m)||_HS``.
    """
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    E1 = C.eig1() if eig1 is None else eig1
    E2 = C.eig2() if eig2 is None else eig2
    T = _build(C, m, float(alpha), E1, E2)
    dist = hs_norm(T.op - s1_m(C, m, E1, E2).op)
    return TsvdOperator(T.m, T.op, T.sym, T.eig, T.pi1, T.pi2, T.filtered, float(alpha), dist)


def cca_truncated_tikhonov(C: BlockCovariance, alpha: float, m: int, k_max: int | None = None, reference: CCAResult | None = None) -> CCAResult:
    T = truncated_tikhonov(C, alpha, m)
    K = m if k_max is None else min(k_max, m)
    return cca_from_operator(T.filtered, K, {"method": "truncated_tikhonov", "alpha": float(alpha), "m": int(m)}, reference)


def hybrid_comparison(C: BlockCovariance, target: LinOp, alpha: float, m: int) -> dict:
    """HS errors of the hybrid and the pure TSVD operator against a target.

    Reported side by side; neither ordering is assumed.
    """
    hybrid = truncated_tikhonov(C, alpha, m)
    pure = s1_m(C, m)
    return {
        "alpha": float(alpha),
        "m": int(m),
        "hybrid_error": hs_norm(hybrid.op - target),
        "tsvd_error": hs_norm(pure.op - target),
        "hybrid_to_tsvd": hybrid.distance_to_tsvd,
    }
