"""Sample covariance blocks and sample versions of the regularized estimators."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cca_core import (
    BlockCovariance,
    CCAResult,
    cca_from_operator,
    filtered_operator,
    unregularized_filter,
)
from .errors import InsufficientSample, InvalidArgument, UndefinedScore
from .grid_core import FunctionVec
from .model_sim import SamplePaths
from .operators import DEFAULT_RANK_TOL, LinOp
from .rkhs import psi_score, source_scores
from .tikhonov import cca_tikhonov
from .tsvd import cca_truncated_tikhonov, cca_tsvd


@dataclass(frozen=True, eq=False)
class SampleCovariance:
    blocks: BlockCovariance
    n: int
    mean1: FunctionVec
    mean2: FunctionVec


def sample_covariance(paths: SamplePaths) -> SampleCovariance:
    """Centered sample covariance blocks with 1/n normalization."""
    n = paths.n
    if n < 2:
        raise InsufficientSample(f"need at least 2 paths, got {n}")
    g1, g2 = paths.grid1, paths.grid2
    m1, m2 = paths.x1.mean(axis=0), paths.x2.mean(axis=0)
    x1, x2 = paths.x1 - m1, paths.x2 - m2
    # onb coordinates: rows scaled by sqrt(w)
    y1 = x1 * np.sqrt(g1.weights)[None, :]
    y2 = x2 * np.sqrt(g2.weights)[None, :]
    s1 = y1.T @ y1 / n
    s2 = y2.T @ y2 / n
    s12 = y1.T @ y2 / n
    blocks = BlockCovariance(
        LinOp.from_onb(g1, g1, 0.5 * (s1 + s1.T)),
        LinOp.from_onb(g2, g2, 0.5 * (s2 + s2.T)),
        LinOp.from_onb(g2, g1, s12),
    )
    return SampleCovariance(blocks, n, FunctionVec(g1, m1), FunctionVec(g2, m2))


def _blocks(data: SamplePaths | SampleCovariance) -> BlockCovariance:
    return data.blocks if isinstance(data, SampleCovariance) else sample_covariance(data).blocks


def fit_tikhonov(data: SamplePaths | SampleCovariance, alpha: float, k_max: int | None = None, reference: CCAResult | None = None) -> CCAResult:
    """Sample Tikhonov canonical correlations."""
    return cca_tikhonov(_blocks(data), alpha, k_max, reference)


def fit_tsvd(data: SamplePaths | SampleCovariance, m: int, k_max: int | None = None, reference: CCAResult | None = None) -> CCAResult:
    """Sample TSVD canonical correlations (same m on both sides)."""
    return cca_tsvd(_blocks(data), m, k_max, reference)


def fit_truncated_tikhonov(data: SamplePaths | SampleCovariance, alpha: float, m: int, k_max: int | None = None, reference: CCAResult | None = None) -> CCAResult:
    return cca_truncated_tikhonov(_blocks(data), alpha, m, k_max, reference)


def fit_unregularized(data: SamplePaths | SampleCovariance, rank_tol: float = DEFAULT_RANK_TOL, k_max: int | None = None) -> CCAResult:
    """Pseudoinverse canonical correlations with no regularization.

    When the two sample ranks add up to more than ``n - 1``, the centered
    sample spaces must intersect and the leading correlation is 1 whatever
    the population. ``degenerate`` reports that condition.
    """
    C = _blocks(data)
    n = data.n
    h = unregularized_filter(rank_tol)
    F = filtered_operator(C, h, h)
    r1, r2 = F.eig1.rank(rank_tol), F.eig2.rank(rank_tol)
    K = min(r1, r2) if k_max is None else k_max
    res = cca_from_operator(F, max(K, 1), {"method": "unregularized"})
    return replace(res, degenerate=bool(r1 + r2 > n - 1))


def canonical_scores(result: CCAResult, paths: SamplePaths, ks: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Canonical variables ``U_k = Psi1(f_k)``, ``V_k = Psi2(g_k)`` per path (n x K).

    ``ks`` are zero-based component indices; by default every component with
    defined weights is returned.
    """
    if ks is None:
        ks = [k for k, w in enumerate(result.weights2) if w is not None]
    u = np.empty((paths.n, len(ks)))
    v = np.empty((paths.n, len(ks)))
    for col, k in enumerate(ks):
        if k >= len(result.weights1):
            raise InvalidArgument(f"component {k} was not computed")
        f, g = result.weights1[k], result.weights2[k]
        if f is None or g is None:
            raise UndefinedScore(f"weights for component {k} are undefined (rho ~ 0)")
        u[:, col] = psi_score(f, source_scores(paths.x1, f.source, f.rank))
        v[:, col] = psi_score(g, source_scores(paths.x2, g.source, g.rank))
    return u, v
