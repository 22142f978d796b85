"""Reproducing kernel Hilbert space of a covariance operator.

Elements are stored through their Fourier coefficients ``c_j = <f, phi_j>``
against the retained eigenfunctions of the generating operator S. In that
convention ``||f||^2_H = sum c_j^2 / lambda_j``. Writing ``f = sum lambda_j
f_j phi_j`` instead gives ``f_j = c_j / lambda_j`` and ``||f||^2_H = sum
lambda_j f_j^2``; both forms appear below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument, OutOfRange
from .grid_core import FunctionVec, check_same_grid
from .operators import DEFAULT_RANK_TOL, EigenSystem, LinOp

RANGE_TOL = 1e-8


class PicardResult(NamedTuple):
    norm2: float
    in_range: bool
    residual: float


def _retained(S: EigenSystem, rank_tol: float) -> int:
    return S.rank(rank_tol)


def _coefficients(f: FunctionVec, S: EigenSystem, r: int) -> tuple[np.ndarray, float]:
    check_same_grid(f.grid, S.grid)
    phi = S.vectors[:, :r]
    c = phi.T @ (f.grid.weights * f.values)
    resid = f.values - phi @ c
    return c, float(np.sqrt(max(np.dot(f.grid.weights * resid, resid), 0.0)))


@dataclass(frozen=True, eq=False)
class RkhsElement:
    """A function in H(K) for the kernel of ``source``."""

    base: FunctionVec
    source: EigenSystem
    coeffs: np.ndarray

    @property
    def rank(self) -> int:
        return self.coeffs.size

    @property
    def lam(self) -> np.ndarray:
        return self.source.eigenvalues[: self.rank]

    @property
    def kl_coeffs(self) -> np.ndarray:
        """Coefficients ``f_j`` in ``f = sum lambda_j f_j phi_j``."""
        return self.coeffs / self.lam

    def norm(self) -> float:
        return float(np.sqrt(rkhs_inner(self, self)))

    def __mul__(self, c: float) -> "RkhsElement":
        return RkhsElement(self.base * c, self.source, c * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "RkhsElement":
        return self * -1.0

    def __add__(self, other: "RkhsElement") -> "RkhsElement":
        _check_source(self, other)
        return RkhsElement(self.base + other.base, self.source, self.coeffs + other.coeffs)

    def __sub__(self, other: "RkhsElement") -> "RkhsElement":
        return self + (-other)


def _check_source(f: RkhsElement, g: RkhsElement) -> None:
    if f.source is not g.source or f.rank != g.rank:
        raise InvalidArgument("RKHS elements come from different generating operators")


def rkhs_element(f: FunctionVec, S: EigenSystem, rank_tol: float = DEFAULT_RANK_TOL, strict: bool = True) -> RkhsElement:
    """Wrap ``f`` as an element of H(K); reject it when it leaves the retained span."""
    r = _retained(S, rank_tol)
    c, resid = _coefficients(f, S, r)
    if strict and resid > RANGE_TOL * max(f.norm(), 1e-300):
        raise OutOfRange(f"residual {resid:.3e} outside the range of the covariance operator")
    base = FunctionVec(f.grid, S.vectors[:, :r] @ c)
    return RkhsElement(base, S, c)


def from_kl_coeffs(S: EigenSystem, fj: Sequence[float]) -> RkhsElement:
    """Element ``sum_j lambda_j f_j phi_j`` over the leading eigenfunctions."""
    fj = np.asarray(fj, dtype=float)
    r = fj.size
    c = S.eigenvalues[:r] * fj
    return RkhsElement(FunctionVec(S.grid, S.vectors[:, :r] @ c), S, c)


def picard_norm(f: FunctionVec, S: EigenSystem, rank_tol: float = DEFAULT_RANK_TOL) -> PicardResult:
    """Picard sum over the retained spectrum and the range-membership flag."""
    r = _retained(S, rank_tol)
    c, resid = _coefficients(f, S, r)
    norm2 = float(np.sum(c**2 / S.eigenvalues[:r]))
    return PicardResult(norm2, resid <= RANGE_TOL * max(f.norm(), 1e-300), resid)


def rkhs_inner(f: RkhsElement, g: RkhsElement) -> float:
    _check_source(f, g)
    return float(np.sum(f.coeffs * g.coeffs / f.lam))


def rkhs_norm(f: RkhsElement) -> float:
    return f.norm()


def kernel_section(S: EigenSystem, index: int, rank_tol: float = DEFAULT_RANK_TOL) -> RkhsElement:
    """``K(., s)`` for the grid point with the given index."""
    r = _retained(S, rank_tol)
    phi = S.vectors[:, :r]
    c = S.eigenvalues[:r] * phi[index]
    return RkhsElement(FunctionVec(S.grid, phi @ c), S, c)


def gamma_apply(g: FunctionVec, S: EigenSystem, rank_tol: float = DEFAULT_RANK_TOL) -> RkhsElement:
    """Isometry from ker(S)-perp onto H(K): scale coefficients by sqrt(lambda)."""
    r = _retained(S, rank_tol)
    c, resid = _coefficients(g, S, r)
    if resid > RANGE_TOL * max(g.norm(), 1e-300):
        raise OutOfRange(f"argument has mass {resid:.3e} in the null space of S")
    out = np.sqrt(S.eigenvalues[:r]) * c
    return RkhsElement(FunctionVec(S.grid, S.vectors[:, :r] @ out), S, out)


def gamma_inv(f: RkhsElement) -> FunctionVec:
    """Inverse of ``gamma_apply``: divide coefficients by sqrt(lambda)."""
    c = f.coeffs / np.sqrt(f.lam)
    return FunctionVec(f.source.grid, f.source.vectors[:, : f.rank] @ c)


def source_scores(values: np.ndarray, S: EigenSystem, rank: int) -> np.ndarray:
    """Scores ``<X, phi_j>`` of sampled paths (rows) on the leading eigenfunctions."""
    values = np.atleast_2d(values)
    return (values * S.grid.weights[None, :]) @ S.vectors[:, :rank]


def psi_score(f: RkhsElement, path_scores: np.ndarray) -> np.ndarray | float:
    """Canonical variable ``sum_j f_j Z_j`` for one path or a stack of paths.

    ``path_scores`` holds ``Z_j = <X, phi_j>`` against the eigenfunctions of
    ``f.source`` (last axis of length ``f.rank``).
    """
    z = np.asarray(path_scores, dtype=float)
    if z.shape[-1] != f.rank:
        raise InvalidArgument(f"expected {f.rank} scores per path, got {z.shape[-1]}")
    out = z @ f.kl_coeffs
    return float(out) if np.ndim(out) == 0 else out


def psi_quadrature(f: RkhsElement, values: np.ndarray) -> np.ndarray:
    """The same canonical variable computed as ``<X, S^+ f>`` by quadrature."""
    values = np.atleast_2d(values)
    return (values * f.source.grid.weights[None, :]) @ (f.source.vectors[:, : f.rank] @ f.kl_coeffs)


def express_in(f: RkhsElement, S: EigenSystem, rank: int | None = None) -> RkhsElement:
    """Re-express an element against another generating operator on the same grid."""
    r = S.rank() if rank is None else rank
    c, _ = _coefficients(f.base, S, r)
    return RkhsElement(FunctionVec(S.grid, S.vectors[:, :r] @ c), S, c)


def transported_projection(elements: Sequence[RkhsElement]) -> LinOp:
    """Orthogonal projection onto ``span(elements)`` carried to L2 through Gamma^{-1}.

    HS distances between such projections equal HS distances between the
    corresponding projections in H(K).
    """
    if not elements:
        raise InvalidArgument("need at least one element")
    grid = elements[0].source.grid
    vecs = np.column_stack([np.sqrt(grid.weights) * gamma_inv(e).values for e in elements])
    q, r = np.linalg.qr(vecs)
    keep = np.abs(np.diag(r)) > 1e-12 * max(np.abs(np.diag(r)).max(), 1e-300)
    q = q[:, keep]
    return LinOp.from_onb(grid, grid, q @ q.T)
