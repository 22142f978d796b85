"""Linear operators between discretized L2 spaces and their spectral calculus.

A ``LinOp`` stores the matrix acting on sampled values, so ``(A f)(t_i) =
sum_j A_ij f(t_j)``. Inner products carry the quadrature weights, so the
adjoint is ``W_d^{-1} A' W_r`` and the orthonormal-coordinate form is
``W_r^{1/2} A W_d^{-1/2}``. Norms, traces and eigen-analysis are computed in
the orthonormal form, where self-adjoint means symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    InvalidArgument,
    InvalidParameter,
    NotPSD,
    NotSelfAdjoint,
    NumericalError,
    SingularShift,
)
from .grid_core import FunctionVec, Grid, check_same_grid

DEFAULT_GROUP_TOL = 1e-8
DEFAULT_RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LinOp:
    """Operator from ``domain`` to ``range`` stored as a value-coordinate matrix."""

    domain: Grid
    range: Grid
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix)
        if not np.iscomplexobj(mat):
            mat = mat.astype(float)
        if mat.shape != (self.range.size, self.domain.size):
            raise InvalidArgument(
                f"matrix shape {mat.shape} does not match grids "
                f"({self.range.size}, {self.domain.size})"
            )
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_onb(cls, domain: Grid, range: Grid, mat: np.ndarray) -> "LinOp":
        """Build from a matrix expressed in orthonormal coordinates."""
        return cls(domain, range, mat / np.sqrt(range.weights)[:, None] * np.sqrt(domain.weights)[None, :])

    @classmethod
    def identity(cls, grid: Grid) -> "LinOp":
        return cls(grid, grid, np.eye(grid.size))

    @classmethod
    def zeros(cls, domain: Grid, range: Grid | None = None) -> "LinOp":
        range = domain if range is None else range
        return cls(domain, range, np.zeros((range.size, domain.size)))

    @property
    def onb(self) -> np.ndarray:
        """Matrix in orthonormal coordinates of the weighted spaces."""
        return np.sqrt(self.range.weights)[:, None] * self.matrix / np.sqrt(self.domain.weights)[None, :]

    @property
    def is_square(self) -> bool:
        return self.domain.same_as(self.range)

    def apply(self, f: FunctionVec) -> FunctionVec:
        check_same_grid(self.domain, f.grid)
        return FunctionVec(self.range, self.matrix @ f.values)

    __call__ = apply

    def adjoint(self) -> "LinOp":
        adj = self.matrix.conj().T * self.range.weights[None, :] / self.domain.weights[:, None]
        return LinOp(self.range, self.domain, adj)

    @property
    def H(self) -> "LinOp":
        return self.adjoint()

    def __matmul__(self, other: "LinOp") -> "LinOp":
        if not isinstance(other, LinOp):
            return NotImplemented
        check_same_grid(self.domain, other.range)
        return LinOp(other.domain, self.range, self.matrix @ other.matrix)

    def _check_shape(self, other: "LinOp") -> None:
        check_same_grid(self.domain, other.domain)
        check_same_grid(self.range, other.range)

    def __add__(self, other: "LinOp") -> "LinOp":
        self._check_shape(other)
        return LinOp(self.domain, self.range, self.matrix + other.matrix)

    def __sub__(self, other: "LinOp") -> "LinOp":
        self._check_shape(other)
        return LinOp(self.domain, self.range, self.matrix - other.matrix)

    def __mul__(self, c) -> "LinOp":
        return LinOp(self.domain, self.range, c * self.matrix)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "LinOp":
        return LinOp(self.domain, self.range, self.matrix / c)

    def __neg__(self) -> "LinOp":
        return LinOp(self.domain, self.range, -self.matrix)

    @property
    def real(self) -> "LinOp":
        return LinOp(self.domain, self.range, self.matrix.real)

    def __repr__(self):
        return f"LinOp({self.range.size}x{self.domain.size})"


def hs_inner(A: LinOp, B: LinOp) -> float:
    """Hilbert-Schmidt inner product ``tr(A* B)``."""
    A._check_shape(B)
    val = np.sum(A.onb.conj() * B.onb)
    return float(val.real) if not np.iscomplexobj(val) or abs(val.imag) == 0 else complex(val)


def hs_norm(A: LinOp) -> float:
    return float(np.linalg.norm(A.onb))


def op_norm(A: LinOp) -> float:
    """Largest singular value under the weighted inner products."""
    if A.matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(A.onb, 2))


def symmetrized_onb(A: LinOp, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal-coordinate matrix of a self-adjoint operator, symmetrized."""
    if not A.is_square:
        raise InvalidArgument("self-adjoint operator must map a grid to itself")
    M = A.onb
    if np.iscomplexobj(M):
        raise InvalidArgument("expected a real operator")
    scale = np.linalg.norm(M)
    asym = np.linalg.norm(M - M.T)
    if asym > tol * max(scale, 1e-300):
        raise NotSelfAdjoint(f"||A - A*|| = {asym:.3e} exceeds {tol:g} * ||A|| = {tol * scale:.3e}")
    return 0.5 * (M + M.T)


def jacobi_eigh(M: np.ndarray, tol: float = 1e-13, max_sweeps: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-solver for a real symmetric matrix.

    Returns unsorted eigenvalues and orthonormal eigenvectors (columns). Stops
    when the off-diagonal Frobenius mass drops below ``tol * ||M||_F``.
    """
    a = np.array(M, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v
    for sweep in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300 or abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    raise NumericalError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


@dataclass(frozen=True, eq=False)
class EigenGroup:
    """A cluster of numerically equal eigenvalues and its eigenprojection."""

    indices: tuple[int, ...]
    value: float
    projection: LinOp

    @property
    def multiplicity(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral decomposition of a self-adjoint operator.

    ``vectors`` holds eigenfunctions as columns of sampled values; they are
    orthonormal under the grid's weighted inner product.
    """

    grid: Grid
    eigenvalues: np.ndarray
    vectors: np.ndarray
    groups: tuple[EigenGroup, ...]

    @property
    def eigenvectors(self) -> list[FunctionVec]:
        return [FunctionVec(self.grid, self.vectors[:, i]) for i in range(self.vectors.shape[1])]

    @property
    def onb_vectors(self) -> np.ndarray:
        return np.sqrt(self.grid.weights)[:, None] * self.vectors

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0

    def rank(self, rank_tol: float = DEFAULT_RANK_TOL) -> int:
        """Number of eigenvalues above ``rank_tol`` times the largest one."""
        s = self.scale
        return int(np.sum(self.eigenvalues > rank_tol * s)) if s > 0 else 0

    def function(self, fn: Callable[[np.ndarray], np.ndarray]) -> LinOp:
        """The operator ``fn(A)`` defined through the spectral decomposition."""
        return self.from_values(np.asarray(fn(self.eigenvalues)))

    def from_values(self, values: np.ndarray) -> LinOp:
        """Operator with the given value on each eigenvector."""
        q = self.onb_vectors
        return LinOp.from_onb(self.grid, self.grid, (q * values[None, :]) @ q.T)

    def group_of(self, index: int) -> int:
        for h, g in enumerate(self.groups):
            if index in g.indices:
                return h
        raise InvalidArgument(f"eigen index {index} out of range")

    def reconstruct(self) -> LinOp:
        return self.from_values(self.eigenvalues)


def group_eigenvalues(values: np.ndarray, group_tol: float) -> list[list[int]]:
    """Chain consecutive (descending) eigenvalues closer than the tolerance."""
    if values.size == 0:
        return []
    thresh = group_tol * max(float(np.max(np.abs(values))), 1e-300)
    groups = [[0]]
    for i in range(1, values.size):
        if abs(values[i - 1] - values[i]) <= thresh:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def eigensystem_from_onb(grid: Grid, w: np.ndarray, q: np.ndarray, group_tol: float = DEFAULT_GROUP_TOL) -> EigenSystem:
    """Assemble an ``EigenSystem`` from eigenpairs in orthonormal coordinates."""
    order = np.argsort(-w, kind="stable")
    w = np.asarray(w)[order]
    q = np.asarray(q)[:, order]
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    pivots = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[pivots, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    q = q * signs[None, :]
    vecs = q / np.sqrt(grid.weights)[:, None]
    w.setflags(write=False)
    vecs.setflags(write=False)
    groups = []
    for idx in group_eigenvalues(w, group_tol):
        qg = q[:, idx]
        proj = LinOp.from_onb(grid, grid, qg @ qg.T)
        groups.append(EigenGroup(tuple(idx), float(np.mean(w[idx])), proj))
    return EigenSystem(grid, w, vecs, tuple(groups))


def eig_self_adjoint(A: LinOp, group_tol: float = DEFAULT_GROUP_TOL, method: str = "lapack") -> EigenSystem:
    """Eigendecomposition of a self-adjoint operator with multiplicity grouping.

    ``method`` selects the symmetric solver: ``"lapack"`` (numpy ``eigh``) or
    ``"jacobi"`` (the cyclic Jacobi routine in this module).
    """
    M = symmetrized_onb(A)
    if method == "lapack":
        w, q = np.linalg.eigh(M)
    elif method == "jacobi":
        w, q = jacobi_eigh(M)
    else:
        raise InvalidArgument(f"unknown eigen method {method!r}")
    return eigensystem_from_onb(A.domain, w, q, group_tol)


def _as_eigensystem(A: LinOp | EigenSystem) -> EigenSystem:
    return A if isinstance(A, EigenSystem) else eig_self_adjoint(A)


def _check_psd(E: EigenSystem, rank_tol: float) -> None:
    if E.eigenvalues.size and E.eigenvalues[-1] < -rank_tol * max(E.scale, 1e-300):
        raise NotPSD(f"eigenvalue {E.eigenvalues[-1]:.3e} below -{rank_tol:g} * {E.scale:.3e}")


def moore_penrose(A: LinOp | EigenSystem, rank_tol: float = DEFAULT_RANK_TOL) -> LinOp:
    """Pseudoinverse of a self-adjoint PSD operator: ``sum 1/lambda P`` over retained eigenvalues."""
    E = _as_eigensystem(A)
    _check_psd(E, rank_tol)
    lam = E.eigenvalues
    keep = lam > rank_tol * E.scale if E.scale > 0 else np.zeros(lam.shape, bool)
    return E.from_values(np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0))


def sqrt_psd(A: LinOp | EigenSystem, rank_tol: float = DEFAULT_RANK_TOL) -> LinOp:
    """Symmetric PSD square root."""
    E = _as_eigensystem(A)
    _check_psd(E, rank_tol)
    return E.from_values(np.sqrt(np.clip(E.eigenvalues, 0.0, None)))


def pinv_sqrt_psd(A: LinOp | EigenSystem, rank_tol: float = DEFAULT_RANK_TOL) -> LinOp:
    """Pseudoinverse of the square root, computed from one eigendecomposition."""
    E = _as_eigensystem(A)
    _check_psd(E, rank_tol)
    lam = E.eigenvalues
    keep = lam > rank_tol * E.scale if E.scale > 0 else np.zeros(lam.shape, bool)
    return E.from_values(np.where(keep, 1.0 / np.sqrt(np.where(keep, lam, 1.0)), 0.0))


def filter_weights(beta: np.ndarray, filter: str, alpha: float) -> np.ndarray:
    """Filter function values at singular values ``beta``."""
    beta = np.abs(np.asarray(beta, dtype=float))
    if filter == "tikhonov":
        return beta / (beta + alpha)
    if filter == "tsvd":
        return (beta**2 > alpha).astype(float)
    raise InvalidParameter(f"unknown filter {filter!r}")


def regularized_pinv(B: LinOp, filter: str, alpha: float) -> LinOp:
    """Filtered inverse ``sum w(beta)/beta theta (x) phi`` over the singular system of B."""
    if not alpha > 0:
        raise InvalidParameter(f"regularization parameter must be positive, got {alpha}")
    u, s, vt = np.linalg.svd(B.onb, full_matrices=False)
    floor = s[0] * max(B.onb.shape) * np.finfo(float).eps if s.size else 0.0
    keep = s > floor
    gain = np.zeros_like(s)
    gain[keep] = filter_weights(s[keep], filter, alpha) / s[keep]
    return LinOp.from_onb(B.range, B.domain, (vt.T * gain[None, :]) @ u.T)


def resolvent(E: EigenSystem, z: complex, tol: float = 1e-12) -> LinOp:
    """``(A - zI)^{-1} = sum_h (lambda_h - z)^{-1} P_h`` for a self-adjoint A."""
    lam = np.array([g.value for g in E.groups])
    gaps = np.abs(lam - z)
    if np.any(gaps <= tol):
        raise SingularShift(f"z = {z} lies on the spectrum")
    mat = sum(g.projection.matrix / (g.value - z) for g in E.groups)
    return LinOp(E.grid, E.grid, np.asarray(mat, dtype=complex))


def spectral_sum(E: EigenSystem, groups: Sequence[int]) -> LinOp:
    """Sum of the eigenprojections of the listed groups."""
    out = np.zeros((E.grid.size, E.grid.size))
    for h in groups:
        out = out + E.groups[h].projection.matrix
    return LinOp(E.grid, E.grid, out)
