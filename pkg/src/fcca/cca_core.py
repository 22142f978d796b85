"""Canonical correlation of two processes through their covariance blocks.

Every variant in this package (unregularized, Tikhonov, TSVD, truncated
Tikhonov) has the same shape. Each side gets a PSD operator ``D_i = h_i(S_i)``
that is a spectral function of its covariance. The side-1 product operator is
``op = Pi_1 S12 D2 S21 D1``, where ``Pi_1`` projects onto the support of D1.
It has the same nonzero spectrum as the symmetric form
``M = D1^{1/2} S12 D2 S21 D1^{1/2} = R R*``, where ``R = D1^{1/2} S12 D2^{1/2}``.
``op`` is self-adjoint for the inner product ``<x, D1 y>``. Its right
eigenvectors are ``D1^{-1/2} u`` and its left eigenvectors ``D1^{1/2} u``, for
eigenvectors u of M.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AmbiguousSign, InvalidArgument, InvariantFailure
from .grid_core import FunctionVec, Grid
from .operators import (
    DEFAULT_GROUP_TOL,
    DEFAULT_RANK_TOL,
    EigenSystem,
    LinOp,
    eig_self_adjoint,
    group_eigenvalues,
    hs_norm,
    pinv_sqrt_psd,
)
from .rkhs import RkhsElement, express_in, rkhs_element, rkhs_inner, transported_projection

RHO_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class BlockCovariance:
    """Covariance blocks S1, S2 and the cross block S12 (grid2 -> grid1)."""

    s1: LinOp
    s2: LinOp
    s12: LinOp

    def __post_init__(self):
        if not (self.s1.is_square and self.s2.is_square):
            raise InvalidArgument("diagonal blocks must be square")
        if not (self.s12.domain.same_as(self.s2.domain) and self.s12.range.same_as(self.s1.domain)):
            raise InvalidArgument("cross block must map grid2 to grid1")

    @property
    def s21(self) -> LinOp:
        return self.s12.adjoint()

    @property
    def grid1(self) -> Grid:
        return self.s1.domain

    @property
    def grid2(self) -> Grid:
        return self.s2.domain

    def perturbed(self, n1: LinOp, n2: LinOp, n12: LinOp, h: float) -> "BlockCovariance":
        """Blocks ``S + h N`` (used for directional derivatives)."""
        return BlockCovariance(self.s1 + h * n1, self.s2 + h * n2, self.s12 + h * n12)

    def eig1(self) -> EigenSystem:
        return eig_self_adjoint(self.s1)

    def eig2(self) -> EigenSystem:
        return eig_self_adjoint(self.s2)


@dataclass(frozen=True, eq=False)
class SpectralGroup:
    indices: tuple[int, ...]
    value: float
    projection: LinOp

    @property
    def multiplicity(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class SpectralSystem:
    """Spectral decomposition of a diagonalizable (non-symmetric) operator.

    ``right`` and ``left`` hold eigenvectors in orthonormal coordinates with
    ``left.T @ right = I``; group projections are ``sum right left'``.
    """

    grid: Grid
    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    groups: tuple[SpectralGroup, ...]

    def group_of(self, index: int) -> int:
        for h, g in enumerate(self.groups):
            if index in g.indices:
                return h
        raise InvalidArgument(f"eigen index {index} out of range")

    def right_vector(self, index: int) -> np.ndarray:
        return self.right[:, index]

    def left_vector(self, index: int) -> np.ndarray:
        return self.left[:, index]


def spectral_system(grid: Grid, mu: np.ndarray, right: np.ndarray, left: np.ndarray, group_tol: float = DEFAULT_GROUP_TOL) -> SpectralSystem:
    order = np.argsort(-mu, kind="stable")
    mu, right, left = mu[order], right[:, order], left[:, order]
    groups = []
    for idx in group_eigenvalues(mu, group_tol):
        proj = LinOp.from_onb(grid, grid, right[:, idx] @ left[:, idx].T)
        groups.append(SpectralGroup(tuple(idx), float(np.mean(mu[idx])), proj))
    return SpectralSystem(grid, mu, right, left, tuple(groups))


@dataclass(frozen=True, eq=False)
class FilteredOperator:
    """The side-1 product operator for a given pair of spectral filters."""

    blocks: BlockCovariance
    eig1: EigenSystem
    eig2: EigenSystem
    h1: np.ndarray
    h2: np.ndarray
    op: LinOp
    sym: LinOp
    spectral: SpectralSystem
    support1: np.ndarray = field(repr=False)

    @property
    def squared_correlations(self) -> np.ndarray:
        return self.spectral.eigenvalues

    def d(self, side: int, power: float = 1.0) -> LinOp:
        """``D_i^power`` (pseudo-power on the support for negative powers)."""
        E, h = (self.eig1, self.h1) if side == 1 else (self.eig2, self.h2)
        pos = h > 0
        vals = np.zeros_like(h)
        vals[pos] = h[pos] ** power
        return E.from_values(vals)

    def r_operator(self) -> LinOp:
        """``R = D1^{1/2} S12 D2^{1/2}`` (grid2 -> grid1)."""
        return self.d(1, 0.5) @ self.blocks.s12 @ self.d(2, 0.5)


def filtered_operator(
    C: BlockCovariance,
    h1: np.ndarray,
    h2: np.ndarray,
    eig1: EigenSystem | None = None,
    eig2: EigenSystem | None = None,
    group_tol: float = DEFAULT_GROUP_TOL,
) -> FilteredOperator:
    """Build ``op``, its symmetric form and its spectral system.

    ``h1``/``h2`` are the filter values on the eigenvalues of ``eig1``/``eig2``
    (callables are evaluated on the eigenvalue arrays).
    """
    E1 = C.eig1() if eig1 is None else eig1
    E2 = C.eig2() if eig2 is None else eig2
    h1 = np.asarray(h1(E1.eigenvalues) if callable(h1) else h1, dtype=float)
    h2 = np.asarray(h2(E2.eigenvalues) if callable(h2) else h2, dtype=float)
    q1, q2 = E1.onb_vectors, E2.onb_vectors
    sup = h1 > 0
    b12 = q1[:, sup].T @ C.s12.onb @ q2  # S12 in eigen-coordinates (support x all)
    core = (np.sqrt(h1[sup])[:, None] * b12) * h2[None, :] @ (b12.T * np.sqrt(h1[sup])[None, :])
    core = 0.5 * (core + core.T)
    mu_s, us = np.linalg.eigh(core)
    mu_s = np.where(np.abs(mu_s) < 1e-15 * max(np.abs(mu_s).max(initial=0.0), 1e-300), 0.0, mu_s)
    qs, qn = q1[:, sup], q1[:, ~sup]
    right = np.column_stack([qs @ (us / np.sqrt(h1[sup])[:, None]), qn])
    left = np.column_stack([qs @ (us * np.sqrt(h1[sup])[:, None]), qn])
    mu = np.concatenate([mu_s, np.zeros(qn.shape[1])])
    spec = spectral_system(E1.grid, mu, right, left, group_tol)
    sym_onb = qs @ core @ qs.T
    d1 = (q1 * h1[None, :]) @ q1.T
    d2 = (q2 * h2[None, :]) @ q2.T
    pi1 = qs @ qs.T
    op_onb = pi1 @ C.s12.onb @ d2 @ C.s12.onb.T @ d1
    g = E1.grid
    return FilteredOperator(
        blocks=C,
        eig1=E1,
        eig2=E2,
        h1=h1,
        h2=h2,
        op=LinOp.from_onb(g, g, op_onb),
        sym=LinOp.from_onb(g, g, sym_onb),
        spectral=spec,
        support1=sup,
    )


@dataclass(frozen=True, eq=False)
class CCAResult:
    """Canonical correlations with their RKHS weight functions.

    ``projections[h]`` is the projection onto the span of the side-1 weights
    of correlation group ``groups[h]``, carried to L2 through Gamma^{-1}.
    """

    rho: np.ndarray
    weights1: list
    weights2: list
    groups: list
    projections: list
    parameter: dict
    degenerate: bool = False
    operator: FilteredOperator | None = None

    @property
    def rho2(self) -> np.ndarray:
        return self.rho**2

    def group_of(self, k: int) -> int:
        for h, g in enumerate(self.groups):
            if k in g:
                return h
        raise InvalidArgument(f"component {k} not reported")


def default_component_count(C: BlockCovariance, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    E1, E2 = C.eig1(), C.eig2()
    return min(E1.rank(rank_tol), E2.rank(rank_tol))


def _weights_from(F: FilteredOperator, u: np.ndarray, rho: float) -> tuple[RkhsElement, RkhsElement]:
    """RKHS weights for one symmetric-form eigenvector ``u`` (onb coordinates)."""
    g1, g2 = F.eig1.grid, F.eig2.grid
    d1h = F.d(1, 0.5).onb
    d1m = F.d(1, -0.5).onb
    d2h = F.d(2, 0.5).onb
    d2m = F.d(2, -0.5).onb
    v = d1m @ u
    w = d2h @ F.blocks.s12.onb.T @ d1h @ u / rho
    gv = d2m @ w
    f = rkhs_element(FunctionVec(g1, v / np.sqrt(g1.weights)), F.eig1, strict=False)
    g = rkhs_element(FunctionVec(g2, gv / np.sqrt(g2.weights)), F.eig2, strict=False)
    return f * (1.0 / f.norm()), g * (1.0 / g.norm())


def align_sign(candidate: RkhsElement, reference: RkhsElement) -> RkhsElement:
    """Flip ``candidate`` if needed so that its RKHS inner product with ``reference`` is >= 0."""
    if candidate.source is not reference.source:
        candidate_ = express_in(candidate, reference.source, reference.rank)
    else:
        candidate_ = candidate
    ip = rkhs_inner(candidate_, reference)
    if abs(ip) < 1e-12:
        raise AmbiguousSign("candidate is orthogonal to the reference")
    return candidate if ip > 0 else -candidate


def _sign_against(f: RkhsElement, ref: RkhsElement | None) -> float:
    if ref is None:
        return 1.0
    cand = f if f.source is ref.source else express_in(f, ref.source, ref.rank)
    ip = rkhs_inner(cand, ref)
    return -1.0 if ip < 0 else 1.0


def cca_from_operator(
    F: FilteredOperator,
    k_max: int,
    parameter: dict,
    reference: CCAResult | None = None,
    group_tol: float = DEFAULT_GROUP_TOL,
) -> CCAResult:
    """Read canonical correlations and weights off a filtered operator."""
    mu = F.spectral.eigenvalues
    k_max = min(k_max, mu.size)
    rho = np.sqrt(np.clip(mu[:k_max], 0.0, None))
    w1: list = []
    w2: list = []
    for k in range(k_max):
        if rho[k] <= RHO_FLOOR:
            w1.append(None)
            w2.append(None)
            continue
        # the symmetric-form eigenvector is the left eigenvector scaled back
        u = F.d(1, -0.5).onb @ F.spectral.left[:, k]
        u /= np.linalg.norm(u)
        f, g = _weights_from(F, u, rho[k])
        ref = reference.weights1[k] if reference is not None and k < len(reference.weights1) else None
        s = _sign_against(f, ref)
        w1.append(f * s)
        w2.append(g * s)
    groups = [tuple(idx) for idx in group_eigenvalues(rho**2, group_tol)] if k_max else []
    projections = []
    for idx in groups:
        elems = [w1[i] for i in idx if w1[i] is not None]
        projections.append(transported_projection(elems) if elems else LinOp.zeros(F.eig1.grid))
    return CCAResult(rho, w1, w2, groups, projections, dict(parameter), operator=F)


def unregularized_filter(rank_tol: float = DEFAULT_RANK_TOL) -> Callable[[np.ndarray], np.ndarray]:
    """``h(lambda) = 1/lambda`` on the retained spectrum (Moore-Penrose)."""

    def h(lam: np.ndarray) -> np.ndarray:
        scale = max(float(np.max(np.abs(lam))), 0.0) if lam.size else 0.0
        keep = lam > rank_tol * scale if scale > 0 else np.zeros(lam.shape, bool)
        return np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)

    return h


def build_R(C: BlockCovariance, rank_tol: float = DEFAULT_RANK_TOL) -> LinOp:
    """Cross-correlation operator ``S1^{1/2+} S12 S2^{1/2+}`` (grid2 -> grid1)."""
    return pinv_sqrt_psd(C.s1, rank_tol) @ C.s12 @ pinv_sqrt_psd(C.s2, rank_tol)


def population_cca(
    C: BlockCovariance,
    rank_tol: float = DEFAULT_RANK_TOL,
    k_max: int | None = None,
    group_tol: float = DEFAULT_GROUP_TOL,
) -> CCAResult:
    """Unregularized canonical correlations of population blocks.

    The squared correlations are cross-checked against the singular values of
    ``build_R``; a disagreement beyond 1e-9 raises ``InvariantFailure``.
    """
    h = unregularized_filter(rank_tol)
    F = filtered_operator(C, h, h, group_tol=group_tol)
    K = default_component_count(C, rank_tol) if k_max is None else k_max
    res = cca_from_operator(F, K, {"method": "population"}, group_tol=group_tol)
    sv = np.linalg.svd(build_R(C, rank_tol).onb, compute_uv=False)[: res.rho.size]
    if sv.size and np.max(np.abs(sv**2 - res.rho2[: sv.size])) > 1e-9:
        raise InvariantFailure("singular values of R disagree with the symmetric-form spectrum")
    return res


def symmetric_residual(F: FilteredOperator) -> float:
    """``||D1^{1/2} op D1^{-1/2} - M||_HS``: self-adjointness of op in its own geometry."""
    lhs = F.d(1, 0.5) @ F.op @ F.d(1, -0.5)
    return hs_norm(lhs - F.sym)


def operator_from_sym(F: FilteredOperator) -> LinOp:
    """Product-form operator rebuilt from the symmetric form (consistency check)."""
    return F.d(1, -0.5) @ F.sym @ F.d(1, 0.5)


__all__ = [
    "BlockCovariance",
    "CCAResult",
    "FilteredOperator",
    "SpectralSystem",
    "align_sign",
    "build_R",
    "cca_from_operator",
    "default_component_count",
    "filtered_operator",
    "population_cca",
    "symmetric_residual",
    "unregularized_filter",
]


@dataclass
class ConvergenceTable:
    """Per-parameter convergence diagnostics against a reference result."""

    param_name: str
    rows: list = field(default_factory=list)

    COLUMNS = ("k", "rho", "proj_err_hs", "weight_err_rkhs")

    def add(self, param, k: int, rho: float, proj_err: float, weight_err: float) -> None:
        self.rows.append((param, k, float(rho), float(proj_err), float(weight_err)))

    def column(self, name: str, k: int | None = None) -> np.ndarray:
        i = (self.param_name,) + self.COLUMNS
        j = i.index(name)
        return np.array([r[j] for r in self.rows if k is None or r[1] == k])

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((self.param_name,) + self.COLUMNS)
            for r in self.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def compare_to_reference(table: ConvergenceTable, param, res: CCAResult, reference: CCAResult) -> None:
    """Append one row per reported component of ``res``.

    Weight errors are NaN where either eigenvalue is repeated, since the
    weight is then defined only up to rotation within its eigenspace.
    """
    for k in range(res.rho.size):
        try:
            hr, h = reference.group_of(k), res.group_of(k)
        except InvalidArgument:
            continue
        proj_err = hs_norm(res.projections[h] - reference.projections[hr])
        f, ref = res.weights1[k], reference.weights1[k] if k < len(reference.weights1) else None
        simple = len(res.groups[h]) == 1 and len(reference.groups[hr]) == 1
        if f is None or ref is None or not simple:
            werr = float("nan")
        else:
            fe = f if f.source is ref.source else express_in(f, ref.source, ref.rank)
            d = fe - ref
            werr = d.norm()
        table.add(param, k + 1, res.rho[k], proj_err, werr)
