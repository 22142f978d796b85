"""Perturbation theory for self-adjoint operators: gaps, resolvents and eigenprojections."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DivergentExpansion, InvalidArgument, InvalidParameter, SingularShift
from .operators import EigenSystem, LinOp, eig_self_adjoint, op_norm, resolvent


@dataclass(frozen=True)
class SpectralCircle:
    """Positively oriented circle in the complex plane, sampled at ``nodes`` points."""

    center: float
    radius: float
    nodes: int = 64

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter(f"radius must be positive, got {self.radius}")
        if self.nodes < 16:
            raise InvalidParameter(f"need at least 16 nodes, got {self.nodes}")

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``z_t`` and the offsets ``z_t - center``."""
        theta = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        offset = self.radius * np.exp(1j * theta)
        return self.center + offset, offset

    def encloses(self, value: float) -> bool:
        return abs(value - self.center) < self.radius

    def check_clear(self, values: np.ndarray, tol: float = 1e-10) -> None:
        dist = np.abs(np.abs(np.asarray(values) - self.center) - self.radius)
        if np.any(dist < tol):
            raise SingularShift("an eigenvalue lies on the integration circle")


class GapResult(NamedTuple):
    delta_mn: float
    delta_nm: float
    gap: float


def _check_projection(P: LinOp, tol: float = 1e-8) -> None:
    m = P.onb
    if not P.is_square or np.abs(m - m.conj().T).max(initial=0.0) > tol or np.abs(m @ m - m).max(initial=0.0) > tol:
        raise InvalidArgument("input is not an orthogonal projection")


def gap_subspace(P_M: LinOp, P_N: LinOp) -> GapResult:
    """Directed distances ``||(I - P_N) P_M||`` and ``||(I - P_M) P_N||`` and their maximum."""
    _check_projection(P_M)
    _check_projection(P_N)
    eye = LinOp.identity(P_M.domain)
    d_mn = op_norm((eye - P_N) @ P_M)
    d_nm = op_norm((eye - P_M) @ P_N)
    return GapResult(d_mn, d_nm, max(d_mn, d_nm))


def contour_projection(E: EigenSystem, circle: SpectralCircle) -> LinOp:
    """``-(2 pi i)^-1`` times the contour integral of the resolvent, by the trapezoid rule.

    The resolvent is used in spectral form, so each eigenvalue gets the scalar
    weight ``-(1/N) sum_t (z_t - c) / (lambda - z_t)``.
    """
    lam = E.eigenvalues
    circle.check_clear(lam)
    z, offset = circle.points()
    coef = -np.mean(offset[None, :] / (lam[:, None] - z[None, :]), axis=1)
    q = E.onb_vectors
    return LinOp.from_onb(E.grid, E.grid, (q * coef.real[None, :]) @ q.T)


def contour_power_integral(value: float, circle: SpectralCircle, power: int) -> complex:
    """Trapezoid value of the contour integral of ``(value - z)^-power``."""
    circle.check_clear(np.array([value]))
    z, offset = circle.points()
    return complex(2j * np.pi * np.mean(offset / (value - z) ** power))


def projection_perturbation(E: EigenSystem, A: LinOp, j: int) -> LinOp:
    """First-order change of eigenprojection ``j`` when the operator moves by A.

    Returns ``sum_{k != j} (lambda_j - lambda_k)^-1 (P_k A P_j + P_j A P_k)``
    over eigen-groups. A ``UserWarning`` is issued when the smallest gap to the
    rest of the spectrum does not exceed ``||A||``.
    """
    if not 0 <= j < len(E.groups):
        raise InvalidArgument(f"group index {j} out of range")
    Pj = E.groups[j].projection
    lj = E.groups[j].value
    out = LinOp.zeros(E.grid)
    gaps = []
    for k, g in enumerate(E.groups):
        if k == j:
            continue
        gaps.append(abs(lj - g.value))
        out = out + (g.projection @ A @ Pj + Pj @ A @ g.projection) / (lj - g.value)
    if gaps and min(gaps) <= op_norm(A):
        warnings.warn("perturbation is not small relative to the eigengap; first-order term unreliable", stacklevel=2)
    return out


def _neumann_ratio(E: EigenSystem, diff_norm: float, z: np.ndarray) -> np.ndarray:
    lam = E.eigenvalues
    res_norm = 1.0 / np.min(np.abs(lam[:, None] - z[None, :]), axis=0)
    return res_norm, diff_norm * res_norm


def projection_bound(E: EigenSystem, B_tilde: LinOp, circle: SpectralCircle) -> float:
    """Neumann-series bound on ``||P_tilde - P||`` for the eigenvalues inside the circle.

    ``r * max_z ||D|| ||R(z)||^2 / (1 - ||D|| ||R(z)||)`` with ``D = B - B_tilde``,
    the maximum taken over the quadrature nodes.
    """
    circle.check_clear(E.eigenvalues)
    B = E.reconstruct()
    d = op_norm(B - B_tilde)
    if d == 0.0:
        return 0.0
    z, _ = circle.points()
    res_norm, q = _neumann_ratio(E, d, z)
    if np.max(q) >= 1.0:
        raise DivergentExpansion(f"||B - B_tilde|| ||R(z)|| reaches {np.max(q):.3g} on the circle")
    return float(circle.radius * np.max(d * res_norm**2 / (1.0 - q)))


def resolvent_difference(E: EigenSystem, B_tilde: LinOp, z: complex, order: int) -> LinOp:
    """Truncated Neumann series for ``R_tilde(z) - R(z)``.

    ``R D R sum_{k <= order} (D R)^k`` with ``D = B - B_tilde``.
    """
    if order < 0:
        raise InvalidParameter("order must be nonnegative")
    R = resolvent(E, z)
    D = E.reconstruct() - B_tilde
    DR = D @ R
    if op_norm(DR) >= 1.0:
        raise DivergentExpansion(f"||(B - B_tilde) R(z)|| = {op_norm(DR):.3g} >= 1")
    term = R @ D @ R
    out = term
    for _ in range(order):
        term = term @ DR
        out = out + term
    return out


# ---------------------------------------------------------------- property suite


class CheckResult(NamedTuple):
    name: str
    value: float
    passed: bool
    detail: str


def _random_symmetric(rng: np.random.Generator, size: int, spread: float = 1.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((size, size)))
    lam = np.sort(rng.uniform(0.1, 1.0 + spread, size))[::-1]
    return (q * lam) @ q.T


def _loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def property_checks(seed: int = 0, trials: int = 200) -> list[CheckResult]:
    """Run the perturbation properties on seeded random operators."""
    from .asymptotics import frechet_map
    from .grid_core import Grid

    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    g = Grid.counting(5)
    out: list[CheckResult] = []

    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    B = LinOp(g, g, (q * np.array([2.0, 1.5, 1.0, 0.6, 0.3])) @ q.T)
    A0 = rng.standard_normal((5, 5))
    A0 = 0.5 * (A0 + A0.T)
    A = LinOp(g, g, A0 / np.linalg.norm(A0, 2))
    E = eig_self_adjoint(B)

    # second-order remainder of the first-order projection change
    eps = np.array([1e-2, 1e-3, 1e-4])
    rem = []
    for e in eps:
        first = projection_perturbation(E, e * A, 0)
        exact = eig_self_adjoint(B + e * A).groups[0].projection - E.groups[0].projection
        rem.append(np.linalg.norm((exact - first).onb))
    s = _loglog_slope(eps, rem)
    out.append(CheckResult("projection_remainder_slope", s, bool(abs(s - 2.0) <= 0.2), "expected 2"))

    # contour quadrature
    lam = E.eigenvalues
    r = 0.5 * min(lam[0] - lam[1], 0.5)
    circ = SpectralCircle(lam[0], r, 64)
    err = np.abs((contour_projection(E, circ) - E.groups[0].projection).onb).max()
    out.append(CheckResult("contour_projection_error", float(err), bool(err <= 1e-8), "64 nodes"))

    # crude bound dominates the true change
    held = total = 0
    for _ in range(trials):
        Bt = _random_symmetric(rng, 4)
        Et = eig_self_adjoint(LinOp(Grid.counting(4), Grid.counting(4), Bt))
        lt = Et.eigenvalues
        rad = 0.5 * (lt[0] - lt[1])
        pert = rng.standard_normal((4, 4))
        pert = 0.5 * (pert + pert.T)
        pert *= rng.uniform(0.01, 0.3) * rad / np.linalg.norm(pert, 2)
        Btil = LinOp(Et.grid, Et.grid, Bt + pert)
        c = SpectralCircle(lt[0], rad, 64)
        try:
            bound = projection_bound(Et, Btil, c)
        except DivergentExpansion:
            continue
        total += 1
        actual = op_norm(eig_self_adjoint(Btil).groups[0].projection - Et.groups[0].projection)
        held += actual <= bound + 1e-12
    out.append(CheckResult("projection_bound_dominates", held / max(total, 1), bool(total > 0 and held == total), f"{held}/{total}"))

    # Frechet map: one-sided difference error decays linearly
    hs = np.array([1e-4, 1e-5, 1e-6])
    phi = lambda z: 1.0 / (z + 0.1)
    dphi = lambda z: -1.0 / (z + 0.1) ** 2
    D = frechet_map(E, A, phi, dphi)
    base = E.function(phi)
    errs = [np.linalg.norm(((eig_self_adjoint(B + h * A).function(phi) - base) / h - D).onb) for h in hs]
    s = _loglog_slope(hs, errs)
    out.append(CheckResult("frechet_error_slope", s, bool(abs(s - 1.0) <= 0.2), "expected 1"))

    # higher powers of the resolvent integrate to zero
    worst = max(abs(contour_power_integral(lam[0], circ, n)) for n in (2, 3))
    out.append(CheckResult("higher_power_contour", float(worst), bool(worst <= 1e-10), "n = 2, 3"))
    return out
