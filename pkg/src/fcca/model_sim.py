"""Karhunen-Loeve process-pair models: validation, population operators, simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cca_core import BlockCovariance
from .errors import InvalidArgument, ModelInvalid
from .grid_core import FunctionVec, Grid, discrete_orthonormalize
from .operators import LinOp

TOY_RHO = (0.9, 0.3)


@dataclass(frozen=True, eq=False)
class ProcessModel:
    """Two zero-mean Gaussian processes with J Karhunen-Loeve terms per side.

    ``basis1``/``basis2`` hold the sampled eigenfunctions as columns and
    ``gamma[j, k] = E[Z1j Z2k]`` couples the scores.
    """

    grid1: Grid
    grid2: Grid
    lam1: np.ndarray
    lam2: np.ndarray
    basis1: np.ndarray
    basis2: np.ndarray
    gamma: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        for attr in ("lam1", "lam2", "basis1", "basis2", "gamma"):
            arr = np.array(getattr(self, attr), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        J = self.lam1.size
        shapes = {
            "lam2": (self.lam2.shape, (J,)),
            "basis1": (self.basis1.shape, (self.grid1.size, J)),
            "basis2": (self.basis2.shape, (self.grid2.size, J)),
            "gamma": (self.gamma.shape, (J, J)),
        }
        for k, (got, want) in shapes.items():
            if got != want:
                raise InvalidArgument(f"{k} has shape {got}, expected {want}")

    @property
    def J(self) -> int:
        return self.lam1.size

    def basis_functions(self, side: int) -> list[FunctionVec]:
        grid, b = (self.grid1, self.basis1) if side == 1 else (self.grid2, self.basis2)
        return [FunctionVec(grid, b[:, j]) for j in range(self.J)]

    def joint_covariance(self) -> np.ndarray:
        """Covariance ``[[diag(lam1), gamma], [gamma', diag(lam2)]]`` of the 2J scores."""
        return np.block([[np.diag(self.lam1), self.gamma], [self.gamma.T, np.diag(self.lam2)]])

    def correlations(self) -> np.ndarray:
        return self.gamma / np.sqrt(np.outer(self.lam1, self.lam2))


class ModelDiagnostics(NamedTuple):
    min_eigenvalue: float
    max_abs_rho: float
    orthonormality_residual1: float
    orthonormality_residual2: float
    failures: tuple[str, ...]

    @property
    def valid(self) -> bool:
        return not self.failures


def validate_model(m: ProcessModel, raise_on_error: bool = True) -> ModelDiagnostics:
    """Check PSD joint score covariance, |rho| <= 1, ordering and orthonormal bases."""
    failures = []
    cov = m.joint_covariance()
    min_eig = float(np.linalg.eigvalsh(0.5 * (cov + cov.T)).min())
    max_rho = float(np.max(np.abs(m.correlations()))) if m.J else 0.0
    if np.any(m.lam1 <= 0) or np.any(m.lam2 <= 0):
        failures.append("eigenvalues must be positive")
    if np.any(np.diff(m.lam1) > 0) or np.any(np.diff(m.lam2) > 0):
        failures.append("eigenvalues must be non-increasing")
    if max_rho > 1 + 1e-12:
        failures.append(f"implied correlation {max_rho:.6g} exceeds 1")
    if min_eig < -1e-10:
        failures.append(f"joint score covariance not PSD (min eigenvalue {min_eig:.3e})")
    res = []
    for grid, b in ((m.grid1, m.basis1), (m.grid2, m.basis2)):
        gram = b.T @ (grid.weights[:, None] * b)
        res.append(float(np.max(np.abs(gram - np.eye(m.J)))) if m.J else 0.0)
    for side, r in enumerate(res, start=1):
        if r > 1e-10:
            failures.append(f"side-{side} basis not orthonormal (residual {r:.3e})")
    diag = ModelDiagnostics(min_eig, max_rho, res[0], res[1], tuple(failures))
    if raise_on_error and failures:
        raise ModelInvalid("; ".join(failures))
    return diag


def cosine_basis(grid: Grid, J: int) -> np.ndarray:
    """Discrete-orthonormalized ``sqrt(2) cos(j pi t)``, j = 1..J, as columns."""
    a, b = grid.points[0] - grid.weights[0] / 2, grid.points[-1] + grid.weights[-1] / 2
    t = (grid.points - a) / (b - a)
    raw = [FunctionVec(grid, np.sqrt(2.0) * np.cos(j * np.pi * t)) for j in range(1, J + 1)]
    return np.column_stack([f.values for f in discrete_orthonormalize(raw)])


def toy_model_2(p: int = 64) -> ProcessModel:
    """Two-component model with diagonal coupling and correlations (0.9, 0.3)."""
    grid = Grid.uniform(p)
    lam1 = np.array([1.0, 0.5])
    lam2 = np.array([0.8, 0.4])
    gamma = np.diag(np.array(TOY_RHO) * np.sqrt(lam1 * lam2))
    basis = cosine_basis(grid, 2)
    return ProcessModel(grid, grid, lam1, lam2, basis, basis.copy(), gamma, name="toy2")


def random_model(
    rng: np.random.Generator,
    J: int,
    p: int = 32,
    max_rho: float = 0.95,
    min_gap: float = 0.05,
) -> ProcessModel:
    """A random valid model with distinct eigenvalues and non-diagonal coupling.

    Bases mix the first ``J + 2`` cosines by a random rotation. The coupling is
    ``gamma = diag(sqrt(lam1)) C diag(sqrt(lam2))``, where C has singular values
    below ``max_rho``, so the joint covariance is positive definite.
    """
    if J + 2 > p:
        raise InvalidArgument("need p >= J + 2")
    grid = Grid.uniform(p)

    def spectrum():
        while True:
            lam = np.sort(rng.uniform(0.2, 2.0, J))[::-1]
            if J == 1 or np.min(-np.diff(lam)) > min_gap:
                return lam

    def basis():
        cos = cosine_basis(grid, J + 2)
        rot, _ = np.linalg.qr(rng.standard_normal((J + 2, J + 2)))
        return cos @ rot[:, :J]

    lam1, lam2 = spectrum(), spectrum()
    u, _ = np.linalg.qr(rng.standard_normal((J, J)))
    v, _ = np.linalg.qr(rng.standard_normal((J, J)))
    s = np.sort(rng.uniform(0.1, max_rho, J))[::-1]
    corr = (u * s[None, :]) @ v.T
    gamma = np.sqrt(lam1)[:, None] * corr * np.sqrt(lam2)[None, :]
    return ProcessModel(grid, grid, lam1, lam2, basis(), basis(), gamma, name="random")


def decaying_model(J: int = 20, p: int = 64, rho: float = 0.8, decay: float = 2.0) -> ProcessModel:
    """Many-component model with ``lam_j = j^-decay`` and correlations ``rho^j``.

    Used where the sample size must fall below the process rank.
    """
    grid = Grid.uniform(p)
    j = np.arange(1, J + 1, dtype=float)
    lam1 = j**-decay
    lam2 = 0.8 * j**-decay
    gamma = np.diag(rho**j * np.sqrt(lam1 * lam2))
    basis = cosine_basis(grid, J)
    return ProcessModel(grid, grid, lam1, lam2, basis, basis.copy(), gamma, name="decaying")


def population_operators(m: ProcessModel) -> BlockCovariance:
    """Covariance blocks with ``<phi1j, S12 phi2k> = gamma_jk``."""
    validate_model(m)
    b1, b2 = m.basis1, m.basis2
    s1 = LinOp(m.grid1, m.grid1, (b1 * m.lam1[None, :]) @ b1.T * m.grid1.weights[None, :])
    s2 = LinOp(m.grid2, m.grid2, (b2 * m.lam2[None, :]) @ b2.T * m.grid2.weights[None, :])
    s12 = LinOp(m.grid2, m.grid1, b1 @ m.gamma @ b2.T * m.grid2.weights[None, :])
    return BlockCovariance(s1, s2, s12)


def eigencoordinate_blocks(m: ProcessModel) -> BlockCovariance:
    """The same blocks expressed in the J + J Karhunen-Loeve coordinates."""
    g1, g2 = Grid.counting(m.J), Grid.counting(m.J)
    return BlockCovariance(LinOp(g1, g1, np.diag(m.lam1)), LinOp(g2, g2, np.diag(m.lam2)), LinOp(g2, g1, m.gamma))


def kernel_matrix(m: ProcessModel, which: str) -> np.ndarray:
    """Kernel values on the grid(s): rows index s, columns index t."""
    b1, b2 = m.basis1, m.basis2
    if which == "K1":
        return (b1 * m.lam1) @ b1.T
    if which == "K2":
        return (b2 * m.lam2) @ b2.T
    if which == "K12":
        return b1 @ m.gamma @ b2.T
    if which == "K21":
        return b2 @ m.gamma.T @ b1.T
    if which == "Phi1":
        return (b1 * np.sqrt(m.lam1)) @ b1.T
    if which == "Phi2":
        return (b2 * np.sqrt(m.lam2)) @ b2.T
    raise InvalidArgument(f"unknown kernel {which!r}")


def kernel_eval(m: ProcessModel, s: float, t: float, which: str) -> float:
    """Mercer-sum kernel value at grid points ``s`` and ``t``."""
    first = m.grid2 if which in ("K2", "K21", "Phi2") else m.grid1
    second = m.grid1 if which in ("K1", "K21", "Phi1") else m.grid2
    return float(kernel_matrix(m, which)[first.index_of(s), second.index_of(t)])


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Karhunen-Loeve scores of one path pair."""

    z1: np.ndarray
    z2: np.ndarray


@dataclass(frozen=True, eq=False)
class SamplePaths:
    """``n`` observed path pairs, rows of ``x1``/``x2`` sampled on the model grids."""

    grid1: Grid
    grid2: Grid
    x1: np.ndarray
    x2: np.ndarray
    model: ProcessModel | None = None
    z1: np.ndarray | None = field(default=None, repr=False)
    z2: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        x1 = np.array(self.x1, dtype=float)
        x2 = np.array(self.x2, dtype=float)
        if x1.ndim != 2 or x2.ndim != 2 or x1.shape[0] != x2.shape[0]:
            raise InvalidArgument("path arrays must be 2-d with equal row counts")
        if x1.shape[1] != self.grid1.size or x2.shape[1] != self.grid2.size:
            raise InvalidArgument("path columns do not match the grids")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def n(self) -> int:
        return self.x1.shape[0]

    def scores(self, i: int) -> ScoreVector:
        if self.z1 is None:
            raise InvalidArgument("scores are only stored for simulated paths")
        return ScoreVector(self.z1[i], self.z2[i])


def score_factor(m: ProcessModel) -> np.ndarray:
    """Symmetric square root of the joint score covariance (valid when singular)."""
    cov = m.joint_covariance()
    w, q = np.linalg.eigh(0.5 * (cov + cov.T))
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


def substream(seed: int, index: int) -> np.random.Generator:
    """Independent generator number ``index`` derived from an experiment seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def sample_paths(m: ProcessModel, n: int, seed: int | np.random.Generator) -> SamplePaths:
    """Draw n iid Gaussian path pairs by Karhunen-Loeve synthesis.

    Standard normals are consumed row by row, so path i depends only on the
    seed and i (a larger n extends a smaller sample with the same seed).
    """
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    validate_model(m)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(np.random.SeedSequence(int(seed)))
    xi = rng.standard_normal((n, 2 * m.J))
    z = xi @ score_factor(m).T
    z1, z2 = z[:, : m.J], z[:, m.J :]
    return SamplePaths(m.grid1, m.grid2, z1 @ m.basis1.T, z2 @ m.basis2.T, m, z1, z2)
