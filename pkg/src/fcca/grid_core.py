"""Discretized L2 spaces: grids with quadrature weights and functions on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateBasis, InvalidArgument


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered abscissae with positive quadrature weights.

    The weights define the discrete inner product ``<f, g> = sum w_i f_i g_i``.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        wts = _frozen(self.weights)
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise InvalidArgument("points and weights must be equal-length 1-d arrays")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgument("grid points must be strictly increasing")
        if np.any(wts <= 0):
            raise InvalidArgument("quadrature weights must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def uniform(cls, p: int, a: float = 0.0, b: float = 1.0, rule: str = "midpoint") -> "Grid":
        """Uniform grid on ``[a, b]`` with midpoint (default) or trapezoid weights."""
        if p < 1 or not b > a:
            raise InvalidArgument(f"need p >= 1 and b > a, got p={p}, [{a}, {b}]")
        h = (b - a) / p
        if rule == "midpoint":
            return cls(a + h * (np.arange(p) + 0.5), np.full(p, h))
        if rule == "trapezoid":
            if p < 2:
                raise InvalidArgument("trapezoid rule needs p >= 2")
            h = (b - a) / (p - 1)
            w = np.full(p, h)
            w[0] = w[-1] = h / 2
            return cls(np.linspace(a, b, p), w)
        raise InvalidArgument(f"unknown quadrature rule {rule!r}")

    @classmethod
    def counting(cls, size: int) -> "Grid":
        """Index set ``1..size`` with unit weights (plain Euclidean coordinates)."""
        return cls(np.arange(1.0, size + 1.0), np.ones(size))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        """Index of the grid point equal to ``t``; off-grid values are rejected."""
        i = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[i] - t) > tol * max(1.0, abs(t)):
            raise InvalidArgument(f"{t} is not a grid point")
        return i

    def __repr__(self):
        return f"Grid(size={self.size}, range=[{self.points[0]:.6g}, {self.points[-1]:.6g}])"


def check_same_grid(a: Grid, b: Grid) -> None:
    if not a.same_as(b):
        raise InvalidArgument(f"grid mismatch: {a!r} vs {b!r}")


@dataclass(frozen=True, eq=False)
class FunctionVec:
    """A function sampled on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.size,):
            raise InvalidArgument(
                f"expected {self.grid.size} values, got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "FunctionVec") -> "FunctionVec":
        check_same_grid(self.grid, other.grid)
        return FunctionVec(self.grid, self.values + other.values)

    def __sub__(self, other: "FunctionVec") -> "FunctionVec":
        check_same_grid(self.grid, other.grid)
        return FunctionVec(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "FunctionVec":
        return FunctionVec(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "FunctionVec":
        return FunctionVec(self.grid, -self.values)

    def norm(self) -> float:
        return float(np.sqrt(max(l2_inner(self, self), 0.0)))


def l2_inner(f: FunctionVec, g: FunctionVec) -> float:
    """Quadrature inner product ``sum_j w_j f(t_j) g(t_j)``."""
    check_same_grid(f.grid, g.grid)
    return float(np.dot(f.grid.weights * f.values, g.values))


def tensor_outer(f: FunctionVec, g: FunctionVec):
    """Rank-one operator ``h -> <f, h> g`` from f's grid to g's grid."""
    from .operators import LinOp

    mat = np.outer(g.values, f.values * f.grid.weights)
    return LinOp(f.grid, g.grid, mat)


def discrete_orthonormalize(basis: Sequence[FunctionVec], tol: float = 1e-10) -> list[FunctionVec]:
    """Gram-Schmidt under the quadrature inner product.

    Uses two passes of modified Gram-Schmidt so that the output Gram matrix is
    the identity to rounding. A pivot smaller than ``tol`` times the leading
    norm raises ``DegenerateBasis``.
    """
    if not basis:
        return []
    grid = basis[0].grid
    for b in basis:
        check_same_grid(grid, b.grid)
    w = grid.weights
    lead = max(np.sqrt(np.dot(w * b.values, b.values)) for b in basis)
    out: list[np.ndarray] = []
    for i, b in enumerate(basis):
        v = b.values.copy()
        for _ in range(2):
            for q in out:
                v -= np.dot(w * q, v) * q
        nv = np.sqrt(np.dot(w * v, v))
        if nv < tol * lead:
            raise DegenerateBasis(f"basis element {i} is (numerically) in the span of its predecessors")
        out.append(v / nv)
    return [FunctionVec(grid, v) for v in out]
