import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fcca.errors import DegenerateBasis, InvalidArgument
from fcca.grid_core import FunctionVec, Grid, discrete_orthonormalize, l2_inner, tensor_outer
from fcca.operators import LinOp


def test_uniform_grid_has_unit_measure():
    g = Grid.uniform(64)
    assert abs(g.measure - 1.0) < 1e-12
    assert np.all(np.diff(g.points) > 0)


def test_trapezoid_grid_has_unit_measure():
    assert abs(Grid.uniform(33, rule="trapezoid").measure - 1.0) < 1e-12


def test_grid_rejects_bad_weights():
    with pytest.raises(InvalidArgument):
        Grid(np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    with pytest.raises(InvalidArgument):
        Grid(np.array([1.0, 0.0]), np.array([1.0, 1.0]))


def test_grid_arrays_are_immutable():
    g = Grid.uniform(4)
    with pytest.raises(ValueError):
        g.points[0] = 5.0


def test_inner_of_constant_one_is_one():
    g = Grid.uniform(64)
    one = FunctionVec(g, np.ones(64))
    assert l2_inner(one, one) == pytest.approx(1.0, abs=1e-12)
    assert l2_inner(one, FunctionVec(g, np.zeros(64))) == 0.0


def test_orthonormalized_cosine_has_unit_norm():
    g = Grid.uniform(64)
    f = FunctionVec(g, np.sqrt(2) * np.cos(np.pi * g.points))
    (e,) = discrete_orthonormalize([f])
    assert l2_inner(e, e) == pytest.approx(1.0, abs=1e-12)


def test_inner_rejects_grid_mismatch():
    f = FunctionVec(Grid.uniform(4), np.ones(4))
    g = FunctionVec(Grid.uniform(5), np.ones(5))
    with pytest.raises(InvalidArgument):
        l2_inner(f, g)


def test_tensor_outer_reproduces_g():
    g = Grid.uniform(16)
    rng = np.random.default_rng(0)
    f = FunctionVec(g, rng.standard_normal(16))
    f = f * (1.0 / f.norm())
    h = FunctionVec(g, rng.standard_normal(16))
    op = tensor_outer(f, h)
    assert np.allclose(op.apply(f).values, h.values, rtol=0, atol=1e-12)
    orth = FunctionVec(g, rng.standard_normal(16))
    orth = orth - f * l2_inner(f, orth)
    assert np.allclose(op.apply(orth).values, 0.0, rtol=0, atol=1e-12)


def test_tensor_outer_two_point_projection():
    g = Grid(np.array([0.0, 1.0]), np.array([0.25, 0.75]))
    e1 = FunctionVec(g, np.array([1.0 / np.sqrt(0.25), 0.0]))
    P = tensor_outer(e1, e1)
    assert np.allclose(P.apply(FunctionVec(g, np.array([3.0, 5.0]))).values, [3.0, 0.0])


def test_tensor_outer_has_rank_one():
    rng = np.random.default_rng(1)
    g1, g2 = Grid.uniform(8), Grid.uniform(5)
    op = tensor_outer(FunctionVec(g1, rng.standard_normal(8)), FunctionVec(g2, rng.standard_normal(5)))
    s = np.linalg.svd(op.onb, compute_uv=False)
    assert s[1] < 1e-12 * s[0]


def test_orthonormalize_is_idempotent_on_orthonormal_input():
    g = Grid.uniform(32)
    basis = discrete_orthonormalize([FunctionVec(g, np.cos(j * np.pi * g.points)) for j in range(3)])
    again = discrete_orthonormalize(basis)
    for a, b in zip(basis, again):
        assert np.allclose(a.values, b.values, rtol=0, atol=1e-12)


def test_orthonormalize_matches_legendre():
    g = Grid.uniform(64)
    e0, e1 = discrete_orthonormalize([FunctionVec(g, np.ones(64)), FunctionVec(g, g.points)])
    assert np.allclose(e0.values, 1.0, rtol=0, atol=1e-3)
    assert np.allclose(e1.values, np.sqrt(12) * (g.points - 0.5), rtol=0, atol=1e-3)


def test_orthonormalize_rejects_duplicates():
    g = Grid.uniform(8)
    f = FunctionVec(g, g.points)
    with pytest.raises(DegenerateBasis):
        discrete_orthonormalize([f, f])


def test_orthonormalize_gram_is_identity():
    g = Grid.uniform(20)
    rng = np.random.default_rng(2)
    basis = discrete_orthonormalize([FunctionVec(g, rng.standard_normal(20)) for _ in range(6)])
    gram = np.array([[l2_inner(a, b) for b in basis] for a in basis])
    assert np.allclose(gram, np.eye(6), rtol=0, atol=1e-12)


vectors = arrays(np.float64, 12, elements=st.floats(-10, 10, allow_nan=False, allow_subnormal=False).filter(lambda x: x == 0 or abs(x) > 1e-100))


@settings(max_examples=50, deadline=None)
@given(vectors, vectors)
def test_inner_symmetric_and_cauchy_schwarz(a, b):
    g = Grid.uniform(12)
    f, h = FunctionVec(g, a), FunctionVec(g, b)
    assert l2_inner(f, h) == pytest.approx(l2_inner(h, f), abs=1e-12)
    assert abs(l2_inner(f, h)) <= f.norm() * h.norm() + 1e-9
    if np.any(a != 0):
        assert l2_inner(f, f) > 0


def test_linop_adjoint_identity():
    rng = np.random.default_rng(3)
    g1, g2 = Grid.uniform(6), Grid.uniform(4, rule="trapezoid")
    A = LinOp(g1, g2, rng.standard_normal((4, 6)))
    f, h = FunctionVec(g1, rng.standard_normal(6)), FunctionVec(g2, rng.standard_normal(4))
    assert l2_inner(A.apply(f), h) == pytest.approx(l2_inner(f, A.adjoint().apply(h)), abs=1e-10)
