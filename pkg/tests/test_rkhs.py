import numpy as np
import pytest

from fcca.errors import InvalidArgument, OutOfRange
from fcca.grid_core import FunctionVec
from fcca.model_sim import kernel_matrix, sample_paths
from fcca.operators import eig_self_adjoint
from fcca.rkhs import (
    from_kl_coeffs,
    gamma_apply,
    gamma_inv,
    kernel_section,
    picard_norm,
    psi_quadrature,
    psi_score,
    rkhs_element,
    rkhs_inner,
    source_scores,
    transported_projection,
)
from fcca.operators import hs_norm


@pytest.fixture(scope="module")
def E1(toy_blocks):
    return eig_self_adjoint(toy_blocks.s1)


def test_picard_norm_of_kernel_section(toy, E1):
    K = kernel_matrix(toy, "K1")
    for s in (0, 17, 40):
        res = picard_norm(FunctionVec(toy.grid1, K[:, s]), E1)
        assert res.in_range
        assert res.norm2 == pytest.approx(K[s, s], rel=1e-9)


def test_picard_norm_of_second_eigenvector(toy, E1):
    res = picard_norm(FunctionVec(toy.grid1, toy.basis1[:, 1]), E1)
    assert res.norm2 == pytest.approx(2.0, rel=1e-9)


def test_picard_flags_function_outside_span(toy, E1):
    from fcca.model_sim import cosine_basis

    outside = cosine_basis(toy.grid1, 3)[:, 2]
    assert not picard_norm(FunctionVec(toy.grid1, outside), E1).in_range


def test_reproducing_kernel_inner_products(toy, E1):
    K = kernel_matrix(toy, "K1")
    a, b = kernel_section(E1, 5), kernel_section(E1, 30)
    assert rkhs_inner(a, b) == pytest.approx(K[5, 30], abs=1e-10)


def test_scaled_eigenvector_has_norm_lambda(E1):
    f = from_kl_coeffs(E1, [1.0, 0.0])
    assert rkhs_inner(f, f) == pytest.approx(1.0, abs=1e-10)
    g = from_kl_coeffs(E1, [0.0, 1.0])
    assert rkhs_inner(f, g) == pytest.approx(0.0, abs=1e-12)


def test_reproducing_property_at_random_points(E1):
    rng = np.random.default_rng(0)
    f = from_kl_coeffs(E1, rng.standard_normal(2))
    for s in rng.integers(0, E1.grid.size, 20):
        assert abs(rkhs_inner(kernel_section(E1, int(s)), f) - f.base.values[s]) <= 1e-8 * f.norm()


def test_kernel_factorization(toy):
    K, Phi = kernel_matrix(toy, "K1"), kernel_matrix(toy, "Phi1")
    w = toy.grid1.weights
    assert np.abs((Phi * w[None, :]) @ Phi.T - K).max() <= 1e-8


def test_gamma_scales_second_eigenvector(toy, E1):
    g = FunctionVec(toy.grid1, toy.basis1[:, 1])
    f = gamma_apply(g, E1)
    assert np.allclose(np.abs(f.base.values), np.sqrt(0.5) * np.abs(toy.basis1[:, 1]), rtol=0, atol=1e-10)
    assert f.norm() == pytest.approx(1.0, abs=1e-10)


def test_gamma_isometry_and_round_trip(E1):
    rng = np.random.default_rng(1)
    span = E1.vectors[:, :2]
    for _ in range(100):
        g = FunctionVec(E1.grid, span @ rng.standard_normal(2))
        f = gamma_apply(g, E1)
        assert f.norm() == pytest.approx(g.norm(), abs=1e-10)
        assert np.allclose(gamma_inv(f).values, g.values, rtol=0, atol=1e-10)


def test_gamma_rejects_mass_outside_span(toy, E1):
    from fcca.model_sim import cosine_basis

    extra = cosine_basis(toy.grid1, 3)[:, 2]
    g = FunctionVec(toy.grid1, toy.basis1[:, 0] + 0.1 * extra)
    with pytest.raises(OutOfRange):
        gamma_apply(g, E1)


def test_rkhs_element_strict_range_check(toy, E1):
    from fcca.model_sim import cosine_basis

    with pytest.raises(OutOfRange):
        rkhs_element(FunctionVec(toy.grid1, cosine_basis(toy.grid1, 3)[:, 2]), E1)


def test_psi_single_coordinate(E1):
    f = from_kl_coeffs(E1, [1.0, 0.0])
    assert psi_score(f, np.array([0.7, -3.0])) == pytest.approx(0.7)
    zero = from_kl_coeffs(E1, [0.0, 0.0])
    assert np.all(psi_score(zero, np.ones((5, 2))) == 0.0)


def test_psi_rejects_length_mismatch(E1):
    with pytest.raises(InvalidArgument):
        psi_score(from_kl_coeffs(E1, [1.0, 0.0]), np.ones(3))


def test_psi_two_routes_agree(toy, E1):
    paths = sample_paths(toy, 50, 3)
    f = from_kl_coeffs(E1, [0.4, -1.2])
    a = psi_score(f, source_scores(paths.x1, E1, 2))
    b = psi_quadrature(f, paths.x1)
    assert np.allclose(a, b, rtol=0, atol=1e-9)


def test_psi_isometry_monte_carlo(toy, E1):
    n = 10_000
    paths = sample_paths(toy, n, 4)
    f = from_kl_coeffs(E1, [1.0])
    u = psi_score(f, source_scores(paths.x1, E1, 1))
    var = np.var(u)
    se = f.norm() ** 2 * np.sqrt(2.0 / n)
    assert abs(var - f.norm() ** 2) <= 3 * se
    assert var == pytest.approx(1.0, abs=0.05)


def test_transported_projection_distance_matches_rkhs(E1):
    a = from_kl_coeffs(E1, [1.0, 0.0])
    b = from_kl_coeffs(E1, [np.cos(0.3), np.sin(0.3) / np.sqrt(0.5)])
    Pa, Pb = transported_projection([a]), transported_projection([b])
    cos2 = rkhs_inner(a, b) ** 2 / (rkhs_inner(a, a) * rkhs_inner(b, b))
    assert hs_norm(Pa - Pb) == pytest.approx(np.sqrt(2 * (1 - cos2)), abs=1e-10)
