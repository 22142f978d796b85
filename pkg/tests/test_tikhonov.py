import numpy as np
import pytest

from fcca.cca_core import BlockCovariance, population_cca
from fcca.errors import InvalidParameter
from fcca.model_sim import population_operators
from fcca.operators import LinOp, hs_norm
from fcca.tikhonov import cca_tikhonov, r_alpha, s1_alpha, sweep_alpha

from conftest import make_random_models

LAM1, LAM2, RHO = np.array([1.0, 0.5]), np.array([0.8, 0.4]), np.array([0.9, 0.3])


def oracle(alpha):
    """Squared regularized correlations gamma^2 / ((lam1 + a)(lam2 + a)) of the toy model."""
    gamma2 = RHO**2 * LAM1 * LAM2
    return gamma2 / ((LAM1 + alpha) * (LAM2 + alpha))


def test_r_alpha_top_singular_value(toy_blocks):
    s = np.linalg.svd(r_alpha(toy_blocks, 0.1).onb, compute_uv=False)
    assert s[0] == pytest.approx(0.8090398, abs=1e-7)


def test_r_alpha_increases_toward_population(toy_blocks):
    tops = [np.linalg.svd(r_alpha(toy_blocks, 10.0**-k).onb, compute_uv=False)[:2] for k in range(1, 7)]
    assert all(np.all(b > a) for a, b in zip(tops, tops[1:]))
    assert np.allclose(tops[-1], [0.9, 0.3], rtol=0, atol=1e-5)


def test_s1_alpha_eigenvalues(toy_blocks):
    T = s1_alpha(toy_blocks, 0.1)
    assert np.allclose(T.eigenvalues[:2], [0.6545455, 0.06], rtol=0, atol=1e-7)
    assert np.allclose(T.eigenvalues[:2], oracle(0.1), rtol=0, atol=1e-12)
    assert np.all(s1_alpha(toy_blocks, 1e6).eigenvalues <= 1e-11)


def test_s1_alpha_definition_residual(toy_blocks):
    T = s1_alpha(toy_blocks, 0.1)
    C = toy_blocks
    direct = C.s12 @ T.companions["s2_inv"] @ C.s21 @ T.companions["s1_inv"]
    assert hs_norm(T.op - direct) <= 1e-10


def test_s1_alpha_zero_coupling(toy_blocks):
    C = BlockCovariance(toy_blocks.s1, toy_blocks.s2, LinOp.zeros(toy_blocks.grid2, toy_blocks.grid1))
    assert np.abs(s1_alpha(C, 0.1).op.matrix).max() == 0.0


def test_rejects_nonpositive_alpha(toy_blocks):
    with pytest.raises(InvalidParameter):
        s1_alpha(toy_blocks, 0.0)
    with pytest.raises(InvalidParameter):
        r_alpha(toy_blocks, -1.0)


def test_cca_tikhonov_correlations(toy_blocks):
    res = cca_tikhonov(toy_blocks, 0.1)
    assert np.allclose(res.rho, [0.8090398, 0.2449490], rtol=0, atol=1e-7)
    assert res.parameter == {"method": "tikhonov", "alpha": 0.1}
    assert cca_tikhonov(toy_blocks, 0.1, k_max=1).rho.size == 1
    assert np.all(cca_tikhonov(toy_blocks, 0.01).rho >= res.rho)


def test_sweep_matches_scalar_formula(toy_blocks):
    ref = population_cca(toy_blocks)
    alphas = [1.0, 0.1, 0.01, 0.001]
    table = sweep_alpha(toy_blocks, alphas, ref)
    rho2 = table.column("rho", 1) ** 2
    assert np.allclose(rho2, [oracle(a)[0] for a in alphas], rtol=0, atol=1e-12)
    assert np.allclose(rho2, [0.18, 0.6545455, 0.7920792, 0.8081806], rtol=0, atol=1e-7)


def test_sweep_rejects_ascending_alphas(toy_blocks):
    with pytest.raises(InvalidParameter):
        sweep_alpha(toy_blocks, [0.01, 0.1], population_cca(toy_blocks))


def test_tiny_alpha_matches_population(toy_blocks):
    res = cca_tikhonov(toy_blocks, 1e-12)
    assert np.allclose(res.rho, [0.9, 0.3], rtol=0, atol=1e-9)


def test_zero_reference_errors_are_norms(toy_blocks):
    C0 = BlockCovariance(toy_blocks.s1, toy_blocks.s2, LinOp.zeros(toy_blocks.grid2, toy_blocks.grid1))
    ref = population_cca(C0)
    table = sweep_alpha(C0, [1.0, 0.1], ref)
    assert np.all(table.column("rho") == 0.0)
    assert np.all(table.column("proj_err_hs") == 0.0)


def test_random_model_sweep_properties():
    for m in make_random_models(10, J=4, p=16, seed=21):
        C = population_operators(m)
        ref = population_cca(C)
        alphas = [10.0**-k for k in range(0, 9)]
        table = sweep_alpha(C, alphas, ref)
        rho1 = table.column("rho", 1)
        assert np.all(np.diff(rho1) > 0)
        for a in alphas:
            T = s1_alpha(C, a)
            assert np.all(T.eigenvalues >= -1e-12) and np.all(T.eigenvalues <= 1 + 1e-8)
            assert hs_norm(T.sym - T.sym.adjoint()) <= 1e-12
        # eigenvector bound at every sweep point
        werr = table.column("weight_err_rkhs", 1)
        perr = table.column("proj_err_hs", 1)
        assert np.all(werr**2 <= perr + 1e-10)
        assert perr[-1] < 1e-6 and werr[-1] < 1e-6


def test_convergence_gap_is_linear_in_alpha(toy_blocks):
    alphas = np.array([1e-2, 1e-3, 1e-4])
    gaps = np.array([0.81 - s1_alpha(toy_blocks, a).eigenvalues[0] for a in alphas])
    C = gaps / alphas
    assert np.all(C > 0) and np.ptp(C) / C.mean() < 0.05
