import numpy as np
import pytest

from fcca.cca_core import BlockCovariance, population_cca
from fcca.errors import StraddleError, InvalidParameter
from fcca.grid_core import Grid
from fcca.model_sim import population_operators
from fcca.operators import LinOp, eig_self_adjoint, hs_norm
from fcca.tsvd import (
    cca_truncated_tikhonov,
    cca_tsvd,
    cumulative_projection,
    hybrid_comparison,
    s1_m,
    sweep_m,
    truncated_tikhonov,
)

from conftest import make_random_models


def diag_system(values):
    g = Grid.counting(len(values))
    return eig_self_adjoint(LinOp(g, g, np.diag(values)))


def test_cumulative_projection_examples():
    assert np.allclose(cumulative_projection(diag_system([2.0, 1.0, 0.5]), 2).matrix, np.diag([1.0, 1.0, 0.0]))
    full = cumulative_projection(diag_system([2.0, 1.0, 0.5]), 3)
    assert np.allclose(full.matrix, np.eye(3))
    with pytest.raises(StraddleError):
        cumulative_projection(diag_system([1.0, 1.0, 0.5]), 1)
    with pytest.raises(InvalidParameter):
        cumulative_projection(diag_system([1.0, 0.5]), 3)


def test_cumulative_projection_nested():
    rng = np.random.default_rng(0)
    g = Grid.uniform(8)
    a = rng.standard_normal((8, 8))
    E = eig_self_adjoint(LinOp.from_onb(g, g, a @ a.T))
    for m in range(1, 8):
        P = cumulative_projection(E, m).onb
        assert np.trace(P) == pytest.approx(m, abs=1e-8)
        assert np.allclose(P @ P, P, rtol=0, atol=1e-10) and np.allclose(P, P.T, rtol=0, atol=1e-10)
        for mp in range(1, 8):
            Q = cumulative_projection(E, mp).onb
            assert np.allclose(P @ Q, cumulative_projection(E, min(m, mp)).onb, rtol=0, atol=1e-10)


def test_s1_m_on_toy(toy_blocks):
    assert np.allclose(s1_m(toy_blocks, 1).eigenvalues[:2], [0.81, 0.0], rtol=0, atol=1e-12)
    assert np.allclose(s1_m(toy_blocks, 2).eigenvalues[:2], [0.81, 0.09], rtol=0, atol=1e-12)
    C0 = BlockCovariance(toy_blocks.s1, toy_blocks.s2, LinOp.zeros(toy_blocks.grid2, toy_blocks.grid1))
    assert np.abs(s1_m(C0, 2).op.matrix).max() == 0.0


def test_s1_m_rank_bound(toy_blocks):
    T = s1_m(toy_blocks, 1)
    assert np.sum(np.abs(T.eigenvalues) > 1e-12) <= 1
    assert np.trace(T.pi1.onb) == pytest.approx(1.0)


def test_cca_tsvd_on_toy(toy_blocks):
    assert np.allclose(cca_tsvd(toy_blocks, 2).rho, [0.9, 0.3], rtol=0, atol=1e-12)
    r1 = cca_tsvd(toy_blocks, 1)
    assert r1.rho.size == 1 and r1.rho[0] == pytest.approx(0.9)
    assert r1.parameter["m"] == 1


def test_tsvd_monotone_and_saturating():
    for m in make_random_models(20, J=4, p=16, seed=5):
        C = population_operators(m)
        ref = population_cca(C)
        table = sweep_m(C, [1, 2, 3, 4], ref)
        for k in range(1, 5):
            r = table.column("rho", k)
            assert np.all(np.diff(r) >= -1e-12)
        assert np.allclose(cca_tsvd(C, 4).rho ** 2, ref.rho**2, rtol=0, atol=1e-10)
        werr, perr = table.column("weight_err_rkhs", 1), table.column("proj_err_hs", 1)
        close = perr < 0.5
        assert np.all(werr[close] ** 2 <= perr[close] + 1e-10)


def test_sweep_m_requires_increasing(toy_blocks):
    with pytest.raises(InvalidParameter):
        sweep_m(toy_blocks, [2, 1], population_cca(toy_blocks))


def test_truncated_tikhonov_examples(toy_blocks):
    T = truncated_tikhonov(toy_blocks, 0.1, 2)
    assert np.allclose(T.eigenvalues[:2], [0.6545455, 0.06], rtol=0, atol=1e-7)
    T1 = truncated_tikhonov(toy_blocks, 0.1, 1)
    assert T1.eigenvalues[0] == pytest.approx(0.648 / 0.99, abs=1e-12)
    tiny = truncated_tikhonov(toy_blocks, 1e-12, 2)
    assert hs_norm(tiny.op - s1_m(toy_blocks, 2).op) <= 1e-9
    assert tiny.distance_to_tsvd <= 1e-9
    res = cca_truncated_tikhonov(toy_blocks, 0.1, 2)
    assert res.parameter == {"method": "truncated_tikhonov", "alpha": 0.1, "m": 2}


def test_hybrid_comparison_reports_both(toy_blocks):
    target = s1_m(toy_blocks, 2).op
    out = hybrid_comparison(toy_blocks, target, 0.1, 1)
    assert set(out) >= {"hybrid_error", "tsvd_error"}
    assert out["hybrid_error"] >= 0 and out["tsvd_error"] >= 0
