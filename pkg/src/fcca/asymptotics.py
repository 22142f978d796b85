"""Asymptotic distributions of the regularized estimators, with a Monte Carlo harness.

Perturbations ``N = lim sqrt(n)(S_n - S)`` live in the 2J Karhunen-Loeve
coordinates of a model, where every operator involved is an exact small
matrix. The limit of a smooth statistic of ``S_n`` is its derivative at S
applied to N. The maps below are those derivatives, so each can be checked
against finite differences.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .cca_core import BlockCovariance, SpectralSystem, population_cca
from .errors import InsufficientSample, InvalidArgument, InvalidParameter, MultiplicityError, NotPSD
from .estimation import sample_covariance
from .grid_core import Grid
from .model_sim import ProcessModel, SamplePaths, eigencoordinate_blocks, population_operators, sample_paths
from .operators import EigenSystem, LinOp, hs_norm
from .rkhs import express_in
from .tsvd import _leading_groups

# ---------------------------------------------------------------- CLT covariance


@dataclass(frozen=True, eq=False)
class CltCovariance:
    """Covariance of ``vec(Z Z' - C)`` for the 2J-vector of scores Z.

    Entry ``[(a, b), (c, d)]`` sits at ``[a * 2J + b, c * 2J + d]``; indices
    below J belong to side 1.
    """

    J: int
    sigma: np.ndarray
    score_cov: np.ndarray
    kind: str
    n: int | None = None

    @property
    def dim(self) -> int:
        return 2 * self.J

    def entry(self, a: int, b: int, c: int, d: int) -> float:
        q = self.dim
        return float(self.sigma[a * q + b, c * q + d])


def gaussian_fourth_moment(cov: np.ndarray) -> np.ndarray:
    """``Cov(Z_a Z_b, Z_c Z_d) = C_ac C_bd + C_ad C_bc`` for Gaussian Z."""
    q = cov.shape[0]
    s = np.einsum("ac,bd->abcd", cov, cov) + np.einsum("ad,bc->abcd", cov, cov)
    return s.reshape(q * q, q * q)


def model_scores(paths: SamplePaths, model: ProcessModel) -> np.ndarray:
    """Scores of each path on the model basis (n x 2J)."""
    z1 = (paths.x1 * model.grid1.weights[None, :]) @ model.basis1
    z2 = (paths.x2 * model.grid2.weights[None, :]) @ model.basis2
    return np.hstack([z1, z2])


def clt_covariance(model: ProcessModel, estimator: str = "analytic_gaussian", paths: SamplePaths | None = None) -> CltCovariance:
    """Fourth-moment covariance, analytic (Gaussian) or averaged over paths."""
    cov = model.joint_covariance()
    if estimator == "analytic_gaussian":
        return CltCovariance(model.J, gaussian_fourth_moment(cov), cov, estimator)
    if estimator == "empirical":
        if paths is None or paths.n < 100:
            raise InsufficientSample("empirical fourth moments need at least 100 paths")
        z = model_scores(paths, model)
        z = z - z.mean(axis=0)
        prods = np.einsum("ia,ib->iab", z, z).reshape(paths.n, -1)
        prods = prods - prods.mean(axis=0)
        return CltCovariance(model.J, prods.T @ prods / paths.n, cov, estimator, paths.n)
    raise InvalidArgument(f"unknown estimator {estimator!r}")


@dataclass(frozen=True, eq=False)
class PerturbationDraw:
    """Blocks of one perturbation: N1, N2 self-adjoint, N12 cross (N21 = N12*)."""

    n1: LinOp
    n2: LinOp
    n12: LinOp
    provenance: dict = field(default_factory=dict)

    @property
    def n21(self) -> LinOp:
        return self.n12.adjoint()

    def __mul__(self, c: float) -> "PerturbationDraw":
        return PerturbationDraw(c * self.n1, c * self.n2, c * self.n12, self.provenance)

    __rmul__ = __mul__

    def __add__(self, other: "PerturbationDraw") -> "PerturbationDraw":
        return PerturbationDraw(self.n1 + other.n1, self.n2 + other.n2, self.n12 + other.n12, {})


def draw_from_matrix(N: np.ndarray, J: int, provenance: dict | None = None) -> PerturbationDraw:
    """Split a 2J x 2J coordinate matrix into blocks on counting grids."""
    g1, g2 = Grid.counting(J), Grid.counting(J)
    return PerturbationDraw(
        LinOp(g1, g1, N[:J, :J]),
        LinOp(g2, g2, N[J:, J:]),
        LinOp(g2, g1, N[:J, J:]),
        provenance or {},
    )


def _sigma_factor(S: CltCovariance) -> np.ndarray:
    w, q = np.linalg.eigh(0.5 * (S.sigma + S.sigma.T))
    if w.size and w[0] < -1e-8 * max(w[-1], 1e-300):
        raise NotPSD(f"fourth-moment covariance has eigenvalue {w[0]:.3e}")
    return q * np.sqrt(np.clip(w, 0.0, None))[None, :]


def draw_matrices(S: CltCovariance, seed: int, count: int) -> np.ndarray:
    """``count`` symmetric Gaussian perturbation matrices with covariance Sigma."""
    L = _sigma_factor(S)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    xi = rng.standard_normal((count, L.shape[1]))
    N = (xi @ L.T).reshape(count, S.dim, S.dim)
    return 0.5 * (N + N.transpose(0, 2, 1))


def draw_perturbation(S: CltCovariance, seed: int) -> PerturbationDraw:
    """One Gaussian perturbation with covariance Sigma."""
    return draw_from_matrix(draw_matrices(S, seed, 1)[0], S.J, {"gaussian": int(seed)})


def empirical_perturbation(paths: SamplePaths, model: ProcessModel) -> PerturbationDraw:
    """``sqrt(n) (S_n - S)`` in model coordinates, with the centered 1/n estimator."""
    z = model_scores(paths, model)
    z = z - z.mean(axis=0)
    s_hat = z.T @ z / paths.n
    s_hat = 0.5 * (s_hat + s_hat.T)
    return draw_from_matrix(np.sqrt(paths.n) * (s_hat - model.joint_covariance()), model.J, {"empirical": paths.n})


# ---------------------------------------------------------------- Frechet derivatives


def frechet_from_values(E: EigenSystem, A: LinOp, values: np.ndarray, derivs: np.ndarray) -> LinOp:
    """Derivative of ``B -> f(B)`` at the operator of E, in direction A.

    ``values``/``derivs`` give f and f' on each eigenvalue. Pairs in the same
    eigen-group use f'; other pairs use the divided difference.
    """
    lam = E.eigenvalues
    gid = np.empty(lam.size, dtype=int)
    for h, g in enumerate(E.groups):
        gid[list(g.indices)] = h
    same = gid[:, None] == gid[None, :]
    diff = lam[:, None] - lam[None, :]
    safe = np.where(same, 1.0, diff)
    dd = np.where(same, 0.5 * (derivs[:, None] + derivs[None, :]), (values[:, None] - values[None, :]) / safe)
    q = E.onb_vectors
    a = q.T @ A.onb @ q
    return LinOp.from_onb(E.grid, E.grid, q @ (dd * a) @ q.T)


def frechet_map(E: EigenSystem, A: LinOp, phi: Callable, dphi: Callable) -> LinOp:
    """Frechet derivative of the spectral function phi at E's operator, applied to A."""
    lam = E.eigenvalues
    return frechet_from_values(E, A, np.asarray(phi(lam), float), np.asarray(dphi(lam), float))


def phi_prime_alpha(E: EigenSystem, N: LinOp, alpha: float) -> LinOp:
    """Derivative of ``S -> (S + alpha I)^-1`` in direction N."""
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    return frechet_map(E, N, lambda z: 1.0 / (z + alpha), lambda z: -1.0 / (z + alpha) ** 2)


def _top_mask(E: EigenSystem, m: int) -> np.ndarray:
    _leading_groups(E, m)
    mask = np.zeros(E.eigenvalues.size, bool)
    mask[:m] = True
    return mask


def b_i_m(E: EigenSystem, N: LinOp, m: int) -> LinOp:
    """Derivative of ``S -> S(m)^+`` (truncated pseudoinverse) in direction N.

    Couplings between retained and discarded directions are included; their
    divided difference is ``1 / (lambda_j (lambda_j - lambda_k))``.
    """
    top = _top_mask(E, m)
    lam = E.eigenvalues
    vals = np.where(top, 1.0 / np.where(top, lam, 1.0), 0.0)
    ders = np.where(top, -1.0 / np.where(top, lam, 1.0) ** 2, 0.0)
    return frechet_from_values(E, N, vals, ders)


def a_i_m(E: EigenSystem, N: LinOp, m: int) -> LinOp:
    """Derivative of the cumulative projection ``Pi(m)`` in direction N.

    Equals ``sum_{j<=m<k} (lambda_j - lambda_k)^-1 (P_k N P_j + P_j N P_k)``,
    supported on the blocks that couple Im Pi(m) with its complement.
    """
    top = _top_mask(E, m).astype(float)
    return frechet_from_values(E, N, top, np.zeros_like(top))


def _alpha_pieces(C: BlockCovariance, alpha: float):
    E1, E2 = C.eig1(), C.eig2()
    f = lambda lam: 1.0 / (lam + alpha)
    return E1, E2, E1.function(f), E2.function(f)


def g1_alpha(C: BlockCovariance, draw: PerturbationDraw, alpha: float, pieces=None) -> LinOp:
    """Directional derivative of ``S12 (S2+aI)^-1 S21 (S1+aI)^-1`` along the draw."""
    if not alpha > 0:
        raise InvalidParameter(f"alpha must be positive, got {alpha}")
    E1, E2, p1, p2 = pieces if pieces is not None else _alpha_pieces(C, alpha)
    s12, s21 = C.s12, C.s21
    g11 = draw.n12 @ p2 @ s21 @ p1
    g12 = s12 @ phi_prime_alpha(E2, draw.n2, alpha) @ s21 @ p1
    g13 = s12 @ p2 @ draw.n21 @ p1
    g14 = s12 @ p2 @ s21 @ phi_prime_alpha(E1, draw.n1, alpha)
    return g11 + g12 + g13 + g14


def _m_pieces(C: BlockCovariance, m: int):
    from .tsvd import cumulative_projection, truncation_filter

    E1, E2 = C.eig1(), C.eig2()
    d1 = E1.from_values(truncation_filter(E1, m))
    d2 = E2.from_values(truncation_filter(E2, m))
    return E1, E2, d1, d2, cumulative_projection(E1, m)


def f1_m(C: BlockCovariance, draw: PerturbationDraw, m: int, include_projection_term: bool = True, pieces=None) -> LinOp:
    """Directional derivative of ``Pi1(m) S12 S2(m)^+ S21 S1(m)^+`` along the draw.

    The first term differentiates Pi1(m). It vanishes only when the range of
    ``S12 S2(m)^+ S21`` lies in Im Pi1(m); ``include_projection_term=False``
    drops it for comparison.
    """
    E1, E2, d1, d2, pi1 = pieces if pieces is not None else _m_pieces(C, m)
    s12, s21 = C.s12, C.s21
    out = (
        pi1 @ draw.n12 @ d2 @ s21 @ d1
        + pi1 @ s12 @ b_i_m(E2, draw.n2, m) @ s21 @ d1
        + pi1 @ s12 @ d2 @ draw.n21 @ d1
        + pi1 @ s12 @ d2 @ s21 @ b_i_m(E1, draw.n1, m)
    )
    if include_projection_term:
        out = out + a_i_m(E1, draw.n1, m) @ s12 @ d2 @ s21 @ d1
    return out


# ---------------------------------------------------------------- eigen-limits


class LimitStats(NamedTuple):
    eigval_limit: np.ndarray
    eigvec_limit: np.ndarray | None
    proj_limit: LinOp


def _q_matrix(spec: SpectralSystem, h: int) -> np.ndarray:
    """Reduced resolvent ``sum_{g != h} (mu_h - mu_g)^-1 P_g`` in onb coordinates."""
    mu_h = spec.groups[h].value
    q = np.zeros((spec.grid.size, spec.grid.size))
    for g, grp in enumerate(spec.groups):
        if g != h:
            q += grp.projection.onb / (mu_h - grp.value)
    return q


def reduced_resolvent(spec: SpectralSystem, k: int) -> LinOp:
    g = spec.grid
    return LinOp.from_onb(g, g, _q_matrix(spec, spec.group_of(k)))


def limit_stats(G: LinOp, spec: SpectralSystem, k: int, normalize: np.ndarray | None = None) -> LimitStats:
    """First-order behaviour of eigenvalue k, its eigenvector and eigenprojection.

    ``eigval_limit`` is the block ``L' G V`` over the eigen-group of k (a 1x1
    array for a simple eigenvalue). ``proj_limit = P G Q + Q G P``, where Q is
    the reduced resolvent. ``eigvec_limit = Q G v_k`` for the right
    eigenvector scaled by ``normalize`` (defaults to the stored scaling).
    """
    h = spec.group_of(k)
    idx = list(spec.groups[h].indices)
    g = G.onb
    P = spec.groups[h].projection.onb
    Q = _q_matrix(spec, h)
    block = spec.left[:, idx].T @ g @ spec.right[:, idx]
    proj = LinOp.from_onb(spec.grid, spec.grid, P @ g @ Q + Q @ g @ P)
    vec = None
    if len(idx) == 1:
        v = spec.right[:, k] * (1.0 if normalize is None else normalize)
        vec = (Q @ g @ v) / np.sqrt(spec.grid.weights)
    return LimitStats(block, vec, proj)


def eigvec_limit(G: LinOp, spec: SpectralSystem, k: int) -> np.ndarray:
    st = limit_stats(G, spec, k)
    if st.eigvec_limit is None:
        raise MultiplicityError(f"eigenvalue {k} is repeated; eigenvector limit undefined")
    return st.eigvec_limit


# ---------------------------------------------------------------- plug-in variances


def _parse_param(param) -> tuple[str, float]:
    if isinstance(param, dict):
        if "alpha" in param and "m" in param:
            raise InvalidParameter("plug-in variances are defined for alpha or m, not both")
        key = "alpha" if "alpha" in param else "m"
        return key, param[key]
    if isinstance(param, tuple):
        return param[0], param[1]
    raise InvalidParameter(f"cannot interpret parameter {param!r}")


def eigenvalue_gradients(C: BlockCovariance, param, ks: Sequence[int]) -> np.ndarray:
    """Rows ``grad_k`` with ``d mu_k = grad_k . vec(N)`` for 2J x 2J perturbations N.

    ``C`` must be given in model coordinates (side-1 grid of size J).
    """
    from .tikhonov import s1_alpha
    from .tsvd import s1_m

    kind, value = _parse_param(param)
    J = C.grid1.size
    if kind == "alpha":
        spec = s1_alpha(C, value).eig
        pieces = _alpha_pieces(C, value)
        deriv = lambda d: g1_alpha(C, d, value, pieces)
    else:
        spec = s1_m(C, int(value)).eig
        pieces = _m_pieces(C, int(value))
        deriv = lambda d: f1_m(C, d, int(value), pieces=pieces)
    for k in ks:
        if spec.groups[spec.group_of(k)].multiplicity > 1:
            raise MultiplicityError(f"eigenvalue {k} of the regularized operator is repeated")
    q = 2 * J
    grads = np.zeros((len(ks), q * q))
    for i in range(q):
        for j in range(q):
            unit = np.zeros((q, q))
            unit[i, j] = 1.0
            G = deriv(draw_from_matrix(unit, J)).onb
            for r, k in enumerate(ks):
                grads[r, i * q + j] = spec.left[:, k] @ G @ spec.right[:, k]
    return grads


class SigmaEstimate(NamedTuple):
    sigma: np.ndarray
    standard_error: np.ndarray
    exact: np.ndarray
    ks: tuple[int, ...]
    n_draws: int

    @property
    def sigma_kk(self) -> float:
        return float(self.sigma[0, 0])


def _symmetrized_gradient(grads: np.ndarray, q: int) -> np.ndarray:
    g = grads.reshape(len(grads), q, q)
    return (0.5 * (g + g.transpose(0, 2, 1))).reshape(len(grads), q * q)


def sigma_kk_plugin(C: BlockCovariance, S: CltCovariance, param, k: int | Sequence[int] = 0, n_draws: int = 4000, seed: int = 0) -> SigmaEstimate:
    """Monte Carlo variance of the eigenvalue limit ``<f_k, G f_k>`` over Gaussian draws.

    ``k`` is zero-based (several indices give the cross matrix sigma_jk).
    ``exact`` is the same covariance from the quadratic form ``grad' Sigma grad``.
    """
    ks = (k,) if np.isscalar(k) else tuple(k)
    q = S.dim
    grads = _symmetrized_gradient(eigenvalue_gradients(C, param, ks), q)
    draws = draw_matrices(S, seed, n_draws).reshape(n_draws, q * q)
    vals = draws @ grads.T
    vals = vals - vals.mean(axis=0)
    sigma = vals.T @ vals / (n_draws - 1)
    se = np.sqrt(np.var(vals**2, axis=0, ddof=1) / n_draws)
    exact = grads @ S.sigma @ grads.T
    return SigmaEstimate(sigma, se, exact, ks, n_draws)


# ---------------------------------------------------------------- Monte Carlo harness


@dataclass
class McConfig:
    model: ProcessModel
    method: str
    param: dict
    n_list: Sequence[int]
    replications: int
    seed: int
    k: int = 0
    threads: int = 1
    sigma_draws: int = 4000


@dataclass
class McReport:
    config: dict
    per_n: list
    summary: dict
    samples: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "per_n": self.per_n, "summary": self.summary}, indent=2, sort_keys=False, allow_nan=True)


def _fit(method: str, param: dict, blocks: BlockCovariance, k_max: int, reference=None):
    from .tikhonov import cca_tikhonov
    from .tsvd import cca_truncated_tikhonov, cca_tsvd

    if method == "tikhonov":
        return cca_tikhonov(blocks, param["alpha"], k_max, reference)
    if method == "tsvd":
        return cca_tsvd(blocks, int(param["m"]), k_max, reference)
    if method == "truncated_tikhonov":
        return cca_truncated_tikhonov(blocks, param["alpha"], int(param["m"]), k_max, reference)
    raise InvalidArgument(f"unknown method {method!r}")


def _moments(x: np.ndarray) -> dict:
    if x.size < 2:
        return {"mean": float(x.mean()) if x.size else float("nan"), "var": float("nan"), "skewness": float("nan"), "excess_kurtosis": float("nan")}
    return {
        "mean": float(np.mean(x)),
        "var": float(np.var(x, ddof=1)),
        "skewness": float(stats.skew(x)),
        "excess_kurtosis": float(stats.kurtosis(x)),
    }


def _replicate(cfg: McConfig, n_pos: int, n: int, rep: int, pop, pop_op: LinOp) -> tuple[float, float, float, float]:
    rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed), spawn_key=(n_pos, rep)))
    paths = sample_paths(cfg.model, n, rng)
    blocks = sample_covariance(paths).blocks
    k = cfg.k
    res = _fit(cfg.method, cfg.param, blocks, k + 1)
    rho2 = float(res.operator.spectral.eigenvalues[k])
    op_err = hs_norm(res.operator.op - pop_op)
    proj_err = hs_norm(res.projections[res.group_of(k)] - pop.projections[pop.group_of(k)]) if res.weights1[k] is not None else float("nan")
    w, ref = res.weights1[k], pop.weights1[k]
    if w is None or ref is None:
        w_err = float("nan")
    else:
        we = express_in(w, ref.source, ref.rank)
        sign = 1.0 if np.dot(we.coeffs / ref.lam, ref.coeffs) >= 0 else -1.0
        w_err = (we * sign - ref).norm()
    return rho2, op_err, proj_err, w_err


def mc_study(cfg: McConfig) -> McReport:
    """Replicated sampling study of ``sqrt(n) (rho_k^2_hat - rho_k^2)`` and related errors.

    Replication ``r`` at the ``i``-th sample size uses the seed stream
    ``(seed, i, r)``; results are gathered in index order, so the report does
    not depend on the number of threads.
    """
    if cfg.replications < 1 or not cfg.n_list:
        raise InvalidArgument("need at least one replication and one sample size")
    if cfg.method == "unregularized":
        raise InvalidArgument("the unregularized estimator has no regular limit to study")
    C = population_operators(cfg.model)
    pop = _fit(cfg.method, cfg.param, C, cfg.k + 1)
    if pop.rho.size <= cfg.k:
        raise InvalidArgument(f"component {cfg.k} is not defined for this parameter")
    rho2 = float(pop.operator.spectral.eigenvalues[cfg.k])
    pop_op = pop.operator.op

    sigma = None
    sigma_err = None
    if cfg.method in ("tikhonov", "tsvd"):
        try:
            cc = eigencoordinate_blocks(cfg.model)
            S = clt_covariance(cfg.model)
            est = sigma_kk_plugin(cc, S, cfg.param, cfg.k, cfg.sigma_draws, cfg.seed)
            sigma, sigma_err = est.sigma_kk, float(est.standard_error[0])
        except MultiplicityError as exc:
            sigma_err = str(exc)

    per_n, samples = [], {}
    for i, n in enumerate(cfg.n_list):
        job = lambda r, i=i, n=n: _replicate(cfg, i, int(n), r, pop, pop_op)
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
                out = list(ex.map(job, range(cfg.replications)))
        else:
            out = [job(r) for r in range(cfg.replications)]
        arr = np.array(out)
        err = arr[:, 0] - rho2
        pivot = np.sqrt(n) * err
        entry = {
            "n": int(n),
            "replications": cfg.replications,
            "under_replicated": cfg.replications < 2,
            "pivot": _moments(pivot),
            "error_var": float(np.var(err, ddof=1)) if err.size > 1 else float("nan"),
            "median_op_err_hs": float(np.median(arr[:, 1])),
            "mean_proj_err_hs": float(np.nanmean(arr[:, 2])) if np.any(np.isfinite(arr[:, 2])) else float("nan"),
            "mean_weight_err_rkhs": float(np.nanmean(arr[:, 3])) if np.any(np.isfinite(arr[:, 3])) else float("nan"),
        }
        if sigma is not None and err.size > 1:
            entry["sigma_plugin"] = sigma
            entry["sigma_relative_gap"] = float(abs(entry["pivot"]["var"] - sigma) / sigma) if sigma > 0 else float("nan")
        per_n.append(entry)
        samples[int(n)] = arr
    summary = {"target_rho2": rho2, "sigma_plugin": sigma, "sigma_plugin_se": sigma_err}
    if len(per_n) > 1:
        ratios = []
        for a, b in zip(per_n, per_n[1:]):
            ratios.append({
                "n_pair": [a["n"], b["n"]],
                "error_var_ratio": a["error_var"] / b["error_var"] if b["error_var"] else float("nan"),
                "scaled_var_ratio": a["pivot"]["var"] / b["pivot"]["var"] if b["pivot"]["var"] else float("nan"),
                "median_op_err_ratio": a["median_op_err_hs"] / b["median_op_err_hs"],
            })
        summary["ratios"] = ratios
    config = {
        "model": cfg.model.name,
        "J": cfg.model.J,
        "method": cfg.method,
        "param": dict(cfg.param),
        "n_list": [int(n) for n in cfg.n_list],
        "replications": cfg.replications,
        "seed": int(cfg.seed),
        "k": cfg.k + 1,
    }
    return McReport(config, per_n, summary, samples)


def population_reference(model: ProcessModel):
    """Unregularized population result on the model grids."""
    return population_cca(population_operators(model))


__all__ = [
    "CltCovariance",
    "LimitStats",
    "McConfig",
    "McReport",
    "PerturbationDraw",
    "a_i_m",
    "b_i_m",
    "clt_covariance",
    "draw_perturbation",
    "empirical_perturbation",
    "f1_m",
    "frechet_map",
    "g1_alpha",
    "limit_stats",
    "mc_study",
    "phi_prime_alpha",
    "sigma_kk_plugin",
]
