"""Seemingly unrelated regressions: the parametric Bayesian sampler, the
Dirichlet-process version with per-observation error covariances, and
generalized Leontief elasticities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dp_core import AlphaConfig, ClusterState, InverseWishart, dp_update, remix_unique_values, sample_alpha
from .errors import ValidationError
from .gls import BetaPrior, ObservationBlock, posterior_beta, sample_beta
from .mcmc import ChainRecorder, Chains, McmcConfig
from .stats_kernels import RngStream, sample_inverse_wishart


@dataclass
class SurData:
    """M equations observed on the same N units.

    ``y`` is (N, M); ``X[m]`` is the (N, P_m) design of equation m.
    """

    y: np.ndarray
    X: list
    names: list = field(default=None)
    equations: list = field(default=None)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        self.X = [np.atleast_2d(np.asarray(x, dtype=float)) for x in self.X]
        n, m = self.y.shape
        if len(self.X) != m:
            raise ValidationError(f"{m} responses but {len(self.X)} design matrices")
        for j, x in enumerate(self.X):
            if x.shape[0] != n:
                raise ValidationError(f"equation {j} design has {x.shape[0]} rows, expected {n}")
        if not (np.all(np.isfinite(self.y)) and all(np.all(np.isfinite(x)) for x in self.X)):
            raise ValidationError("non-finite values in SUR data")
        if self.equations is None:
            self.equations = [f"eq{j + 1}" for j in range(m)]
        if self.names is None:
            self.names = [[f"x{k}" for k in range(x.shape[1])] for x in self.X]

    @property
    def n_obs(self):
        return self.y.shape[0]

    @property
    def n_eq(self):
        return self.y.shape[1]

    @property
    def sizes(self):
        return [x.shape[1] for x in self.X]

    def coef_names(self):
        return [f"{eq}:{nm}" for eq, names in zip(self.equations, self.names) for nm in names]


def build_blocks(data: SurData, stacked=False):
    """Per-observation blocks: ``y_i`` (M,) and block-diagonal ``X_i`` (M, sum P_m).

    Coefficients are ordered equation by equation. With ``stacked=True`` the
    blocks come back as arrays ``(y, X)`` of shapes (N, M) and (N, M, P).
    """
    n, m = data.n_obs, data.n_eq
    X = np.zeros((n, m, sum(data.sizes)))
    col = 0
    for j, xj in enumerate(data.X):
        X[:, j, col:col + xj.shape[1]] = xj
        col += xj.shape[1]
    y = data.y.copy()
    if stacked:
        return y, X
    return [ObservationBlock(y[i], X[i]) for i in range(n)]


def _ols_start(y, X, m):
    post = posterior_beta((y, X), np.eye(m)[None], BetaPrior.weak(X.shape[2]), groups=np.zeros(len(y), int))
    return post.mean


def run_parametric_sur(data: SurData, prior: BetaPrior = None, iw: InverseWishart = None,
                       cfg: McmcConfig = McmcConfig()) -> Chains:
    """Gibbs sampler alternating Sigma | beta ~ IW and beta | Sigma ~ N."""
    y, X = build_blocks(data, stacked=True)
    n, m, p = X.shape
    prior = prior or BetaPrior.weak(p)
    iw = iw or InverseWishart.default(m)
    if iw.dim != m:
        raise ValidationError(f"IW base has dim {iw.dim}, system has {m} equations")
    rng = RngStream(cfg.seed, cfg.stream_id)
    beta = _ols_start(y, X, m)
    groups = np.zeros(n, dtype=np.int64)
    rec = ChainRecorder(cfg, p)
    for sweep in range(cfg.n_sweeps):
        E = y - np.einsum("nqp,p->nq", X, beta)
        sigma = sample_inverse_wishart(iw.nu + n, iw.W + E.T @ E, rng)
        beta = sample_beta(posterior_beta((y, X), sigma[None], prior, groups), rng)
        rec.record(sweep, beta, values=sigma)
    return rec.finish(data.coef_names())


def resolve_alpha(cfg: McmcConfig, n_items: int) -> AlphaConfig:
    if cfg.alpha is not None:
        return cfg.alpha
    return AlphaConfig.for_sample(n_items, cfg.k_max_frac, cfg.tau, cfg.grid_size)


def initial_alpha(acfg: AlphaConfig) -> float:
    return float(np.sqrt(acfg.alpha_min * acfg.alpha_max))


def run_dp_sur(data: SurData, prior: BetaPrior = None, base: InverseWishart = None,
               cfg: McmcConfig = McmcConfig()) -> Chains:
    """DP-SUR: each observation's error covariance is drawn from a DP with IW base.

    Per sweep: residuals from the current beta, reassignment and remix of the
    grouped covariances, beta given the grouped covariances, then alpha.
    """
    y, X = build_blocks(data, stacked=True)
    n, m, p = X.shape
    prior = prior or BetaPrior.weak(p)
    base = base or InverseWishart.default(m)
    if not isinstance(base, InverseWishart) or base.dim != m:
        raise ValidationError("DP-SUR needs an inverse-Wishart base matching the number of equations")
    acfg = resolve_alpha(cfg, n)
    rng = RngStream(cfg.seed, cfg.stream_id)
    beta = _ols_start(y, X, m)
    E = y - np.einsum("nqp,p->nq", X, beta)
    state = remix_unique_values(ClusterState.single(n, np.eye(m)), E, base, rng)
    alpha = initial_alpha(acfg)
    rec = ChainRecorder(cfg, p, extras=("K", "alpha"))
    for sweep in range(cfg.n_sweeps):
        E = y - np.einsum("nqp,p->nq", X, beta)
        state = dp_update(state, E, base, alpha, rng)
        beta = sample_beta(posterior_beta((y, X), state.values, prior, state.assignments), rng)
        alpha = sample_alpha(state.num_groups, n, acfg, rng)
        rec.record(sweep, beta, values=state if cfg.keep_values else None, K=state.num_groups, alpha=alpha)
    return rec.finish(data.coef_names())


# generalized Leontief factor demands


def leontief_system(prices, inputs, output, trend=None, factors=None) -> SurData:
    """Input-output equations ``a_k = x_k / Y`` on ``sqrt(P_s / P_k)`` for s != k.

    Equation k has an intercept (``beta_kk``), one column per other factor
    (``beta_ks``) and, if given, a trend column.
    """
    prices = np.asarray(prices, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    output = np.asarray(output, dtype=float)
    n_f = prices.shape[1]
    if np.any(prices <= 0) or np.any(output <= 0):
        raise ValidationError("prices and output must be positive")
    factors = factors or [f"f{k + 1}" for k in range(n_f)]
    ys, Xs, names = [], [], []
    for k in range(n_f):
        cols = [np.ones(len(output))]
        nm = [f"b_{factors[k]}{factors[k]}"]
        for s in range(n_f):
            if s != k:
                cols.append(np.sqrt(prices[:, s] / prices[:, k]))
                nm.append(f"b_{factors[k]}{factors[s]}")
        if trend is not None:
            cols.append(np.asarray(trend, dtype=float))
            nm.append(f"b_{factors[k]}T")
        ys.append(inputs[:, k] / output)
        Xs.append(np.column_stack(cols))
        names.append(nm)
    return SurData(np.column_stack(ys), Xs, names, [f"a_{f}" for f in factors])


def leontief_coefficients(beta, n_factors, trend=True):
    """Arrange a stacked draw into the matrix ``B[k, s] = beta_ks``."""
    beta = np.asarray(beta, dtype=float)
    per_eq = n_factors + (1 if trend else 0)
    B = np.zeros((n_factors, n_factors))
    for k in range(n_factors):
        coef = beta[k * per_eq:(k + 1) * per_eq]
        B[k, k] = coef[0]
        others = [s for s in range(n_factors) if s != k]
        B[k, others] = coef[1:n_factors]
    return B


def leontief_elasticities(B, prices, shares):
    """Price elasticities of factor demand at one data point.

    ``e_ks = beta_ks (P_k/P_s)^(-1/2) / (2 a_k)`` for s != k and
    ``e_kk = -sum_{s != k} e_ks``.
    """
    B = np.asarray(B, dtype=float)
    prices = np.asarray(prices, dtype=float)
    shares = np.asarray(shares, dtype=float)
    if np.any(prices <= 0):
        raise ValidationError("prices must be positive")
    if np.any(shares == 0):
        raise ValidationError("input-output ratios must be non-zero")
    ratio = np.sqrt(prices[None, :] / prices[:, None])  # (P_k / P_s)^(-1/2)
    E = 0.5 * B * ratio / shares[:, None]
    np.fill_diagonal(E, 0.0)
    np.fill_diagonal(E, -E.sum(axis=1))
    return E


def elasticity_chain(chains: Chains, prices, shares, trend=True):
    """Elasticity matrix for every kept draw, shape (draws, n, n)."""
    n_f = len(prices)
    return np.stack([leontief_elasticities(leontief_coefficients(b, n_f, trend), prices, shares)
                     for b in chains.beta])
