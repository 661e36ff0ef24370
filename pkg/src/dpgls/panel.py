"""Random-effects panel models with Dirichlet-process priors on the variances
of the individual effects and of the idiosyncratic errors.

The panel is balanced: ``y`` is (N, T) and ``X`` is (N, T, K). Coefficients
are drawn from the likelihood with the individual effects integrated out,
using for individual ``i`` the composite covariance
``diag(sigma2_i1..sigma2_iT) + c_i * ones``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dp_core import AlphaConfig, ClusterState, InverseGamma, dp_update, remix_unique_values, sample_alpha
from .errors import ValidationError
from .gls import BetaPrior, posterior_beta, sample_beta
from .mcmc import ChainRecorder, Chains, McmcConfig
from .stats_kernels import RngStream, as_stream
from .sur import initial_alpha

COMPOSITE_MODES = ("prior", "posterior")


@dataclass
class PanelData:
    y: np.ndarray
    X: np.ndarray
    names: list = field(default=None)
    ids: list = field(default=None)
    periods: list = field(default=None)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 2:
            self.X = self.X[:, :, None]
        if self.y.ndim != 2 or self.X.shape[:2] != self.y.shape:
            raise ValidationError(f"y shape {self.y.shape} does not match X shape {self.X.shape}")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.X))):
            raise ValidationError("non-finite values in panel data")
        if self.names is None:
            self.names = [f"x{k + 1}" for k in range(self.X.shape[2])]
        if len(self.names) != self.X.shape[2]:
            raise ValidationError("one name per regressor column is required")

    @property
    def n_individuals(self):
        return self.y.shape[0]

    @property
    def n_periods(self):
        return self.y.shape[1]

    @property
    def n_regressors(self):
        return self.X.shape[2]


def composite_covariance(sig2_row, s2) -> np.ndarray:
    """``diag(sig2_row) + s2 * ones(T, T)``."""
    sig2_row = np.asarray(sig2_row, dtype=float)
    if np.any(sig2_row <= 0) or s2 < 0:
        raise ValidationError("variances must be positive")
    T = sig2_row.size
    return np.diag(sig2_row) + s2 * np.ones((T, T))


def composite_covariances(sig2, c):
    """Batched :func:`composite_covariance`: ``sig2`` (N, T), ``c`` (N,)."""
    N, T = sig2.shape
    out = np.broadcast_to(np.asarray(c, dtype=float)[:, None, None], (N, T, T)).copy()
    idx = np.arange(T)
    out[:, idx, idx] += sig2
    return out


def u_posterior(resid, d2, sig2):
    """Posterior mean and variance of the individual effects.

    ``s2 = 1 / (1/d2 + sum_t 1/sig2_t)`` and ``mu = s2 * sum_t resid_t / sig2_t``.
    Works on one individual (vectors) or many (rows).
    """
    resid = np.asarray(resid, dtype=float)
    sig2 = np.asarray(sig2, dtype=float)
    prec = 1.0 / sig2
    s2 = 1.0 / (1.0 / np.asarray(d2, dtype=float) + prec.sum(axis=-1))
    mu = s2 * (resid * prec).sum(axis=-1)
    return mu, s2


def sample_u(resid, d2, sig2_row, rng=None):
    """Return ``(mu, s2, draw)`` for one individual; ``draw`` is None without ``rng``."""
    mu, s2 = u_posterior(resid, d2, sig2_row)
    draw = None
    if rng is not None:
        draw = float(mu + np.sqrt(s2) * as_stream(rng).gen.standard_normal())
    return float(mu), float(s2), draw


def crem_augment(data: PanelData, which) -> PanelData:
    """Append individual time means of the selected regressors as new columns."""
    idx = []
    for w in which:
        if isinstance(w, str):
            if w not in data.names:
                raise ValidationError(f"unknown regressor {w!r}")
            w = data.names.index(w)
        if not 0 <= int(w) < data.n_regressors:
            raise ValidationError(f"regressor index {w} out of range")
        idx.append(int(w))
    if not idx:
        return data
    means = data.X[:, :, idx].mean(axis=1, keepdims=True)
    means = np.broadcast_to(means, (data.n_individuals, data.n_periods, len(idx)))
    names = list(data.names) + [f"mean({data.names[k]})" for k in idx]
    return replace(data, X=np.concatenate([data.X, means], axis=2), names=names)


def _start(data, prior, u_prior_var):
    # pooled least squares, then effects from their posterior under N(0, u_prior_var)
    N, T, K = data.X.shape
    y2, X2 = data.y.reshape(-1, 1), data.X.reshape(-1, 1, K)
    beta = posterior_beta((y2, X2), np.ones((1, 1, 1)), prior, np.zeros(N * T, int)).mean
    resid = data.y - data.X @ beta
    s = max(float(resid.var()), 1e-8)
    mu, _ = u_posterior(resid, u_prior_var, np.full((N, T), s))
    return beta, mu


def _composite_scale(mode, d2, s2):
    if mode == "prior":
        return d2
    if mode == "posterior":
        return s2
    raise ValidationError(f"composite must be one of {COMPOSITE_MODES}")


def run_parametric_rem(data: PanelData, prior: BetaPrior = None, var_priors=None,
                       cfg: McmcConfig = McmcConfig(), composite="prior",
                       u_prior_var=1000.0) -> Chains:
    """Normal random-effects model with common variances.

    ``var_priors = (IG for the idiosyncratic variance, IG for the effect variance)``.
    """
    N, T, K = data.X.shape
    prior = prior or BetaPrior.weak(K)
    g_eta, g_u = var_priors or (InverseGamma(), InverseGamma())
    rng = RngStream(cfg.seed, cfg.stream_id)
    gen = rng.gen
    beta, u = _start(data, prior, u_prior_var)
    rec = ChainRecorder(cfg, K, extras=("sigma2", "d2"))
    for sweep in range(cfg.n_sweeps):
        xb = data.X @ beta
        eta = data.y - xb - u[:, None]
        sig2 = (g_eta.b + 0.5 * np.sum(eta ** 2)) / gen.standard_gamma(g_eta.a + 0.5 * N * T)
        d2 = (g_u.b + 0.5 * np.sum(u ** 2)) / gen.standard_gamma(g_u.a + 0.5 * N)
        mu, s2 = u_posterior(data.y - xb, d2, np.full((N, T), sig2))
        u = mu + np.sqrt(s2) * gen.standard_normal(N)
        c = _composite_scale(composite, np.full(N, d2), s2)
        sig = composite_covariances(np.full((N, T), sig2), c)
        beta = sample_beta(posterior_beta((data.y, data.X), sig, prior), rng)
        rec.record(sweep, beta, sigma2=sig2, d2=d2)
    return rec.finish(data.names)


def run_parametric_crem(data: PanelData, which, prior=None, var_priors=None, cfg=McmcConfig(), **kw):
    return run_parametric_rem(crem_augment(data, which), prior, var_priors, cfg, **kw)


def run_dp_rem(data: PanelData, prior: BetaPrior = None, bases=None, cfg: McmcConfig = McmcConfig(),
               composite="prior", u_prior_var=1000.0, alpha_u=None, alpha_eta=None) -> Chains:
    """Random effects with DP priors on the effect and idiosyncratic variances.

    ``bases = (F0 for the effect variances, G0 for the idiosyncratic ones)``,
    both inverse gamma. The idiosyncratic variances are grouped over all
    N*T cells. Per sweep: regroup the N*T idiosyncratic variances, regroup the
    N effect variances, draw the effects, draw beta with the composite
    covariances, then both concentration parameters.
    """
    N, T, K = data.X.shape
    prior = prior or BetaPrior.weak(K)
    f0, g0 = bases or (InverseGamma(), InverseGamma())
    if not (isinstance(f0, InverseGamma) and isinstance(g0, InverseGamma)):
        raise ValidationError("panel bases must be inverse gamma")
    acfg_u = alpha_u or (cfg.alpha if cfg.alpha is not None else AlphaConfig.for_sample(N, cfg.k_max_frac, cfg.tau, cfg.grid_size))
    acfg_e = alpha_eta or (cfg.alpha if cfg.alpha is not None else AlphaConfig.for_sample(N * T, cfg.k_max_frac, cfg.tau, cfg.grid_size))
    rng = RngStream(cfg.seed, cfg.stream_id)
    gen = rng.gen
    beta, u = _start(data, prior, u_prior_var)
    eta = (data.y - data.X @ beta - u[:, None]).reshape(-1)
    sig_state = remix_unique_values(ClusterState.single(N * T, 1.0), eta, g0, rng)
    d2_state = remix_unique_values(ClusterState.single(N, 1.0), u, f0, rng)
    a_u, a_e = initial_alpha(acfg_u), initial_alpha(acfg_e)
    rec = ChainRecorder(cfg, K, extras=("K_u", "K_eta", "alpha_u", "alpha_eta"))
    for sweep in range(cfg.n_sweeps):
        xb = data.X @ beta
        eta = (data.y - xb - u[:, None]).reshape(-1)
        sig_state = dp_update(sig_state, eta, g0, a_e, rng)
        d2_state = dp_update(d2_state, u, f0, a_u, rng)
        sig2 = sig_state.per_item().reshape(N, T)
        d2 = d2_state.per_item()
        mu, s2 = u_posterior(data.y - xb, d2, sig2)
        u = mu + np.sqrt(s2) * gen.standard_normal(N)
        sig = composite_covariances(sig2, _composite_scale(composite, d2, s2))
        beta = sample_beta(posterior_beta((data.y, data.X), sig, prior), rng)
        a_u = sample_alpha(d2_state.num_groups, N, acfg_u, rng)
        a_e = sample_alpha(sig_state.num_groups, N * T, acfg_e, rng)
        rec.record(sweep, beta, values=(d2_state, sig_state) if cfg.keep_values else None,
                   K_u=d2_state.num_groups, K_eta=sig_state.num_groups, alpha_u=a_u, alpha_eta=a_e)
    return rec.finish(data.names)


def run_dp_crem(data: PanelData, which, prior=None, bases=None, cfg=McmcConfig(), **kw) -> Chains:
    """Correlated random effects: append regressor means, then run DP-REM."""
    return run_dp_rem(crem_augment(data, which), prior, bases, cfg, **kw)


# translog cost function with linear homogeneity in input prices


def translog_design(cost, prices, outputs, input_names=None, output_names=None):
    """Regressors of a translog cost function normalized by the last input price.

    Returns ``(response, columns, names)`` where ``response = log(C / p_n)``
    and the columns are, in order: ``log q_j``; ``0.5 log q_j^2`` and
    ``log q_j log q_k`` (j < k); ``log(p_r/p_n)`` for r < n;
    ``0.5 log(p_r/p_n)^2`` and ``log(p_r/p_n) log(p_s/p_n)`` (r < s < n);
    ``log(p_r/p_n) log q_j``. Homogeneity restrictions hold by construction.
    """
    cost = np.asarray(cost, dtype=float)
    prices = np.atleast_2d(np.asarray(prices, dtype=float))
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    if prices.shape[0] != cost.shape[0]:
        prices = prices.T
    if outputs.shape[0] != cost.shape[0]:
        outputs = outputs.T
    if np.any(cost <= 0) or np.any(prices <= 0) or np.any(outputs <= 0):
        raise ValidationError("cost, prices and outputs must be positive")
    n, m = prices.shape[1], outputs.shape[1]
    inp = input_names or [f"p{r + 1}" for r in range(n)]
    out = output_names or [f"q{j + 1}" for j in range(m)]
    lq = np.log(outputs)
    lp = np.log(prices[:, :-1] / prices[:, -1:])
    cols, names = [], []
    for j in range(m):
        cols.append(lq[:, j])
        names.append(f"alpha_{out[j]}")
    for j in range(m):
        for k in range(j, m):
            cols.append((0.5 if j == k else 1.0) * lq[:, j] * lq[:, k])
            names.append(f"delta_{out[j]}{out[k]}")
    for r in range(n - 1):
        cols.append(lp[:, r])
        names.append(f"beta_{inp[r]}")
    for r in range(n - 1):
        for s in range(r, n - 1):
            cols.append((0.5 if r == s else 1.0) * lp[:, r] * lp[:, s])
            names.append(f"phi_{inp[r]}{inp[s]}")
    for r in range(n - 1):
        for j in range(m):
            cols.append(lp[:, r] * lq[:, j])
            names.append(f"gamma_{inp[r]}{out[j]}")
    response = np.log(cost / prices[:, -1])
    return response, np.column_stack(cols), names


def translog_restore(coef: dict, input_names, output_names):
    """Fill in the last input's coefficients from the homogeneity restrictions."""
    full = dict(coef)
    inp, out = list(input_names), list(output_names)
    last, free = inp[-1], inp[:-1]

    def phi(r, s):
        return coef.get(f"phi_{r}{s}", coef.get(f"phi_{s}{r}", 0.0))

    full[f"beta_{last}"] = 1.0 - sum(coef[f"beta_{r}"] for r in free)
    for r in free:
        full[f"phi_{r}{last}"] = -sum(phi(r, s) for s in free)
    full[f"phi_{last}{last}"] = sum(phi(r, s) for r in free for s in free)
    for j in out:
        full[f"gamma_{last}{j}"] = -sum(coef[f"gamma_{r}{j}"] for r in free)
    return full
