"""Dirichlet-process machinery: partitions, conjugate reassignment, and the
concentration parameter.

Group hyper-parameters are either positive scalars (variances under an
inverse-gamma base) or covariance matrices (inverse-Wishart base). Both bases
are conjugate to a zero-mean normal likelihood, so the probability of opening
a new group is available in closed form and no auxiliary components are
needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from . import _backend
from .errors import InvalidDegreesOfFreedom, ValidationError
from .stats_kernels import (
    as_stream,
    bartlett_factor,
    cholesky,
    sample_inverse_wishart,
)

STIRLING_CACHE_MAX = 10_000


@dataclass(frozen=True)
class InverseGamma:
    """IG(a, b) base for scalar variances (shape ``a``, rate ``b``)."""

    a: float = 3.0
    b: float = 2.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValidationError(f"inverse gamma parameters must be positive, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class InverseWishart:
    """IW(nu, W) base for covariance matrices."""

    nu: float
    W: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=float))
        object.__setattr__(self, "W", W)
        if not self.nu > W.shape[0] - 1:
            raise InvalidDegreesOfFreedom(f"nu={self.nu} must exceed dim-1={W.shape[0] - 1}")
        cholesky(W)

    @property
    def dim(self):
        return self.W.shape[0]

    @classmethod
    def default(cls, dim):
        return cls(dim + 2.0, np.eye(dim))


@dataclass
class ClusterState:
    """Partition of ``n`` items into ``K`` non-empty groups.

    ``values[k]`` is the hyper-parameter shared by group ``k`` (a scalar
    variance or a covariance matrix) and ``counts[k]`` its size.
    """

    assignments: np.ndarray
    values: np.ndarray
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.counts is None:
            self.counts = np.bincount(self.assignments, minlength=len(self.values))
        self.counts = np.asarray(self.counts, dtype=np.int64)

    @property
    def n(self):
        return self.assignments.size

    @property
    def num_groups(self):
        return self.counts.size

    @classmethod
    def single(cls, n, value):
        value = np.asarray(value, dtype=float)
        return cls(np.zeros(n, dtype=np.int64), value[None, ...], np.array([n], dtype=np.int64))

    def per_item(self):
        """Hyper-parameter of every item, ``values[assignments]``."""
        return self.values[self.assignments]

    def copy(self):
        return ClusterState(self.assignments.copy(), self.values.copy(), self.counts.copy())

    def check(self):
        """Raise ``AssertionError`` if the state violates its invariants."""
        assert self.counts.sum() == self.n
        assert np.all(self.counts >= 1)
        assert self.assignments.min(initial=0) >= 0
        assert self.assignments.max(initial=0) < max(self.num_groups, 1)
        assert np.array_equal(np.bincount(self.assignments, minlength=self.num_groups), self.counts)


def canonicalize(state: ClusterState) -> ClusterState:
    """Relabel groups in order of first appearance."""
    _, first = np.unique(state.assignments, return_index=True)
    order = state.assignments[np.sort(first)]
    relabel = np.empty(state.num_groups, dtype=np.int64)
    relabel[order] = np.arange(order.size)
    return ClusterState(relabel[state.assignments], state.values[order], state.counts[order])


def crp_predictive_weights(state, alpha: float) -> np.ndarray:
    """Chinese-restaurant-process probabilities for the next item.

    ``state`` may be a :class:`ClusterState` or a vector of group counts.
    The last entry is the probability of a new group.
    """
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    counts = state.counts if isinstance(state, ClusterState) else np.asarray(state, dtype=float)
    counts = np.asarray(counts, dtype=float)
    denom = counts.sum() + alpha
    return np.append(counts, alpha) / denom


# closed-form prior predictive densities of a residual under each base


def log_marginal_lik_ig(residual, base: InverseGamma):
    """Student-t with ``2a`` degrees of freedom and squared scale ``b/a``."""
    a, b = base.a, base.b
    e2 = np.square(residual)
    return (gammaln(a + 0.5) - gammaln(a) - 0.5 * np.log(2.0 * math.pi * b)
            - (a + 0.5) * np.log1p(e2 / (2.0 * b)))


def marginal_lik_ig(residual, base: InverseGamma):
    return np.exp(log_marginal_lik_ig(residual, base))


def log_marginal_lik_iw(residual, base: InverseWishart) -> float:
    """Multivariate t with ``nu-Q+1`` degrees of freedom, scale ``W/(nu-Q+1)``."""
    e = np.atleast_1d(np.asarray(residual, dtype=float))
    q = base.dim
    if e.size != q:
        raise ValidationError(f"residual has dim {e.size}, base has dim {q}")
    nu = base.nu
    L = cholesky(base.W)
    z = np.linalg.solve(L, e)
    return float(gammaln(0.5 * (nu + 1)) - gammaln(0.5 * (nu - q + 1)) - 0.5 * q * math.log(math.pi)
                 - np.sum(np.log(np.diag(L))) - 0.5 * (nu + 1) * math.log1p(z @ z))


def marginal_lik_iw(residual, base: InverseWishart) -> float:
    return math.exp(log_marginal_lik_iw(residual, base))


def gibbs_reassign_sweep(state: ClusterState, residuals, base, alpha: float, rng) -> ClusterState:
    """One sequential pass reassigning every item given all the others.

    Existing group ``k`` is chosen with weight ``n_k * N(e_i | 0, theta_k)``
    and a new group with ``alpha`` times the base's prior predictive density;
    a new group's value is drawn from the base posterior given ``e_i``.
    Emptied groups are removed and labels canonicalized.
    """
    gen = as_stream(rng).gen
    e = np.asarray(residuals, dtype=float)
    n = state.n
    if e.shape[0] != n:
        raise ValidationError(f"{e.shape[0]} residuals for {n} items")
    K = state.num_groups
    assign = state.assignments.copy()
    counts = np.zeros(n + 1, dtype=np.int64)
    counts[:K] = state.counts
    u = gen.random(n)
    if isinstance(base, InverseGamma):
        e = np.ascontiguousarray(e.reshape(n))
        values = np.zeros(n + 1)
        values[:K] = state.values
        g = gen.standard_gamma(base.a + 0.5, n)
        K = _backend.sweep_scalar(e, assign, values, counts, K, float(alpha), base.a, base.b, u, g)
        out = ClusterState(assign, values[:K].copy(), counts[:K].copy())
    else:
        e = np.ascontiguousarray(e.reshape(n, base.dim))
        q = base.dim
        chols = np.zeros((n + 1, q, q))
        chols[:K] = np.linalg.cholesky(state.values)
        halflog = np.zeros(n + 1)
        halflog[:K] = np.log(np.diagonal(chols[:K], axis1=1, axis2=2)).sum(axis=1)
        A = bartlett_factor(base.nu + 1.0, q, gen, size=n)
        K = _backend.sweep_matrix(e, assign, chols, halflog, counts, K, float(alpha), float(base.nu),
                                  base.W, np.linalg.cholesky(base.W), A, u)
        L = chols[:K]
        out = ClusterState(assign, L @ np.swapaxes(L, 1, 2), counts[:K].copy())
    return canonicalize(out)


def remix_unique_values(state: ClusterState, residuals, base, rng) -> ClusterState:
    """Redraw every group's value from its conjugate posterior given the partition."""
    gen = as_stream(rng)
    e = np.asarray(residuals, dtype=float)
    K = state.num_groups
    if isinstance(base, InverseGamma):
        ss = np.bincount(state.assignments, weights=np.square(e.reshape(-1)), minlength=K)
        shape = base.a + 0.5 * state.counts
        rate = base.b + 0.5 * ss
        values = rate / gen.gen.standard_gamma(shape)
    else:
        e = e.reshape(state.n, base.dim)
        scatter = np.zeros((K, base.dim, base.dim))
        np.add.at(scatter, state.assignments, e[:, :, None] * e[:, None, :])
        values = np.stack([
            sample_inverse_wishart(base.nu + state.counts[k], base.W + scatter[k], gen)
            for k in range(K)
        ])
    return ClusterState(state.assignments.copy(), values, state.counts.copy())


def dp_update(state, residuals, base, alpha, rng):
    """Reassignment sweep followed by a remix of the group values."""
    stream = as_stream(rng)
    state = gibbs_reassign_sweep(state, residuals, base, alpha, stream)
    return remix_unique_values(state, residuals, base, stream)


# number of groups and the concentration parameter


@lru_cache(maxsize=64)
def _log_stirling_row(n):
    # log |s(n, k)| for k = 0..n via s(m, k) = s(m-1, k-1) + (m-1) s(m-1, k)
    row = np.full(n + 1, -np.inf)
    row[0] = 0.0
    for m in range(1, n + 1):
        prev = row[:m].copy()
        row[1:m + 1] = np.logaddexp(prev, row[1:m + 1] + math.log(m - 1) if m > 1 else -np.inf)
        row[0] = -np.inf
    row.setflags(write=False)
    return row


def log_stirling_first(n: int) -> np.ndarray:
    """Log unsigned Stirling numbers of the first kind, ``log s(n, k)``, k=0..n."""
    if n < 0:
        raise ValidationError("n must be non-negative")
    if n > STIRLING_CACHE_MAX:
        raise ValidationError(f"n={n} exceeds the supported maximum {STIRLING_CACHE_MAX}")
    return _log_stirling_row(int(n))


def antoniak_log_pmf(K, alpha, n):
    """log p(K | alpha, n) = log s(n, K) + K log alpha + lgamma(alpha) - lgamma(alpha + n)."""
    K_arr = np.asarray(K)
    if np.any(K_arr < 1) or np.any(K_arr > n):
        raise ValidationError(f"K must lie in [1, {n}]")
    row = log_stirling_first(n)
    out = row[K_arr] + K_arr * np.log(alpha) + gammaln(alpha) - gammaln(alpha + n)
    return float(out) if np.ndim(out) == 0 else out


def antoniak_mode(alpha, n):
    row = log_stirling_first(n)
    return int(np.argmax(row[1:] + np.arange(1, n + 1) * math.log(alpha))) + 1


def _expected_groups(alpha, n):
    return alpha * math.log((alpha + n) / alpha)


def calibrate_alpha_bounds(n, k_min=1, k_max=None, method="mode", hi=1e6):
    """Concentration bounds whose Antoniak mode (or mean) is ``k_min`` / ``k_max``.

    With ``method="mode"`` each bound is the largest alpha whose Antoniak mode
    equals its target, located by bisection on log alpha. Taking the upper end
    of both mode intervals keeps the bounds apart even when ``k_max = k_min + 1``. ``method="mean"`` instead solves
    ``alpha * log((alpha + n) / alpha) = k``.
    """
    if k_max is None:
        k_max = max(2, int(round(0.05 * n)))
    if not 1 <= k_min < k_max <= n:
        raise ValidationError(f"need 1 <= k_min < k_max <= n, got {k_min}, {k_max}, {n}")
    if method == "mean":
        f = lambda a, k: _expected_groups(a, n) - k  # noqa: E731
        return _bisect(lambda a: f(a, k_min) > 0, hi), _bisect(lambda a: f(a, k_max) > 0, hi)
    if method != "mode":
        raise ValidationError(f"unknown calibration method {method!r}")
    if antoniak_mode(hi, n) <= k_max:
        raise ValidationError(f"mode {k_max} is unreachable for alpha <= {hi:g}")
    a_lo = _bisect(lambda a: antoniak_mode(a, n) > k_min, hi, keep="low")
    a_hi = _bisect(lambda a: antoniak_mode(a, n) > k_max, hi, keep="low")
    for a, k in ((a_lo, k_min), (a_hi, k_max)):
        if antoniak_mode(a, n) != k:
            raise ValidationError(f"could not place the Antoniak mode at {k}")
    return a_lo, a_hi


def _bisect(pred, hi, lo=1e-10, keep="high", iters=200):
    # pred is monotone in alpha: False below a threshold, True above
    lo_l, hi_l = math.log(lo), math.log(hi)
    if pred(lo):
        return lo
    for _ in range(iters):
        mid = 0.5 * (lo_l + hi_l)
        if pred(math.exp(mid)):
            hi_l = mid
        else:
            lo_l = mid
        if hi_l - lo_l < 1e-12:
            break
    return math.exp(hi_l if keep == "high" else lo_l)


@dataclass(frozen=True)
class AlphaConfig:
    """Bounded prior ``p(alpha) ∝ (1 - (alpha - lo)/(hi - lo))^tau`` on ``[lo, hi]``.

    ``alpha_min == alpha_max`` pins the concentration parameter.
    """

    alpha_min: float
    alpha_max: float
    tau: float = 0.8
    grid_size: int = 100

    def __post_init__(self):
        if not 0 < self.alpha_min <= self.alpha_max:
            raise ValidationError("need 0 < alpha_min <= alpha_max")
        if self.grid_size < 2:
            raise ValidationError("grid_size must be at least 2")

    @property
    def pinned(self):
        return self.alpha_min == self.alpha_max

    @classmethod
    def for_sample(cls, n, k_max_frac=0.05, tau=0.8, grid_size=100, method="mode"):
        k_max = min(n, max(2, int(round(k_max_frac * n))))
        lo, hi = calibrate_alpha_bounds(n, 1, k_max, method=method)
        return cls(lo, hi, tau, grid_size)

    @classmethod
    def fixed(cls, alpha):
        return cls(alpha, alpha)


def alpha_log_posterior(grid, K, n, cfg: AlphaConfig):
    span = cfg.alpha_max - cfg.alpha_min
    with np.errstate(divide="ignore"):
        log_prior = cfg.tau * np.log(np.clip(1.0 - (grid - cfg.alpha_min) / span, 0.0, None))
    if cfg.tau == 0:
        log_prior = np.zeros_like(grid)
    return log_prior + K * np.log(grid) + gammaln(grid) - gammaln(grid + n)


def sample_alpha(K: int, n: int, cfg: AlphaConfig, rng) -> float:
    """Griddy-Gibbs draw of alpha given ``K`` groups among ``n`` items."""
    if not 1 <= K <= n:
        raise ValidationError(f"K must lie in [1, {n}]")
    if cfg.pinned:
        return float(cfg.alpha_min)
    grid = np.linspace(cfg.alpha_min, cfg.alpha_max, cfg.grid_size)
    lp = alpha_log_posterior(grid, K, n, cfg)
    w = np.exp(lp - lp.max())
    cdf = np.cumsum(w)
    idx = int(np.searchsorted(cdf, as_stream(rng).gen.random() * cdf[-1], side="right"))
    return float(grid[min(idx, grid.size - 1)])
