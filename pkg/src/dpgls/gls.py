"""Grouped-covariance GLS likelihood and the conjugate normal posterior of the
regression coefficients.

Observations come in blocks ``(y_i, X_i)`` with ``y_i`` of length Q and
``X_i`` of shape (Q, P). Internally blocks are stacked into arrays
``y`` (N, Q) and ``X`` (N, Q, P) so per-block work is batched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, SingularPrecision, ValidationError
from .stats_kernels import as_stream, cholesky, sample_mvn

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ObservationBlock:
    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] != y.size:
            raise ValidationError(f"y has {y.size} rows but X has {X.shape[0]}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValidationError("block contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)


@dataclass(frozen=True)
class BetaPrior:
    """Normal prior stored as mean and precision (zero precision = flat)."""

    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        prec = np.atleast_2d(np.asarray(self.precision, dtype=float))
        if prec.shape != (mean.size, mean.size):
            raise ValidationError("prior precision shape does not match the mean")
        if not np.allclose(prec, prec.T):
            raise ValidationError("prior precision must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision", prec)

    @classmethod
    def weak(cls, p, precision=1e-6):
        return cls(np.zeros(p), precision * np.eye(p))

    @classmethod
    def flat(cls, p):
        return cls(np.zeros(p), np.zeros((p, p)))


@dataclass(frozen=True)
class BetaPosterior:
    mean: np.ndarray
    cov: np.ndarray


def stack_blocks(blocks):
    """Turn a sequence of :class:`ObservationBlock` into ``(y, X)`` arrays."""
    if isinstance(blocks, tuple) and len(blocks) == 2 and isinstance(blocks[0], np.ndarray):
        return blocks
    y = np.stack([b.y for b in blocks])
    X = np.stack([b.X for b in blocks])
    return y, X


def log_likelihood_block(block: ObservationBlock, beta, sigma) -> float:
    """Gaussian log density of one block's residual under covariance ``sigma``."""
    L = cholesky(sigma)
    r = block.y - block.X @ np.asarray(beta, dtype=float)
    z = np.linalg.solve(L, r)
    q = r.size
    return float(-0.5 * q * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * z @ z)


def _whiten(y, X, sigmas, groups):
    # returns L^-1 y and L^-1 X per block, L the Cholesky factor of its covariance
    sigmas = np.asarray(sigmas, dtype=float)
    try:
        L = np.linalg.cholesky(sigmas)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if groups is not None:
        L = L[np.asarray(groups)]
    if L.shape[0] != y.shape[0]:
        raise ValidationError(f"{L.shape[0]} covariances for {y.shape[0]} blocks")
    rhs = np.concatenate([y[:, :, None], X], axis=2)
    W = np.linalg.solve(L, rhs)
    return W[:, :, 0], W[:, :, 1:]


def posterior_precision_terms(y, X, sigmas, groups=None):
    """``(sum X' S^-1 X, sum X' S^-1 y)`` over blocks."""
    wy, wX = _whiten(y, X, sigmas, groups)
    return np.einsum("nqp,nqr->pr", wX, wX), np.einsum("nqp,nq->p", wX, wy)


def posterior_beta(blocks, sigmas, prior: BetaPrior, groups=None) -> BetaPosterior:
    """Conjugate posterior ``N(b, V)`` of the coefficients.

    ``sigmas`` holds one covariance per block, or, when ``groups`` is given,
    one per group with ``groups[i]`` naming block ``i``'s group.
    """
    y, X = stack_blocks(blocks)
    XtX, Xty = posterior_precision_terms(y, X, sigmas, groups)
    prec = prior.precision + XtX
    try:
        C = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError:
        raise SingularPrecision("posterior precision is singular; coefficients are not identified") from None
    rhs = prior.precision @ prior.mean + Xty
    Cinv = np.linalg.solve(C, np.eye(C.shape[0]))
    V = Cinv.T @ Cinv
    b = V @ rhs
    return BetaPosterior(b, 0.5 * (V + V.T))


def sample_beta(posterior: BetaPosterior, rng) -> np.ndarray:
    return sample_mvn(posterior.mean, posterior.cov, as_stream(rng))
