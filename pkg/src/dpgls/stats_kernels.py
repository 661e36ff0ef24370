"""Linear algebra and random-variate helpers shared by every sampler.

All samplers take an :class:`RngStream` and are otherwise pure: the same
parameters and stream state always give the same draws.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidDegreesOfFreedom, NotPositiveDefinite, ValidationError

PD_RTOL = 1e-12


class RngStream:
    """Reproducible, independently seeded random stream.

    A stream is identified by ``(seed, stream_id)``; further independent
    sub-streams are obtained with :meth:`child`, which extends the spawn key.
    Built on :class:`numpy.random.SeedSequence` and PCG64, so distinct keys
    give statistically independent sequences.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0, _path: tuple = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,) + self._path)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, key: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self._path + (int(key),))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream()
    return RngStream(int(rng))


def cholesky(m) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises :class:`NotPositiveDefinite` when any pivot falls below
    ``1e-12 * max(diag(m))``.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    scale = np.max(np.abs(np.diag(m))) if n else 0.0
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12 * max(scale, 1e-300)):
        raise NotPositiveDefinite("matrix is not symmetric")
    tol = PD_RTOL * scale
    L = np.zeros_like(m)
    for j in range(n):
        s = m[j, j] - L[j, :j] @ L[j, :j]
        if not s > tol:
            raise NotPositiveDefinite(f"pivot {j} is {s:.3e} (tolerance {tol:.3e})")
        L[j, j] = math.sqrt(s)
        if j + 1 < n:
            L[j + 1:, j] = (m[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def is_pd(m) -> bool:
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def logdet_from_chol(L) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _chol_fast(cov):
    # LAPACK path for the hot samplers; falls back to the checked version
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return cholesky(cov)


def sample_mvn(mean, cov, rng, size=None):
    """Draw ``mean + L z`` with ``L L' = cov`` and ``z`` standard normal."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise ValidationError(f"mean has dim {mean.size} but cov has shape {cov.shape}")
    L = _chol_fast(cov)
    gen = as_stream(rng).gen
    if size is None:
        return mean + L @ gen.standard_normal(mean.size)
    z = gen.standard_normal((size, mean.size))
    return mean + z @ L.T


def bartlett_factor(nu, dim, gen, size=None):
    """Lower-triangular Bartlett factor ``A`` with ``A A' ~ Wishart(nu, I)``."""
    shape = () if size is None else (size,)
    A = np.zeros(shape + (dim, dim))
    dfs = nu - np.arange(dim)
    A[..., np.arange(dim), np.arange(dim)] = np.sqrt(gen.chisquare(dfs, size=shape + (dim,)))
    rows, cols = np.tril_indices(dim, -1)
    if rows.size:
        A[..., rows, cols] = gen.standard_normal(shape + (rows.size,))
    return A


def sample_inverse_wishart(nu, scale, rng):
    """Draw from IW(nu, scale), mean ``scale / (nu - dim - 1)``.

    Uses the Bartlett decomposition of Wishart(nu, scale^-1): with
    ``scale = C C'`` the draw is ``C A^-T A^-1 C'``.
    """
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    dim = scale.shape[0]
    if not nu > dim - 1:
        raise InvalidDegreesOfFreedom(f"nu={nu} must exceed dim-1={dim - 1}")
    C = _chol_fast(scale)
    A = bartlett_factor(nu, dim, as_stream(rng).gen)
    B = np.linalg.solve(A, C.T).T  # C A^-T
    out = B @ B.T
    return 0.5 * (out + out.T)


def sample_inverse_gamma(shape, rate, rng, size=None):
    """Draw from IG(shape, rate): the reciprocal of a Gamma(shape, rate) variate."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(shape <= 0) or np.any(rate <= 0):
        raise ValidationError("inverse gamma shape and rate must be positive")
    g = as_stream(rng).gen.standard_gamma(shape, size=size)
    out = rate / g
    return float(out) if np.ndim(out) == 0 else out


def sample_mvt(df, mu, sigma, rng, size=None):
    """Multivariate Student-t draw via the normal scale mixture.

    ``df = inf`` returns a plain multivariate normal draw.
    """
    if not df > 0:
        raise ValidationError(f"df must be positive, got {df}")
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    stream = as_stream(rng)
    z = sample_mvn(np.zeros_like(mu), sigma, stream, size=size)
    if math.isinf(df):
        return mu + z
    g = stream.gen.chisquare(df, size=size)
    w = np.sqrt(np.asarray(g) / df)
    if size is not None:
        w = w[:, None]
    return mu + z / w


def sample_demeaned_lognormal(sigma, rng, size=None):
    """``exp(z) - exp(diag(sigma) / 2)`` with ``z ~ N(0, sigma)``.

    Subtracts the analytic mean so the population mean is exactly zero.
    """
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    z = sample_mvn(np.zeros(sigma.shape[0]), sigma, rng, size=size)
    return np.exp(z) - np.exp(0.5 * np.diag(sigma))
