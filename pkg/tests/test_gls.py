import numpy as np
import pytest
from scipy import stats

from dpgls.errors import SingularPrecision, ValidationError
from dpgls.gls import BetaPrior, ObservationBlock, log_likelihood_block, posterior_beta, sample_beta
from dpgls.stats_kernels import RngStream


def _dense_oracle(y, X, sigmas, prior):
    # stacked GLS with an explicit block-diagonal covariance
    N, Q, P = X.shape
    Omega = np.zeros((N * Q, N * Q))
    for i in range(N):
        Omega[i * Q:(i + 1) * Q, i * Q:(i + 1) * Q] = sigmas[i]
    Xs, ys = X.reshape(N * Q, P), y.reshape(N * Q)
    Oi = np.linalg.inv(Omega)
    V = np.linalg.inv(prior.precision + Xs.T @ Oi @ Xs)
    return V @ (prior.precision @ prior.mean + Xs.T @ Oi @ ys), V


def test_posterior_matches_dense_oracle(gen):
    N, Q, P = 30, 2, 5
    X = gen.normal(size=(N, Q, P))
    y = gen.normal(size=(N, Q))
    sig = []
    for _ in range(N):
        A = gen.normal(size=(Q, Q))
        sig.append(A @ A.T + 0.5 * np.eye(Q))
    sig = np.stack(sig)
    prior = BetaPrior(gen.normal(size=P), 0.3 * np.eye(P))
    post = posterior_beta((y, X), sig, prior)
    b, V = _dense_oracle(y, X, sig, prior)
    np.testing.assert_allclose(post.mean, b, atol=1e-10)
    np.testing.assert_allclose(post.cov, V, atol=1e-10)


def test_grouped_covariances_equal_expanded(gen):
    X = gen.normal(size=(10, 2, 3))
    y = gen.normal(size=(10, 2))
    groups = np.array([0, 1] * 5)
    sig = np.stack([np.eye(2), np.array([[2.0, 0.3], [0.3, 1.0]])])
    prior = BetaPrior.weak(3)
    a = posterior_beta((y, X), sig, prior, groups)
    b = posterior_beta((y, X), sig[groups], prior)
    np.testing.assert_allclose(a.mean, b.mean, rtol=1e-12)


def test_blocks_and_arrays_agree(gen):
    X = gen.normal(size=(6, 1, 2))
    y = gen.normal(size=(6, 1))
    blocks = [ObservationBlock(y[i], X[i]) for i in range(6)]
    sig = np.ones((6, 1, 1))
    a = posterior_beta(blocks, sig, BetaPrior.flat(2))
    b = posterior_beta((y, X), sig, BetaPrior.flat(2))
    np.testing.assert_allclose(a.mean, b.mean)


def test_unidentified_raises():
    X = np.zeros((5, 1, 2))
    X[:, 0, 0] = 1.0
    with pytest.raises(SingularPrecision):
        posterior_beta((np.ones((5, 1)), X), np.ones((5, 1, 1)), BetaPrior.flat(2))


def test_block_validation():
    with pytest.raises(ValidationError):
        ObservationBlock([1.0, 2.0], np.ones((3, 1)))
    with pytest.raises(ValidationError):
        ObservationBlock([np.nan], np.ones((1, 1)))


def test_log_likelihood_block():
    blk = ObservationBlock([1.0, 2.0], np.eye(2))
    sig = np.array([[1.0, 0.2], [0.2, 2.0]])
    ll = log_likelihood_block(blk, [0.5, 0.5], sig)
    assert ll == pytest.approx(stats.multivariate_normal([0.5, 0.5], sig).logpdf([1.0, 2.0]))


def test_sample_beta_moments():
    from dpgls.gls import BetaPosterior

    post = BetaPosterior(np.array([1.0, 2.0]), np.array([[1.0, 0.4], [0.4, 0.5]]))
    rng = RngStream(0)
    d = np.stack([sample_beta(post, rng) for _ in range(40_000)])
    np.testing.assert_allclose(d.mean(axis=0), post.mean, atol=0.02)
    np.testing.assert_allclose(np.cov(d.T), post.cov, atol=0.02)
