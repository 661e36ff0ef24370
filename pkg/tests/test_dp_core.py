import math

import numpy as np
import pytest
from scipy import integrate, stats

from dpgls.dp_core import (
    AlphaConfig, ClusterState, InverseGamma, InverseWishart, alpha_log_posterior, antoniak_log_pmf,
    antoniak_mode, calibrate_alpha_bounds, canonicalize, crp_predictive_weights, dp_update,
    gibbs_reassign_sweep, log_marginal_lik_ig, log_marginal_lik_iw, log_stirling_first, marginal_lik_ig,
    marginal_lik_iw, remix_unique_values, sample_alpha,
)
from dpgls.errors import InvalidDegreesOfFreedom, ValidationError
from dpgls.stats_kernels import RngStream


def test_crp_weights_example():
    np.testing.assert_allclose(crp_predictive_weights([2, 1], 1.0), [0.5, 0.25, 0.25])
    assert crp_predictive_weights([], 2.0).tolist() == [1.0]
    with pytest.raises(ValidationError):
        crp_predictive_weights([1], 0.0)


def test_cluster_state_basics():
    s = ClusterState.single(5, 2.0)
    s.check()
    assert s.num_groups == 1 and s.per_item().tolist() == [2.0] * 5
    c = canonicalize(ClusterState([2, 0, 2, 1], [10.0, 20.0, 30.0]))
    assert c.assignments.tolist() == [0, 1, 0, 2]
    assert c.values.tolist() == [30.0, 10.0, 20.0]
    c.check()


def test_ig_marginal_integrates_to_one():
    base = InverseGamma(3.0, 2.0)
    total, _ = integrate.quad(lambda e: marginal_lik_ig(e, base), -np.inf, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)
    # Student-t with 2a df and squared scale b/a
    t = stats.t(6, scale=math.sqrt(2.0 / 3.0))
    assert log_marginal_lik_ig(0.7, base) == pytest.approx(t.logpdf(0.7), rel=1e-12)


def _iw_marginal_by_integration_1d(e, nu, w):
    # integrate N(e | 0, s) IW(s | nu, w) over s > 0 (1-d IW is IG(nu/2, w/2))
    prior = stats.invgamma(nu / 2.0, scale=w / 2.0)
    f = lambda s: stats.norm.pdf(e, scale=math.sqrt(s)) * prior.pdf(s)  # noqa: E731
    val, _ = integrate.quad(f, 0, np.inf, limit=200)
    return val


def test_iw_marginal_1d_matches_integration():
    base = InverseWishart(4.0, np.array([[1.5]]))
    for e in (0.0, 0.3, 2.5):
        exact = _iw_marginal_by_integration_1d(e, 4.0, 1.5)
        assert marginal_lik_iw([e], base) == pytest.approx(exact, rel=1e-6)


def test_iw_marginal_2d_is_multivariate_t():
    W = np.array([[2.0, 0.5], [0.5, 1.0]])
    base = InverseWishart(5.0, W)
    df = 5.0 - 2 + 1
    mvt = stats.multivariate_t(loc=np.zeros(2), shape=W / df, df=df)
    e = np.array([0.4, -1.1])
    assert log_marginal_lik_iw(e, base) == pytest.approx(mvt.logpdf(e), rel=1e-10)


def test_iw_base_validation():
    with pytest.raises(InvalidDegreesOfFreedom):
        InverseWishart(0.5, np.eye(2))
    with pytest.raises(ValidationError):
        InverseGamma(0.0, 1.0)


def test_stirling_small_values():
    # s(4, k) = 0, 6, 11, 6, 1
    row = np.exp(log_stirling_first(4))
    np.testing.assert_allclose(row, [0, 6, 11, 6, 1], atol=1e-9)


def test_antoniak_pmf_sums_to_one():
    for n in (1, 10, 250):
        for a in (0.1, 1.0, 7.0):
            p = np.exp(antoniak_log_pmf(np.arange(1, n + 1), a, n))
            assert p.sum() == pytest.approx(1.0, abs=1e-10)


def test_antoniak_small_case():
    # n=2: P(K=1) = 1/(1+alpha)
    assert math.exp(antoniak_log_pmf(1, 0.5, 2)) == pytest.approx(1 / 1.5)


def test_calibration_modes():
    lo, hi = calibrate_alpha_bounds(100, 1, 5)
    assert antoniak_mode(lo, 100) == 1
    assert antoniak_mode(hi, 100) == 5
    assert hi > lo
    # bounds are the upper ends of their mode intervals
    assert antoniak_mode(lo * 1.001, 100) == 2
    assert antoniak_mode(hi * 1.001, 100) == 6
    lo2, hi2 = calibrate_alpha_bounds(40, 1, 2)
    assert hi2 > lo2
    with pytest.raises(ValidationError):
        calibrate_alpha_bounds(10, 3, 2)


def test_calibration_mean_method():
    lo, hi = calibrate_alpha_bounds(100, 1, 5, method="mean")
    assert lo * math.log((lo + 100) / lo) == pytest.approx(1.0, rel=1e-6)
    assert hi * math.log((hi + 100) / hi) == pytest.approx(5.0, rel=1e-6)


def test_sample_alpha_within_bounds_and_pinned():
    cfg = AlphaConfig.for_sample(200)
    rng = RngStream(0)
    draws = [sample_alpha(4, 200, cfg, rng) for _ in range(200)]
    assert min(draws) >= cfg.alpha_min and max(draws) <= cfg.alpha_max
    assert sample_alpha(3, 200, AlphaConfig.fixed(0.5), rng) == 0.5


def test_alpha_posterior_prefers_more_alpha_with_more_groups():
    cfg = AlphaConfig.for_sample(300)
    grid = np.linspace(cfg.alpha_min, cfg.alpha_max, 50)[:-1]
    m2 = grid[np.argmax(alpha_log_posterior(grid, 2, 300, cfg))]
    m12 = grid[np.argmax(alpha_log_posterior(grid, 12, 300, cfg))]
    assert m12 > m2


def test_sweep_separates_two_scales():
    gen = np.random.default_rng(0)
    e = np.concatenate([gen.normal(0, 0.3, 150), gen.normal(0, 6.0, 150)])
    rng = RngStream(1)
    state = remix_unique_values(ClusterState.single(300, 1.0), e, InverseGamma(), rng)
    for _ in range(30):
        state = dp_update(state, e, InverseGamma(), 1.0, rng)
        state.check()
    v = state.per_item()
    assert np.median(v[:150]) < 0.5 < 10.0 < np.median(v[150:])


def test_matrix_sweep_conserves_counts():
    gen = np.random.default_rng(3)
    E = gen.standard_t(2, size=(120, 2))
    base = InverseWishart.default(2)
    rng = RngStream(2)
    state = remix_unique_values(ClusterState.single(120, np.eye(2)), E, base, rng)
    for _ in range(10):
        state = gibbs_reassign_sweep(state, E, base, 2.0, rng)
        state.check()
        assert np.all(np.linalg.eigvalsh(state.values) > 0)


def test_tiny_alpha_keeps_single_group():
    e = np.random.default_rng(0).normal(size=200)
    rng = RngStream(0)
    state = ClusterState.single(200, 1.0)
    for _ in range(5):
        state = dp_update(state, e, InverseGamma(), 1e-12, rng)
    assert state.num_groups == 1


def test_remix_matches_conjugate_posterior():
    e = np.array([1.0, -2.0, 0.5])
    state = ClusterState.single(3, 1.0)
    rng = RngStream(9)
    draws = np.array([remix_unique_values(state, e, InverseGamma(3, 2), rng).values[0] for _ in range(20_000)])
    post = stats.invgamma(3 + 1.5, scale=2 + 0.5 * np.sum(e ** 2))
    assert stats.kstest(draws, post.cdf).pvalue > 1e-3
