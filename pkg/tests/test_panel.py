import numpy as np
import pytest
from scipy import stats

from dpgls.dp_core import AlphaConfig, InverseGamma
from dpgls.errors import ValidationError
from dpgls.mcmc import McmcConfig
from dpgls.panel import (
    PanelData, composite_covariance, composite_covariances, crem_augment, run_dp_crem, run_dp_rem,
    run_parametric_crem, run_parametric_rem, sample_u, translog_design, translog_restore, u_posterior,
)
from dpgls.sim import SimScenario, generate_panel_dataset
from dpgls.stats_kernels import RngStream

SHORT = McmcConfig(n_sweeps=500, burn_in=100, seed=2)


def test_composite_covariance_examples():
    np.testing.assert_allclose(composite_covariance([1, 2, 3], 0.5),
                               [[1.5, .5, .5], [.5, 2.5, .5], [.5, .5, 3.5]])
    np.testing.assert_allclose(composite_covariance([1, 2], 0.0), np.diag([1, 2]))
    batch = composite_covariances(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0.1, 0.2]))
    np.testing.assert_allclose(batch[1], composite_covariance([3.0, 4.0], 0.2))
    with pytest.raises(ValidationError):
        composite_covariance([1.0, -1.0], 0.1)


def test_sample_u_hand_example():
    mu, s2, draw = sample_u([1.0, 1.0], 1.0, [1.0, 1.0])
    assert s2 == pytest.approx(1 / 3) and mu == pytest.approx(2 / 3)
    assert draw is None
    assert sample_u([1.0, 1.0], 1.0, [1.0, 1.0], RngStream(0))[2] is not None


def test_sample_u_flat_limit():
    mu, _, _ = sample_u([1.0, 3.0], 1e12, [1.0, 3.0])
    assert mu == pytest.approx((1.0 / 1.0 + 3.0 / 3.0) / (1.0 + 1.0 / 3.0), rel=1e-9)


@pytest.mark.parametrize("T", [1, 2, 3])
def test_sample_u_grid_oracle(T):
    g = np.random.default_rng(T)
    r = g.normal(size=T)
    sig2 = g.uniform(0.5, 2.0, T)
    d2 = 1.7
    grid = np.linspace(-12, 12, 200_001)
    logp = stats.norm.logpdf(grid, scale=np.sqrt(d2))
    for t in range(T):
        logp += stats.norm.logpdf(r[t], loc=grid, scale=np.sqrt(sig2[t]))
    w = np.exp(logp - logp.max())
    w /= w.sum()
    m = np.sum(w * grid)
    sd = np.sqrt(np.sum(w * (grid - m) ** 2))
    mu, s2, _ = sample_u(r, d2, sig2)
    assert abs(mu - m) < 1e-3 and abs(np.sqrt(s2) - sd) < 1e-3


def test_crem_augment():
    X = np.zeros((2, 3, 2))
    X[:, :, 0] = [1.0, 2.0, 3.0]
    X[:, :, 1] = 7.0
    d = PanelData(np.zeros((2, 3)), X, ["a", "b"])
    aug = crem_augment(d, ["a", 1])
    assert aug.names == ["a", "b", "mean(a)", "mean(b)"]
    np.testing.assert_allclose(aug.X[:, :, 2], 2.0)
    np.testing.assert_allclose(aug.X[:, :, 3], aug.X[:, :, 1])
    assert crem_augment(d, []) is d
    with pytest.raises(ValidationError):
        crem_augment(d, [5])


def test_paneldata_validation():
    with pytest.raises(ValidationError):
        PanelData(np.zeros((2, 3)), np.zeros((2, 2, 1)))
    with pytest.raises(ValidationError):
        PanelData(np.full((1, 1), np.inf), np.zeros((1, 1, 1)))


@pytest.fixture(scope="module")
def rem_data():
    return generate_panel_dataset(SimScenario(model="rem", N=150), RngStream(0).child(0))


def test_parametric_rem_recovers_truth(rem_data):
    ch = run_parametric_rem(rem_data, cfg=SHORT)
    assert np.all(np.abs(ch.posterior_mean() - [5.0, 10.0]) < 4 * ch.posterior_sd())
    assert set(ch.extra) == {"sigma2", "d2"}


def test_dp_rem_runs_and_records(rem_data):
    ch = run_dp_rem(rem_data, cfg=SHORT)
    assert np.all(np.abs(ch.posterior_mean() - [5.0, 10.0]) < 4 * ch.posterior_sd())
    assert set(ch.extra) == {"K_u", "K_eta", "alpha_u", "alpha_eta"}
    assert all(len(v) == len(ch) for v in ch.extra.values())


def test_composite_posterior_flag(rem_data):
    ch = run_parametric_rem(rem_data, cfg=McmcConfig(n_sweeps=50, burn_in=10), composite="posterior")
    assert len(ch) == 40
    with pytest.raises(ValidationError):
        run_parametric_rem(rem_data, cfg=McmcConfig(n_sweeps=5, burn_in=1), composite="nope")


def test_rem_seed_determinism(rem_data):
    cfg = McmcConfig(n_sweeps=40, burn_in=5, seed=9)
    np.testing.assert_array_equal(run_dp_rem(rem_data, cfg=cfg).beta, run_dp_rem(rem_data, cfg=cfg).beta)
    np.testing.assert_array_equal(run_parametric_rem(rem_data, cfg=cfg).beta,
                                  run_parametric_rem(rem_data, cfg=cfg).beta)


def test_tiny_effect_variance_collapses_to_pooled(rem_data):
    # with d2 forced near zero the model is pooled regression with a common variance
    g_u = InverseGamma(1e6, 1e-6)
    ch = run_parametric_rem(rem_data, var_priors=(InverseGamma(), g_u), cfg=McmcConfig(n_sweeps=3000, burn_in=500))
    X = rem_data.X.reshape(-1, 2)
    y = rem_data.y.reshape(-1)
    ols = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(ch.posterior_mean(), ols, atol=4 * ch.posterior_sd().max() / np.sqrt(100))


def test_crem_recovers_truth():
    d = generate_panel_dataset(SimScenario(model="crem", N=200), RngStream(1).child(0))
    for fit in (run_dp_crem, run_parametric_crem):
        ch = fit(d, [0, 1], cfg=SHORT)
        assert ch.names == ["x1", "x2", "mean(x1)", "mean(x2)"]
        assert np.all(np.abs(ch.posterior_mean() - [5.0, 10.0, -2.0, 2.0]) < 4 * ch.posterior_sd())


def test_crem_empty_which_equals_rem(rem_data):
    cfg = McmcConfig(n_sweeps=30, burn_in=5)
    np.testing.assert_array_equal(run_dp_crem(rem_data, [], cfg=cfg).beta, run_dp_rem(rem_data, cfg=cfg).beta)


def test_dp_rem_pinned_alpha_single_groups(rem_data):
    cfg = McmcConfig(n_sweeps=30, burn_in=0, alpha=AlphaConfig.fixed(1e-10))
    ch = run_dp_rem(rem_data, cfg=cfg)
    assert np.all(ch.extra["K_u"] == 1) and np.all(ch.extra["K_eta"] == 1)


def test_translog_design_equal_prices():
    resp, cols, names = translog_design(np.array([2.0, 3.0]), np.ones((2, 2)), np.array([[1.5], [2.5]]))
    assert names == ["alpha_q1", "delta_q1q1", "beta_p1", "phi_p1p1", "gamma_p1q1"]
    np.testing.assert_allclose(cols[:, 2:], 0.0)
    np.testing.assert_allclose(resp, np.log([2.0, 3.0]))
    with pytest.raises(ValidationError):
        translog_design(np.array([1.0]), np.array([[1.0, -1.0]]), np.array([[1.0]]))


def test_translog_restore_homogeneity():
    coef = {"beta_l": 0.3, "beta_f": 0.5, "phi_ll": 0.1, "phi_ff": 0.2, "phi_lf": -0.05,
            "gamma_lq": 0.02, "gamma_fq": -0.01}
    full = translog_restore(coef, ["l", "f", "k"], ["q"])
    assert full["beta_l"] + full["beta_f"] + full["beta_k"] == pytest.approx(1.0, abs=1e-15)
    assert full["phi_ll"] + full["phi_lf"] + full["phi_lk"] == pytest.approx(0.0, abs=1e-15)
    assert full["gamma_lq"] + full["gamma_fq"] + full["gamma_kq"] == pytest.approx(0.0, abs=1e-15)


def test_translog_round_trip_recovery():
    # cost data from a known restricted translog, estimated through the design
    g = np.random.default_rng(5)
    N, T = 120, 4
    p = np.exp(g.normal(0, 0.3, (N * T, 3)))
    q = np.exp(g.normal(1, 0.5, (N * T, 2)))
    _, cols, names = translog_design(np.ones(N * T), p, q, ["l", "f", "k"], ["a", "b"])
    truth = g.normal(0, 0.3, len(names))
    u = np.repeat(g.normal(0, 0.2, N), T)
    logc = cols @ truth + np.log(p[:, 2]) + u + g.normal(0, 0.1, N * T)
    resp, cols2, _ = translog_design(np.exp(logc), p, q, ["l", "f", "k"], ["a", "b"])
    d = PanelData(resp.reshape(N, T), cols2.reshape(N, T, -1), names)
    ch = run_parametric_rem(d, cfg=McmcConfig(n_sweeps=800, burn_in=200))
    assert np.all(np.abs(ch.posterior_mean() - truth) < 3.5 * ch.posterior_sd())


def test_u_posterior_vectorized():
    mu, s2 = u_posterior(np.ones((3, 2)), np.array([1.0, 2.0, 3.0]), np.ones((3, 2)))
    assert mu.shape == (3,) and s2[0] == pytest.approx(1 / 3)
