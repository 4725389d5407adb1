from __future__ import annotations

import numpy as np
import pytest
from scipy import special

from gsfavar.errors import ConfigError
from gsfavar.numeric import RngStream
from gsfavar.var_tiv import TivPrior, conditional_posterior_mean
from gsfavar.var_tvp import (
    MIX_MEAN,
    MIX_PROB,
    MIX_VAR,
    PriorMatrices,
    TvpPrior,
    _log_chi2_1,
    _log_mixture,
    batch_means_se,
    chain_diagnostics,
    draw_coefficients,
    draw_covariance_rows,
    draw_indicators,
    draw_innovation_covs,
    h_offsets,
    hinv_matrices,
    impact_matrices,
    omega_matrices,
    prior_matrices,
    tvp_data,
    tvp_mcmc,
)
from conftest import simulate_var
from oracles import simulate_tvp, tvp_recovery


def test_mixture_matches_log_chi2_moments():
    mean = MIX_PROB @ MIX_MEAN
    var = MIX_PROB @ (MIX_VAR + MIX_MEAN**2) - mean**2
    assert MIX_PROB.sum() == pytest.approx(1.0, abs=1e-12)
    assert mean == pytest.approx(special.digamma(0.5) + np.log(2.0), abs=1e-3)
    assert var == pytest.approx(np.pi**2 / 2, abs=1e-3)


def test_mixture_density_close_to_exact():
    grid = np.linspace(-40, 6, 40001)
    mix = np.exp(_log_mixture(grid))
    exact = np.exp(_log_chi2_1(grid))
    assert np.trapezoid(exact, grid) == pytest.approx(1.0, abs=1e-6)
    assert np.trapezoid(mix, grid) == pytest.approx(1.0, abs=1e-6)
    # L1 distance of the seven-component approximation is about 0.036
    assert np.trapezoid(np.abs(mix - exact), grid) < 0.05


def test_indicator_frequencies_match_posterior():
    rng = RngStream(0)
    e0 = np.array([-3.0, 0.5])
    ystar = np.tile(e0, (20_000, 1))
    ind = draw_indicators(ystar, np.zeros_like(ystar), rng)
    for col, e in enumerate(e0):
        w = MIX_PROB * np.exp(-0.5 * (e - MIX_MEAN) ** 2 / MIX_VAR) / np.sqrt(MIX_VAR)
        w /= w.sum()
        freq = np.bincount(ind[:, col], minlength=7) / 20_000
        assert np.all(np.abs(freq - w) < 4 * np.sqrt(w * (1 - w) / 20_000) + 1e-4)


def test_structure_helpers():
    n = 4
    g = np.random.default_rng(0)
    h = g.standard_normal((5, 6))
    log_s = g.standard_normal((5, n))
    hinv = hinv_matrices(h, n)
    assert np.allclose(np.triu(hinv, 1), 0) and np.allclose(np.diagonal(hinv, axis1=1, axis2=2), 1)
    for m, sl in zip(range(1, n), h_offsets(n)):
        np.testing.assert_array_equal(hinv[:, m, :m], h[:, sl])
    imp = impact_matrices(h, log_s)
    np.testing.assert_allclose(np.diagonal(imp, axis1=1, axis2=2), np.exp(log_s), rtol=1e-12)
    np.testing.assert_allclose(imp @ np.swapaxes(imp, 1, 2), omega_matrices(h, log_s), atol=1e-12)
    np.testing.assert_allclose(hinv @ imp, np.exp(log_s)[:, :, None] * np.eye(n), atol=1e-12)


def test_prior_matrices_shapes():
    data = np.random.default_rng(0).standard_normal((60, 3))
    mats = prior_matrices(TvpPrior(lags=2), data)
    assert mats.v_a.shape == (18, 18) and mats.dof_a == 19
    assert [s.shape for s in mats.scale_h] == [(1, 1), (2, 2)]
    np.testing.assert_allclose(mats.scale_s, 1e-2 * 4 * 4 * np.eye(3))
    np.testing.assert_allclose(prior_matrices(TvpPrior(lags=2).scaled(100), data).scale_a, 100 * mats.scale_a)


def test_zero_drift_coefficients_nest_constant_var():
    # with Q_a = 0 and constant (h, log s) the coefficient block is the TIV conditional posterior
    coefs = np.array([[[0.5, 0.1], [0.2, 0.3]]])
    omega = np.array([[1.0, 0.3], [0.3, 0.8]])
    data = simulate_var(coefs, omega, 80, 0)
    d = tvp_data(data, 1)
    chol = np.linalg.cholesky(omega)
    h_const = np.linalg.inv(chol / np.diag(chol))[1, 0]
    t1 = d.y.shape[0] + 1
    h_path = np.full((t1, 1), h_const)
    ls_path = np.tile(np.log(np.diag(chol)), (t1, 1))
    sigma = (1.0, 1.0)
    mats = prior_matrices(TvpPrior(lags=1, sigma=sigma), data)
    rng = RngStream(1)
    draws = np.array([draw_coefficients(d, h_path, ls_path, np.zeros((4, 4)), mats, rng) for _ in range(3000)])
    np.testing.assert_allclose(draws - draws[:, :1], 0.0, atol=1e-8)
    target = conditional_posterior_mean(data, TivPrior(lags=1, sigma=sigma), omega)
    se = draws[:, 0].std(0) / np.sqrt(len(draws))
    assert np.all(np.abs(draws[:, 0].mean(0) - target) < 4 * se)


def test_zero_drift_covariance_row_is_conjugate_regression():
    g = np.random.default_rng(2)
    t_len = 100
    e1 = g.standard_normal(t_len)
    e2 = -0.6 * e1 + 0.5 * g.standard_normal(t_len)
    resid = np.column_stack([e1, e2])
    d = tvp_data(np.vstack([np.zeros((1, 2)), resid]), 1)
    d = d._replace(y=resid, x=np.zeros((t_len, 2)), z=np.zeros((t_len, 2, 4)))
    a_path = np.zeros((t_len + 1, 4))
    ls_path = np.tile(np.log([1.0, 0.5]), (t_len + 1, 1))
    mats = PriorMatrices(None, None, None, [None], [None], None, None, 4.0)
    rng = RngStream(3)
    draws = np.array([draw_covariance_rows(d, a_path, ls_path, [np.zeros((1, 1))], mats, rng)[0, 0]
                      for _ in range(4000)])
    # y = -e1 h + 0.5 eps, prior h ~ N(0, 4)
    prec = 1 / 4.0 + e1 @ e1 / 0.25
    mean = (-e1 @ e2 / 0.25) / prec
    assert abs(draws.mean() - mean) < 4 * np.sqrt(1 / prec / len(draws))
    assert draws.var() == pytest.approx(1 / prec, rel=0.1)


def test_innovation_cov_posterior_mean():
    g = np.random.default_rng(4)
    t1 = 200
    a_path = np.cumsum(0.1 * g.standard_normal((t1, 2)), axis=0)
    h_path = np.cumsum(0.05 * g.standard_normal((t1, 1)), axis=0)
    ls_path = np.cumsum(0.1 * g.standard_normal((t1, 2)), axis=0)
    mats = prior_matrices(TvpPrior(lags=1, sigma=(1.0, 1.0)), np.zeros((10, 2)))
    mats = mats._replace(scale_a=0.01 * np.eye(2), dof_a=3.0, v_a=np.eye(2))
    rng = RngStream(5)
    qa = np.array([draw_innovation_covs(a_path, h_path, ls_path, mats, rng)[0] for _ in range(4000)])
    inc = np.diff(a_path, axis=0)
    want = (0.01 * np.eye(2) + inc.T @ inc) / (3 + t1 - 1 - 2 - 1)
    se = qa.std(0) / np.sqrt(len(qa))
    assert np.all(np.abs(qa.mean(0) - want) < 4 * se)


@pytest.fixture(scope="module")
def small_chain():
    y, _, _ = simulate_tvp(0, t_len=80)
    return y, tvp_mcmc(y, TvpPrior(lags=1), 20, 30, 2, RngStream(0))


def test_chain_shapes_and_determinism(small_chain):
    y, chain = small_chain
    assert chain.a.shape == (30, 81, 9)
    assert chain.h.shape == (30, 81, 3) and chain.log_s.shape == (30, 81, 3)
    assert [q.shape for q in chain.q_h] == [(30, 1, 1), (30, 2, 2)]
    assert chain.indicators.shape == (30, 80, 3) and chain.indicators.max() < 7
    again = tvp_mcmc(y, TvpPrior(lags=1), 20, 30, 2, RngStream(0))
    np.testing.assert_array_equal(chain.a, again.a)
    np.testing.assert_array_equal(chain.log_s, again.log_s)
    assert len(list(chain)) == 30


def test_diagnostics_rows(small_chain):
    rows = chain_diagnostics(small_chain[1])
    assert rows and {"parameter", "mean", "sd", "mcse", "ess"} <= set(rows[0])
    assert np.all(np.isfinite([r["mean"] for r in rows]))


def test_batch_means_se_iid():
    x = np.random.default_rng(0).standard_normal((20_000, 2))
    np.testing.assert_allclose(batch_means_se(x), 1 / np.sqrt(20_000), rtol=0.4)


def test_scaled_prior_and_mh_variant_run():
    y, _, _ = simulate_tvp(1, t_len=80)
    loose = tvp_mcmc(y, TvpPrior(lags=1).scaled(100), 10, 10, 1, RngStream(1))
    assert np.all(np.isfinite(loose.a)) and np.all(np.isfinite(loose.log_s))
    # looser innovation priors let the coefficient paths move more
    tight = tvp_mcmc(y, TvpPrior(lags=1), 10, 10, 1, RngStream(1))
    assert np.diff(loose.a, axis=1).std() > np.diff(tight.a, axis=1).std()
    mh = tvp_mcmc(y, TvpPrior(lags=1, sv_mh=True), 10, 20, 1, RngStream(2))
    assert 0.0 < mh.mh_acceptance <= 1.0


def test_short_sample_rejected():
    with pytest.raises(ConfigError):
        tvp_mcmc(np.zeros((10, 3)), TvpPrior(lags=2), 1, 1, 1, RngStream(0))


@pytest.mark.slow
def test_recovery_of_planted_drift():
    res = tvp_recovery(seed=0)
    assert res["rmse"] < res["rmse_ols"]
    assert 0.5 <= res["coverage"] <= 0.85
