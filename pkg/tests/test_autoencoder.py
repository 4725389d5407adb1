from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gsfavar import autoencoder as ae
from gsfavar.errors import ConfigError, ShapeMismatch
from gsfavar.numeric import RngStream
from oracles import fd_gradient_errors, random_gs_ae, ssl_penalty_mp


@pytest.mark.parametrize("activation", ["tanh", "leaky_relu(0.01)", "leaky_relu(1e-16)", "identity"])
def test_gradient_matches_finite_differences(activation):
    params, ssl, x = random_gs_ae(activation, seed=3)
    errs = fd_gradient_errors(params, ssl, x, 250)
    assert errs.max() < 1e-5


def test_gradient_without_ssl_and_plain():
    params, _, x = random_gs_ae("tanh", seed=4)
    assert fd_gradient_errors(params, None, x, 100).max() < 1e-5
    arch = ae.GsAeArchitecture.evenly_spaced(10, 2, 3, ae.Activation.parse("tanh"), 1, grouped=False)
    plain = ae.init_params(arch, np.zeros(10, dtype=int), RngStream(0))
    x = np.random.default_rng(0).standard_normal((8, 10))
    assert fd_gradient_errors(plain, None, x, 100).max() < 1e-5


def test_gamma_posterior_closed_forms():
    assert ae.gamma_posterior(np.array([0.0, 0.3, -2.0]), ae.SslConfig(5.0, 5.0)).tolist() == [0.5, 0.5, 0.5]
    assert ae.gamma_posterior(np.array([0.0]), ae.SslConfig(1000.0, 1.0))[0] == pytest.approx(1 / 1001, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.05, 0.05), st.floats(10.0, 2000.0), st.floats(0.01, 5.0))
def test_gamma_posterior_ratio(beta, lam0, lam1):
    p = ae.gamma_posterior(np.array([beta]), ae.SslConfig(lam0, lam1))[0]
    psi1 = lam1 / 2 * np.exp(-lam1 * abs(beta))
    psi0 = lam0 / 2 * np.exp(-lam0 * abs(beta))
    assert p == pytest.approx(psi1 / (psi0 + psi1), rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ssl_penalty_high_precision(seed):
    g = np.random.default_rng(seed)
    b = g.standard_normal((6, 3)) * np.array([0.001, 0.05, 1.0])
    cfg = ae.SslConfig(1000.0, 1.0)
    p = ae.gamma_posterior(b, cfg)
    p[0, 0], p[1, 1] = 0.0, 1.0  # exercise the 0 log 0 convention
    assert abs(ae.ssl_penalty(b, p, cfg) - ssl_penalty_mp(b, p, 1000.0, 1.0)) < 1e-12


def test_anchor_rows_fixed_pattern():
    params, ssl, _ = random_gs_ae("tanh", seed=0, c=4, k=2)
    np.testing.assert_array_equal(params.P[:2], np.eye(2))
    assert np.all((params.P[2:] >= 0) & (params.P[2:] <= 1))


def test_hard_zero_mode_keeps_zeros():
    arch = ae.GsAeArchitecture.evenly_spaced(12, 2, 2, ae.Activation.parse("tanh"), 4)
    ssl = ae.SslConfig(hard_zero_anchors=True)
    params = ae.init_params(arch, np.arange(12) % 4, RngStream(0), ssl)
    x = np.random.default_rng(0).standard_normal((40, 12))
    trained, _ = ae.train(x, params, ssl, ae.TrainConfig(epochs=5, batch_size=8), RngStream(1))
    assert trained.B[0, 1] == 0.0 and trained.B[1, 0] == 0.0
    assert trained.B[0, 0] != 0.0


def test_group_masking_blocks_other_factors():
    # a group whose mask row is zero cannot react to any factor
    params, ssl, x = random_gs_ae("tanh", seed=5)
    params.B[3] = 0.0
    f = ae.encode(params, x)
    base = ae.decode(params, f)
    moved = ae.decode(params, f + 1.0)
    cols = params.groups == 3
    np.testing.assert_allclose(base[:, cols], moved[:, cols], atol=1e-14)
    assert not np.allclose(base[:, ~cols], moved[:, ~cols])


def test_training_reduces_loss_and_is_deterministic():
    params, ssl, _ = random_gs_ae("tanh", seed=6)
    x = np.random.default_rng(1).standard_normal((48, 12))
    cfg = ae.TrainConfig(epochs=30, batch_size=12, lr=5e-3)
    p1, t1 = ae.train(x, params, ssl, cfg, RngStream(9))
    p2, t2 = ae.train(x, params, ssl, cfg, RngStream(9))
    assert t1.reconstruction[-1] < t1.reconstruction[0]
    for a, b in zip(p1.trainable(), p2.trainable()):
        np.testing.assert_array_equal(a, b)


def test_zero_epochs_is_identity():
    params, ssl, x = random_gs_ae("tanh", seed=7)
    out, trace = ae.train(x, params, ssl, ae.TrainConfig(epochs=0, batch_size=4), RngStream(0))
    assert trace.total == []
    for a, b in zip(out.trainable(), params.trainable()):
        np.testing.assert_array_equal(a, b)


def test_train_config_errors():
    params, ssl, x = random_gs_ae("tanh", seed=7)
    with pytest.raises(ConfigError):
        ae.train(x, params, ssl, ae.TrainConfig(batch_size=100), RngStream(0))
    with pytest.raises(ShapeMismatch):
        ae.elbo(params, ssl, np.zeros((0, 12)))


def test_architecture_widths():
    arch = ae.GsAeArchitecture.evenly_spaced(165, 5, 3, ae.Activation(), 10)
    assert arch.encoder_dims == (111, 58, 5)
    assert arch.decoder_dims == (58, 111)


def test_activation_parsing_and_injectivity():
    assert ae.Activation.parse("leaky_relu(0.01)").slope == 0.01
    assert ae.Activation.parse("tanh").injective
    assert not ae.Activation.parse("relu").injective
    params, _, _ = random_gs_ae("tanh", seed=0, n=20, depth=3)
    report = ae.check_injectivity(params)
    assert report.activation_injective
    assert len(report.layer_full_column_rank) == 2


def test_extracted_factors_standardised_and_signed():
    params, ssl, x = random_gs_ae("tanh", seed=8, t_len=50)
    fs = ae.extract_factors(params, x)
    np.testing.assert_allclose(fs.latent.mean(0), 0.0, atol=1e-12)
    np.testing.assert_allclose(fs.latent.std(0), 1.0, atol=1e-12)
    for k in range(2):
        ref = x[:, params.groups == k].mean(1)
        assert np.dot(ref - ref.mean(), fs.latent[:, k]) >= 0
