"""Tests for the Gaussian phase noise model and pilot compensation."""

import numpy as np
import pytest

from hpmimo.channel import ChannelParams, generate_channel
from hpmimo.phasenoise import (
    REGIMES,
    PnConfig,
    apply_clo,
    coherent_gain,
    compensate,
    estimate_pn,
    sample_pn,
)
from hpmimo.precoding import design_precoders, stream_metrics


def test_regime_table():
    assert REGIMES == {"strong": 1e-1, "medium": 1e-2, "low": 1e-3, "off": 0.0}


def test_from_regime_splits_evenly():
    cfg = PnConfig.from_regime("strong")
    assert cfg.sigma2_tx == cfg.sigma2_rx == 0.05
    assert cfg.sigma2_psi == pytest.approx(0.1)
    with pytest.raises(ValueError):
        PnConfig.from_regime("extreme")


def test_config_validation():
    with pytest.raises(ValueError):
        PnConfig(sigma2_tx=-0.1, sigma2_rx=0.0)


def test_sample_pn_variances():
    """Independent tx/rx phases sum to sigma2_psi = sigma2_tx + sigma2_rx."""
    cfg = PnConfig(sigma2_tx=0.03, sigma2_rx=0.07)
    rng = np.random.default_rng(50)
    trace = sample_pn(cfg, 400_000, rng)
    np.testing.assert_allclose(np.var(trace.phi_tx), 0.03, rtol=0.02)
    np.testing.assert_allclose(np.var(trace.phi_rx), 0.07, rtol=0.02)
    np.testing.assert_allclose(np.var(trace.psi), 0.10, rtol=0.02)
    # Independence: any shared draw would show up as |corr| near one.
    corr = np.corrcoef(trace.phi_tx, trace.phi_rx)[0, 1]
    assert abs(corr) < 0.01


def test_characteristic_function():
    """E[exp(j psi)] = exp(-sigma2_psi / 2) for Gaussian psi."""
    cfg = PnConfig.from_total(0.1)
    rng = np.random.default_rng(51)
    trace = sample_pn(cfg, 1_000_000, rng)
    measured = np.abs(np.mean(np.exp(1j * trace.psi)))
    np.testing.assert_allclose(measured, coherent_gain(0.1), rtol=0.003)


def test_zero_variance_trace_is_zero():
    cfg = PnConfig.from_regime("off")
    trace = sample_pn(cfg, 100, np.random.default_rng(52))
    assert np.all(trace.psi == 0.0)


def test_apply_clo_without_noise_is_diagonal_rotation():
    """r = exp(j psi) rho diag(v) s when the noise is switched off."""
    params = ChannelParams(n_tx=32, n_rx=16)
    h = generate_channel(params, np.random.default_rng(53))
    pset = design_precoders(h, 2, 2)
    symbols = np.array([1.0 + 0.0j, 0.0 - 1.0j])
    trace = sample_pn(PnConfig.from_total(0.1), 3, np.random.default_rng(54))
    received = apply_clo(symbols, pset, np.zeros(params.n_rx, dtype=complex), trace, 2)
    expected = np.exp(1j * trace.psi[2]) * pset.rho * pset.v_diag * symbols
    np.testing.assert_allclose(received, expected, atol=1e-12)


def test_apply_clo_noise_is_shaped_by_combiner():
    """Stream k noise variance is sigma2 * ||row k of the combiner||^2."""
    params = ChannelParams(n_tx=32, n_rx=16)
    h = generate_channel(params, np.random.default_rng(55))
    pset = design_precoders(h, 2, 2)
    sigma2 = 0.5
    metrics = stream_metrics(pset, h, sigma2=sigma2)
    rng = np.random.default_rng(56)
    trace = sample_pn(PnConfig.from_total(0.01), 1, rng)
    n = 100_000
    noise = np.sqrt(sigma2 / 2.0) * (
        rng.standard_normal((params.n_rx, n)) + 1j * rng.standard_normal((params.n_rx, n))
    )
    collected = np.empty((2, n), dtype=complex)
    zeros = np.zeros(2, dtype=complex)
    for i in range(n):
        collected[:, i] = apply_clo(zeros, pset, noise[:, i], trace, 0)
    np.testing.assert_allclose(np.var(collected, axis=1), sigma2 * metrics.xi, rtol=0.02)


def test_estimate_pn_recovers_common_phase():
    """Pilot averaging finds psi up to the additive noise jitter."""
    params = ChannelParams(n_tx=64, n_rx=32)
    h = generate_channel(params, np.random.default_rng(57))
    pset = design_precoders(h, 4, 4)
    pilots = np.array([1.0 + 0.0j, 1.0 + 0.0j])
    errors = []
    rng = np.random.default_rng(58)
    metrics = stream_metrics(pset, h, snr_rx=1000.0)
    trace = sample_pn(PnConfig.from_total(0.1), 500, rng)
    for slot in range(500):
        symbols = np.zeros(4, dtype=complex)
        symbols[:2] = pilots
        noise = np.sqrt(metrics.sigma2 / 2.0) * (
            rng.standard_normal(params.n_rx) + 1j * rng.standard_normal(params.n_rx)
        )
        received = apply_clo(symbols, pset, noise, trace, slot)
        psi_hat = estimate_pn(received, pset, np.arange(2), pilots)
        errors.append(psi_hat - trace.psi[slot])
    rms = np.sqrt(np.mean(np.square(errors)))
    # The pilot estimate is limited by the per-stream noise, far below
    # the sigma_psi = 0.32 rad swing it has to track.
    assert rms < 0.1


def test_compensate_inverts_known_rotation():
    obs = np.array([0.5 + 0.2j, -1.0 + 0.0j])
    rotated = obs * np.exp(1j * 0.4)
    np.testing.assert_allclose(compensate(rotated, 0.4), obs, atol=1e-12)


def test_sample_pn_deterministic():
    cfg = PnConfig.from_regime("medium")
    a = sample_pn(cfg, 64, np.random.default_rng(59))
    b = sample_pn(cfg, 64, np.random.default_rng(59))
    np.testing.assert_array_equal(a.psi, b.psi)
