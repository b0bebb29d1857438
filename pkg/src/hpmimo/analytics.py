"""Closed-form spectral efficiency and error rate predictions.

All expressions are conditioned on one channel realization through
the per-stream SNRs beta[k]; ensemble curves are produced by
averaging these outputs over realizations.  Phase noise enters via
the total rotation variance sigma2_psi of the shared oscillators.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import erfc

from . import channel as _channel
from . import precoding as _precoding
from .modulation import build_qam, polar_geometry


def qfunc(x) -> np.ndarray:
    """Gaussian tail probability Q(x) = erfc(x / sqrt(2)) / 2."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@lru_cache(maxsize=1)
def _qam16_deltas() -> tuple[float, float, float, float]:
    """Radial and angular decision gaps of unit-energy 16-QAM."""
    geo = polar_geometry(build_qam(16))
    d_rho1, d_rho2 = geo.delta_rho
    # delta_theta holds (inner ring, middle small, middle large, outer).
    d_theta1, d_theta2 = geo.delta_theta[0], geo.delta_theta[1]
    return float(d_rho1), float(d_rho2), float(d_theta1), float(d_theta2)


def se_sum(beta) -> float:
    """Spectral efficiency sum(log2(1 + beta_k)) without phase noise."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise ValueError("beta must be non-negative")
    return float(np.sum(np.log2(1.0 + beta)))


def se_after_pilots(beta, n_pilots: int) -> float:
    """Spectral efficiency over the data streams only.

    Pilot streams occupy the strongest (lowest-index) entries, so the
    sum runs over beta[n_pilots:].
    """
    beta = np.asarray(beta, dtype=float)
    if not 0 <= n_pilots < beta.size:
        raise ValueError("pilot count must leave at least one data stream")
    return se_sum(beta[n_pilots:])


def se_pn_lower_bound(beta, sigma2_psi: float) -> float:
    """Achievable-rate lower bound under residual common phase noise.

    Per stream the SINR is 1 / ((e^s - 1) + e^s / beta_k) with
    s = sigma2_psi: the coherent gain e^(-s/2) shrinks the signal,
    the rotation jitter converts the rest into interference, and the
    thermal term is inflated accordingly.  Reduces to se_sum at s=0.
    """
    beta = np.asarray(beta, dtype=float)
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    expo = np.exp(sigma2_psi)
    sinr = 1.0 / ((expo - 1.0) + expo / beta)
    return float(np.sum(np.log2(1.0 + sinr)))


def se_pn_lower_bound_decomposed(beta, sigma2_psi: float) -> float:
    """Same bound assembled from its signal/interference/noise parts.

    Signal power e^(-s), self-interference (1 - e^(-s)), thermal
    1/beta_k; kept as an independent route for cross-checking.
    """
    beta = np.asarray(beta, dtype=float)
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    signal = np.exp(-sigma2_psi)
    interference = 1.0 - signal
    sinr = signal / (interference + 1.0 / beta)
    return float(np.sum(np.log2(1.0 + sinr)))


def interference_power(v_kk: float, sigma2_psi: float) -> float:
    """Self-interference power (1 - e^(-s)) * |v_kk|^2 of one stream."""
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    return float((1.0 - np.exp(-sigma2_psi)) * np.abs(v_kk) ** 2)


def se_pn_high_snr(n_streams: int, sigma2_psi: float) -> float:
    """Infinite-SNR limit of the phase noise bound.

    n_streams * log2(e^s / (e^s - 1)); diverges as sigma2_psi -> 0.
    """
    if n_streams < 1:
        raise ValueError("stream count must be positive")
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    if sigma2_psi == 0:
        return float(np.inf)
    expo = np.exp(sigma2_psi)
    return float(n_streams * np.log2(expo / (expo - 1.0)))


def ber_awgn_qam(beta, order: int) -> float:
    """Exact Gray-coded square QAM bit error rate, averaged over streams.

    Standard alternating-sign sum over the per-axis PAM crossings; for
    order 4 it collapses to mean(Q(sqrt(beta))).
    """
    beta = np.asarray(beta, dtype=float)
    side = int(round(np.sqrt(order)))
    if side * side != order or order < 4:
        raise ValueError(f"order must be a square QAM size, got {order}")
    bits = int(np.log2(order))
    total = np.zeros_like(beta)
    for p in range(1, int(np.log2(side)) + 1):
        for c in range(int((1 - 2.0**-p) * side)):
            sign = (-1.0) ** (c * 2 ** (p - 1) // side)
            weight = 2 ** (p - 1) - int(np.floor(c * 2 ** (p - 1) / side + 0.5))
            arg = np.sqrt(3.0 * (2 * c + 1) ** 2 * beta / (order - 1))
            total = total + sign * weight * qfunc(arg)
    per_stream = 4.0 / (side * bits) * total
    return float(np.mean(per_stream))


def _qam16_stream_error(beta, sigma2_psi: float) -> np.ndarray:
    """Per-stream symbol error probability of 16-QAM under phase noise."""
    d_rho1, d_rho2, d_theta1, d_theta2 = _qam16_deltas()
    beta = np.asarray(beta, dtype=float)
    sigma2_n = 1.0 / (2.0 * beta)
    sigma_n = np.sqrt(sigma2_n)
    angular = np.sqrt(sigma2_psi + sigma2_n)
    radial = 0.5 * (qfunc(d_rho1 / (2 * sigma_n)) + 3.0 * qfunc(d_rho2 / (2 * sigma_n)))
    return radial + qfunc(d_theta1 / (2 * angular)) + qfunc(d_theta2 / (2 * angular))


def ber_qam16_pn(beta, sigma2_psi: float) -> float:
    """Approximate 16-QAM BER under common phase noise (Gray labels)."""
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    return float(np.mean(_qam16_stream_error(beta, sigma2_psi)) / 4.0)


def qam16_region_budget(beta: float, sigma2_psi: float) -> tuple[float, float]:
    """Symbol error budgets of the two 16-QAM decision-region families.

    Returns totals over the eight inner/outer-ring points and the
    eight middle-ring points; their sum over 16 symbols reproduces the
    per-stream error of ber_qam16_pn.
    """
    d_rho1, d_rho2, d_theta1, d_theta2 = _qam16_deltas()
    sigma_n = np.sqrt(1.0 / (2.0 * beta))
    angular = np.sqrt(sigma2_psi + sigma_n**2)
    inner_outer = 8.0 * (qfunc(d_rho1 / (2 * sigma_n)) + qfunc(d_rho2 / (2 * sigma_n)))
    inner_outer += 16.0 * qfunc(d_theta1 / (2 * angular))
    middle = 16.0 * (qfunc(d_rho2 / (2 * sigma_n)) + qfunc(d_theta2 / (2 * angular)))
    return float(inner_outer), float(middle)


def ber_qam16_pn_floor(sigma2_psi: float) -> float:
    """High-SNR BER floor of 16-QAM under common phase noise."""
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    if sigma2_psi == 0:
        return 0.0
    _, _, d_theta1, d_theta2 = _qam16_deltas()
    sigma = np.sqrt(sigma2_psi)
    return float(0.25 * (qfunc(d_theta1 / (2 * sigma)) + qfunc(d_theta2 / (2 * sigma))))


def ber_pqam_pn(beta, order: int, n_rings: int, sigma2_psi: float) -> float:
    """Approximate ring/phase QAM BER under common phase noise.

    One Gray-coded amplitude crossing plus one phase crossing per
    symbol: (2/log2 M) * (Q(sqrt(6 beta / (4 gamma^2 - 1))) +
    Q(pi gamma / (M sqrt(sigma2_psi + 1/(2 beta))))).
    """
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    if order < 2 or n_rings < 1 or order % n_rings != 0:
        raise ValueError("invalid ring/phase configuration")
    beta = np.asarray(beta, dtype=float)
    bits = np.log2(order)
    radial = qfunc(np.sqrt(6.0 * beta / (4.0 * n_rings**2 - 1.0)))
    angular = qfunc(
        np.pi * n_rings / (order * np.sqrt(sigma2_psi + 1.0 / (2.0 * beta)))
    )
    return float(np.mean(2.0 / bits * (radial + angular)))


def ber_pqam_pn_floor(order: int, n_rings: int, sigma2_psi: float) -> float:
    """High-SNR BER floor of ring/phase QAM under common phase noise."""
    if sigma2_psi < 0:
        raise ValueError("sigma2_psi must be non-negative")
    if sigma2_psi == 0:
        return 0.0
    bits = np.log2(order)
    return float(
        2.0 / bits * qfunc(np.pi * n_rings / (order * np.sqrt(sigma2_psi)))
    )


def ber_qam4_pn_floor(sigma2_psi: float) -> float:
    """High-SNR BER floor of 4-QAM: Q(pi / (4 sqrt(sigma2_psi)))."""
    return ber_pqam_pn_floor(4, 1, sigma2_psi)


def semi_analytic_ber(
    kind: str,
    order: int,
    n_rings: int,
    beta,
    sigma2_psi: float,
    compensated: bool,
) -> float:
    """Dispatch the matching BER prediction for one scheme and regime.

    Compensated links (and links without phase noise) use the
    no-phase-noise expressions; 16-QAM has its own polar-geometry
    approximation, while 4-QAM and ring/phase QAM share the generic
    ring/phase form.
    """
    effective = 0.0 if compensated else sigma2_psi
    if kind == "qam":
        if effective == 0.0:
            return ber_awgn_qam(beta, order)
        if order == 16:
            return ber_qam16_pn(beta, effective)
        if order == 4:
            return ber_pqam_pn(beta, 4, 1, effective)
        raise ValueError(f"no phase noise BER form for {order}-qam")
    if kind == "pqam":
        return ber_pqam_pn(beta, order, n_rings, effective)
    raise ValueError(f"no analytic BER for {order}-{kind}")


def ber_floor(kind: str, order: int, n_rings: int, sigma2_psi: float) -> float:
    """High-SNR floor matching semi_analytic_ber's uncompensated path."""
    if kind == "qam" and order == 16:
        return ber_qam16_pn_floor(sigma2_psi)
    if kind == "qam" and order == 4:
        return ber_qam4_pn_floor(sigma2_psi)
    if kind == "pqam":
        return ber_pqam_pn_floor(order, n_rings, sigma2_psi)
    raise ValueError(f"no analytic floor for {order}-{kind}")


def evaluate_channel_dump(
    dump_path: str,
    snr_db,
    sigma2_psi_values,
    n_streams: int,
    n_rf: int,
) -> list[dict]:
    """Average the closed-form SE curves over a stored channel ensemble.

    Reads realizations from a channel dump, designs hybrid precoders
    for each, and returns one record per (snr, sigma2_psi) point with
    the ensemble-mean phase noise SE bound.
    """
    params, records = _channel.read_channel_dump(dump_path)
    if not records:
        raise ValueError(f"channel dump {dump_path} holds no records")
    snr_db = np.asarray(snr_db, dtype=float)
    betas = []
    for _, h in records:
        pset = _precoding.design_precoders(h, n_streams, n_rf)
        metrics = _precoding.stream_metrics(pset, h, snr_rx=1.0)
        betas.append(metrics.beta)
    unit_beta = np.asarray(betas)
    rows = []
    for sigma2_psi in sigma2_psi_values:
        for snr in snr_db:
            scale = 10.0 ** (snr / 10.0)
            se = np.mean(
                [se_pn_lower_bound(b * scale, sigma2_psi) for b in unit_beta]
            )
            rows.append(
                {
                    "source": "analytic",
                    "snr_db": float(snr),
                    "sigma2_psi": float(sigma2_psi),
                    "n_s": n_streams,
                    "n_rf": n_rf,
                    "n_t": params.n_tx,
                    "n_r": params.n_rx,
                    "se_bps_hz": float(se),
                    "n_channels": len(records),
                }
            )
    return rows
