"""Symbol detection on normalized per-stream observations.

After derotating by the stream gain, a Euclidean detector picks the
nearest constellation point.  The polar detector instead weighs the
radial error by the thermal noise variance and the wrapped angular
error by the combined phase noise plus thermal variance, which is the
right metric when a common oscillator rotation dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modulation import Constellation


@dataclass(frozen=True)
class DetectorConfig:
    """Noise knowledge for one stream.

    sigma2_n is the per-quadrature thermal variance after gain
    normalization, 1/(2*beta); gamma2 = sigma2_psi + sigma2_n is the
    effective angular error variance at unit symbol energy.
    """

    sigma2_n: float
    gamma2: float

    def __post_init__(self) -> None:
        if self.sigma2_n <= 0 or self.gamma2 <= 0:
            raise ValueError("noise variances must be positive")

    @classmethod
    def for_stream(cls, sigma2_psi: float, beta: float) -> "DetectorConfig":
        if beta <= 0:
            raise ValueError("beta must be positive")
        sigma2_n = 1.0 / (2.0 * beta)
        return cls(sigma2_n=sigma2_n, gamma2=sigma2_psi + sigma2_n)


def normalize_stream(received, rho: float, v_kk: float) -> np.ndarray:
    """Remove the per-stream gain rho * v_kk from the observation."""
    gain = rho * v_kk
    if abs(gain) == 0:
        raise ValueError("stream gain is zero")
    return np.asarray(received) / gain


def wrap_phase(x) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(x, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def euclidean_detect(observations, constellation: Constellation) -> np.ndarray:
    """Nearest-point decisions; ties resolve to the lowest index."""
    obs = np.atleast_1d(np.asarray(observations, dtype=complex))
    d2 = np.abs(obs[:, None] - constellation.points[None, :]) ** 2
    return np.argmin(d2, axis=1)


def polar_detect(
    observations, constellation: Constellation, cfg: DetectorConfig
) -> np.ndarray:
    """Minimum weighted polar distance decisions.

    d = (|r| - |s|)^2 / sigma2_n + wrap(arg r - arg s)^2 / gamma2,
    with ties resolved to the lowest index.
    """
    obs = np.atleast_1d(np.asarray(observations, dtype=complex))
    radius_err = np.abs(obs)[:, None] - np.abs(constellation.points)[None, :]
    angle_err = wrap_phase(
        np.angle(obs)[:, None] - np.angle(constellation.points)[None, :]
    )
    d = radius_err**2 / cfg.sigma2_n + angle_err**2 / cfg.gamma2
    return np.argmin(d, axis=1)


def count_errors(
    tx_bits: np.ndarray, rx_bits: np.ndarray, bits_per_symbol: int
) -> tuple[int, int]:
    """Bit and symbol error counts between two aligned bit arrays."""
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError("bit arrays must have matching shapes")
    if bits_per_symbol < 1 or tx.size % bits_per_symbol != 0:
        raise ValueError("bit count must be a multiple of bits_per_symbol")
    flips = tx != rx
    bit_errors = int(np.count_nonzero(flips))
    symbol_errors = int(np.count_nonzero(flips.reshape(-1, bits_per_symbol).any(axis=1)))
    return bit_errors, symbol_errors
