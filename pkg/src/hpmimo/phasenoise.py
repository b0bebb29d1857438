"""Free-running oscillator phase noise for a shared-LO transceiver.

Each symbol slot gets one Gaussian phase draw per oscillator.  With a
single LO driving all chains on each side, every stream sees the same
rotation: the signal path picks up the sum of the transmit and
receive phases while thermal noise, entering after the receive mixer,
only sees the receive phase.  A pilot-based estimator recovers the
common rotation from known symbols and a derotation undoes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .precoding import PrecoderSet

# Named operating points for the total phase noise variance, split
# evenly between the transmit and receive oscillators.
REGIMES: dict[str, float] = {
    "strong": 1e-1,
    "medium": 1e-2,
    "low": 1e-3,
    "off": 0.0,
}


@dataclass(frozen=True)
class PnConfig:
    """Per-slot phase noise variances of the two oscillators."""

    sigma2_tx: float
    sigma2_rx: float

    def __post_init__(self) -> None:
        if self.sigma2_tx < 0 or self.sigma2_rx < 0:
            raise ValueError("phase noise variances must be non-negative")

    @property
    def sigma2_psi(self) -> float:
        """Variance of the combined signal-path rotation."""
        return self.sigma2_tx + self.sigma2_rx

    @classmethod
    def from_total(cls, sigma2_psi: float) -> "PnConfig":
        return cls(sigma2_tx=sigma2_psi / 2.0, sigma2_rx=sigma2_psi / 2.0)

    @classmethod
    def from_regime(cls, name: str) -> "PnConfig":
        if name not in REGIMES:
            raise ValueError(f"unknown regime {name!r}, expected one of {sorted(REGIMES)}")
        return cls.from_total(REGIMES[name])


@dataclass(frozen=True)
class PnTrace:
    """Sampled phase trajectories, one entry per symbol slot."""

    phi_tx: np.ndarray
    phi_rx: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        """Combined signal-path rotation per slot."""
        return self.phi_tx + self.phi_rx

    @property
    def n_slots(self) -> int:
        return self.phi_tx.size


def sample_pn(cfg: PnConfig, n_slots: int, rng: np.random.Generator) -> PnTrace:
    """Draw independent per-slot phases for both oscillators."""
    if n_slots < 1:
        raise ValueError("slot count must be positive")
    phi_tx = np.sqrt(cfg.sigma2_tx) * rng.standard_normal(n_slots)
    phi_rx = np.sqrt(cfg.sigma2_rx) * rng.standard_normal(n_slots)
    return PnTrace(phi_tx=phi_tx, phi_rx=phi_rx)


def coherent_gain(sigma2_psi: float) -> float:
    """E[exp(j*psi)] for Gaussian psi: exp(-sigma2_psi / 2)."""
    if sigma2_psi < 0:
        raise ValueError("variance must be non-negative")
    return float(np.exp(-sigma2_psi / 2.0))


def apply_clo(
    tx_symbols: np.ndarray,
    pset: PrecoderSet,
    noise: np.ndarray,
    trace: PnTrace,
    slot: int,
) -> np.ndarray:
    """Received streams for one slot under the shared-LO rotation.

    r = exp(j*psi) * rho * diag(v) @ s + exp(j*phi_rx) * C @ n, where C
    is the effective receive combiner and n the per-antenna noise.
    The SVD stages decouple the streams, so the signal path reduces to
    the diagonal singular value gains.
    """
    s = np.asarray(tx_symbols)
    if s.shape != (pset.n_streams,):
        raise ValueError(f"expected {pset.n_streams} stream symbols, got {s.shape}")
    if not 0 <= slot < trace.n_slots:
        raise ValueError(f"slot {slot} outside trace of length {trace.n_slots}")
    signal = np.exp(1j * trace.psi[slot]) * pset.rho * pset.v_diag * s
    filtered = np.exp(1j * trace.phi_rx[slot]) * (pset.rx_combiner @ noise)
    return signal + filtered


def estimate_pn(
    received: np.ndarray,
    pset: PrecoderSet,
    pilot_streams: np.ndarray,
    pilot_symbols: np.ndarray,
) -> float:
    """Estimate the common rotation from known pilot symbols.

    Averages received[q] * conj(s_q) / (rho * v_diag[q] * |s_q|^2)
    over the pilot streams and takes the angle of the result.
    """
    pilot_streams = np.asarray(pilot_streams, dtype=np.int64)
    pilot_symbols = np.asarray(pilot_symbols)
    if pilot_streams.size == 0:
        raise ValueError("at least one pilot stream is required")
    if pilot_symbols.shape != pilot_streams.shape:
        raise ValueError("one pilot symbol per pilot stream is required")
    if np.any(np.abs(pilot_symbols) == 0):
        raise ValueError("pilot symbols must be non-zero")
    gains = pset.rho * pset.v_diag[pilot_streams]
    rotated = received[pilot_streams] * pilot_symbols.conj()
    rotated = rotated / (gains * np.abs(pilot_symbols) ** 2)
    return float(np.angle(np.mean(rotated)))


def compensate(received: np.ndarray, psi_hat: float) -> np.ndarray:
    """Derotate all streams by the estimated common phase."""
    return received * np.exp(-1j * psi_hat)
