"""Hybrid precoder and combiner design via SVD plus phase extraction.

The fully digital reference takes the leading singular vectors of the
channel.  The analog stages approximate them with unit-modulus phase
shifter matrices through alternating minimization: phase extraction
for the analog matrix, an orthogonal Procrustes step for the digital
factor.  A second SVD of the analog-equivalent channel supplies the
digital precoder/combiner pair, and a scalar gain keeps the total
transmit power at the stream count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AltMinResult:
    """Outcome of the alternating minimization."""

    analog: np.ndarray
    digital: np.ndarray
    objectives: np.ndarray
    converged: bool

    @property
    def n_iterations(self) -> int:
        return len(self.objectives)


@dataclass(frozen=True)
class PrecoderSet:
    """Transmit/receive matrices for one channel realization.

    f_rf (n_tx, n_rf) and w_rf (n_rx, n_rf) are unit-modulus analog
    stages, f_bb/u_bb (n_rf, n_s) the digital stages from the SVD of
    the equivalent channel, v_diag its leading singular values, and
    rho the transmit power normalization.
    """

    f_rf: np.ndarray
    f_bb: np.ndarray
    w_rf: np.ndarray
    u_bb: np.ndarray
    v_diag: np.ndarray
    rho: float

    @property
    def n_streams(self) -> int:
        return self.v_diag.size

    @property
    def rx_combiner(self) -> np.ndarray:
        """Effective receive combiner u_bb^H w_rf^H, shape (n_s, n_rx)."""
        return self.u_bb.conj().T @ self.w_rf.conj().T


@dataclass(frozen=True)
class StreamMetrics:
    """Per-stream link quality after combining.

    beta[k] is the post-processing SNR of stream k, xi[k] the noise
    enhancement of the non-orthogonal analog combiner, omega the mean
    received signal power per antenna at unit transmit scaling, and
    sigma2 the per-antenna noise variance consistent with all three.
    """

    beta: np.ndarray
    xi: np.ndarray
    omega: float
    sigma2: float


def optimal_fdp(h: np.ndarray, n_streams: int) -> tuple[np.ndarray, np.ndarray]:
    """Fully digital precoder/combiner: leading right/left singular vectors."""
    n_rx, n_tx = h.shape
    if not 1 <= n_streams <= min(n_rx, n_tx):
        raise ValueError(f"stream count {n_streams} exceeds channel rank bound")
    u, _, vh = np.linalg.svd(h, full_matrices=False)
    return vh[:n_streams].conj().T, u[:, :n_streams]


def pe_altmin(
    target: np.ndarray,
    n_rf: int,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> AltMinResult:
    """Factor a semi-unitary target into unit-modulus times semi-unitary.

    Alternates two closed-form updates: the analog matrix takes the
    entrywise phases of target @ digital^H, and the digital factor is
    the scaled Procrustes solution from the SVD of analog^H @ target.
    Starts from an identity-padded digital factor and stops once the
    residual norm improves by less than tol.
    """
    n_ant, n_streams = target.shape
    if n_rf < n_streams:
        raise ValueError(f"need at least {n_streams} RF chains, got {n_rf}")
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")

    digital = np.eye(n_rf, n_streams, dtype=complex)
    target_power = np.vdot(target, target).real
    objectives = []
    previous = np.inf
    converged = False
    for _ in range(max_iter):
        raw = target @ digital.conj().T
        magnitude = np.abs(raw)
        # Zero entries take phase 0 so the matrix stays unit modulus.
        analog = np.where(magnitude > 0, raw / np.where(magnitude > 0, magnitude, 1.0), 1.0)
        cross = analog.conj().T @ target
        u, s, vh = np.linalg.svd(cross, full_matrices=False)
        rotation = u @ vh
        projected = analog @ rotation
        projected_power = np.vdot(projected, projected).real
        matched = s.sum()
        digital = (matched / projected_power) * rotation
        # At the optimal scale the residual collapses to a power gap.
        objective = np.sqrt(max(target_power - matched**2 / projected_power, 0.0))
        objectives.append(objective)
        if previous - objective < tol:
            converged = True
            break
        previous = objective
    return AltMinResult(
        analog=analog,
        digital=digital,
        objectives=np.asarray(objectives),
        converged=converged,
    )


def equivalent_channel(
    h: np.ndarray, f_rf: np.ndarray, w_rf: np.ndarray
) -> np.ndarray:
    """Channel seen between the RF chains: w_rf^H @ h @ f_rf."""
    return w_rf.conj().T @ h @ f_rf


def digital_from_svd(
    h_eq: np.ndarray, n_streams: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Digital combiner, singular values, and digital precoder of h_eq.

    Returns (u_bb, v_diag, f_bb) with h_eq = u_bb @ diag(v_diag) @
    f_bb^H on the leading n_streams directions, v_diag descending.
    """
    if not 1 <= n_streams <= min(h_eq.shape):
        raise ValueError(f"stream count {n_streams} exceeds equivalent channel size")
    u, s, vh = np.linalg.svd(h_eq)
    return u[:, :n_streams], s[:n_streams], vh[:n_streams].conj().T


def normalize_rho(f_rf: np.ndarray, f_bb: np.ndarray) -> float:
    """Transmit gain making ||rho * f_rf @ f_bb||_F^2 equal the stream count."""
    norm = np.linalg.norm(f_rf @ f_bb)
    if norm == 0:
        raise ValueError("precoder product has zero norm")
    return float(np.sqrt(f_bb.shape[1]) / norm)


def design_precoders(
    h: np.ndarray,
    n_streams: int,
    n_rf: int,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> PrecoderSet:
    """Full hybrid design for one channel realization.

    Runs the alternating minimization against both fully digital
    references, rebuilds the digital stages from the SVD of the
    equivalent channel (the alternating digital factors are only used
    to shape the analog matrices), and normalizes transmit power.
    """
    f_opt, w_opt = optimal_fdp(h, n_streams)
    f_rf = pe_altmin(f_opt, n_rf, tol=tol, max_iter=max_iter).analog
    w_rf = pe_altmin(w_opt, n_rf, tol=tol, max_iter=max_iter).analog
    h_eq = equivalent_channel(h, f_rf, w_rf)
    u_bb, v_diag, f_bb = digital_from_svd(h_eq, n_streams)
    rho = normalize_rho(f_rf, f_bb)
    return PrecoderSet(
        f_rf=f_rf, f_bb=f_bb, w_rf=w_rf, u_bb=u_bb, v_diag=v_diag, rho=rho
    )


def fdp_precoder_set(h: np.ndarray, n_streams: int) -> PrecoderSet:
    """Fully digital reference packaged like a hybrid design.

    The analog slots carry the SVD precoder/combiner directly and the
    digital stages are identities, so xi = 1 and rho = 1.
    """
    f_opt, w_opt = optimal_fdp(h, n_streams)
    eye = np.eye(n_streams, dtype=complex)
    s = np.linalg.svd(h, compute_uv=False)[:n_streams]
    return PrecoderSet(
        f_rf=f_opt, f_bb=eye, w_rf=w_opt, u_bb=eye, v_diag=s, rho=1.0
    )


def received_power_per_antenna(h: np.ndarray, f_rf: np.ndarray) -> float:
    """Mean over receive antennas of |h_q^T f_rf f_rf^H h_q^*|.

    With a unitary digital precoder this equals the average received
    signal power per antenna at unit transmit scaling.
    """
    projected = h @ f_rf
    return float(np.mean(np.sum(np.abs(projected) ** 2, axis=1)))


def stream_metrics(
    pset: PrecoderSet,
    h: np.ndarray,
    sigma2: float | None = None,
    snr_rx: float | None = None,
) -> StreamMetrics:
    """Per-stream SNR and noise shaping for one design.

    Exactly one of sigma2 (per-antenna noise variance) and snr_rx
    (linear SNR at the receive antennas) must be given; the other is
    derived through sigma2 = rho^2 * omega / snr_rx.  beta[k] =
    rho^2 * v_diag[k]^2 / (sigma2 * xi[k]).
    """
    if (sigma2 is None) == (snr_rx is None):
        raise ValueError("give exactly one of sigma2 and snr_rx")
    combined = pset.w_rf @ pset.u_bb
    xi = np.real(np.sum(np.abs(combined) ** 2, axis=0))
    omega = received_power_per_antenna(h, pset.f_rf)
    if sigma2 is None:
        if snr_rx <= 0:
            raise ValueError("snr_rx must be positive")
        sigma2 = pset.rho**2 * omega / snr_rx
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    beta = (pset.rho**2) * (pset.v_diag**2) / (sigma2 * xi)
    return StreamMetrics(beta=beta, xi=xi, omega=omega, sigma2=float(sigma2))
