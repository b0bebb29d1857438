"""Seeded Monte Carlo sweeps over SNR, phase noise, and modulation.

Every (realization, grid point) pair gets its own counter-based RNG
stream derived from the master seed, so results are bit-identical for
any worker count and no substream is ever reused.  Error-rate points
stop early once every detector has collected enough bit errors, with
the stopping decision taken only at fixed block boundaries to keep
the processed realization set independent of scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import analytics
from .channel import ChannelParams, generate_channel
from .detection import DetectorConfig, count_errors, euclidean_detect, polar_detect
from .modulation import Constellation, build_pqam, build_qam, demap_symbols, map_bits
from .phasenoise import PnConfig, sample_pn
from .precoding import design_precoders, fdp_precoder_set, stream_metrics

# Resampling guard for rank-deficient channel draws.
_MAX_RESAMPLES = 8
_RANK_TOL = 1e-12

DETECTOR_KINDS = ("euc", "pm")

# Column order of the results CSV.  The trailing "series" column tags
# related curves sharing one file (hp, fdp, hp_pilot, hp_closed_form,
# floor).
SCHEMA_COLUMNS = (
    "experiment_id",
    "source",
    "snr_db",
    "sigma2_psi",
    "modulation",
    "shape_gamma",
    "detector",
    "n_s",
    "n_rf",
    "n_pil",
    "n_t",
    "n_r",
    "ber",
    "bit_errors",
    "bits_sent",
    "ci95",
    "se_bps_hz",
    "n_channels",
    "master_seed",
    "series",
)


@dataclass(frozen=True)
class SchemeSpec:
    """One modulation choice: square QAM or ring/phase QAM."""

    kind: str
    order: int
    n_rings: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("qam", "pqam"):
            raise ValueError(f"unknown modulation kind {self.kind!r}")
        if self.kind == "pqam" and self.n_rings < 1:
            raise ValueError("ring/phase QAM needs an explicit ring count")
        # Surface bad orders or ring counts at parse time, not mid-sweep.
        if self.kind == "qam":
            build_qam(self.order)
        else:
            build_pqam(self.order, self.n_rings)

    @property
    def label(self) -> str:
        return f"{self.order}{self.kind}"

    @classmethod
    def from_dict(cls, raw: dict) -> "SchemeSpec":
        return cls(
            kind=str(raw["kind"]),
            order=int(raw["order"]),
            n_rings=int(raw.get("n_rings", 0)),
        )


@lru_cache(maxsize=None)
def _constellation(kind: str, order: int, n_rings: int) -> Constellation:
    if kind == "qam":
        return build_qam(order)
    return build_pqam(order, n_rings)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one sweep."""

    experiment_id: str
    channel: ChannelParams = ChannelParams()
    n_streams: int = 4
    n_rf: int = 4
    n_pilots: int = 0
    snr_db: tuple[float, ...] = tuple(np.arange(-10.0, 40.0 + 1.25, 2.5))
    sigma2_psi: tuple[float, ...] = (0.1,)
    schemes: tuple[SchemeSpec, ...] = (SchemeSpec("qam", 16),)
    detectors: tuple[str, ...] = ("euc",)
    n_channels: int = 10_000
    n_symbols: int = 100
    min_bit_errors: int = 200
    block_size: int = 50
    master_seed: int = 1

    def __post_init__(self) -> None:
        if not self.experiment_id:
            raise ValueError("experiment_id must be non-empty")
        if self.n_rf < self.n_streams:
            raise ValueError("need at least one RF chain per stream")
        if self.n_streams > min(self.channel.n_tx, self.channel.n_rx):
            raise ValueError("stream count exceeds array sizes")
        if not 0 <= self.n_pilots < self.n_streams:
            raise ValueError("pilot count must leave at least one data stream")
        if not self.snr_db or not self.sigma2_psi:
            raise ValueError("snr_db and sigma2_psi grids must be non-empty")
        if any(s < 0 for s in self.sigma2_psi):
            raise ValueError("sigma2_psi must be non-negative")
        if not self.schemes:
            raise ValueError("at least one modulation scheme is required")
        for det in self.detectors:
            if det not in DETECTOR_KINDS:
                raise ValueError(f"unknown detector {det!r}")
        if self.n_channels < 1 or self.n_symbols < 1 or self.block_size < 1:
            raise ValueError("counts must be positive")
        if self.min_bit_errors < 0:
            raise ValueError("min_bit_errors must be non-negative")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Build a config from nested key/value sections."""
        raw = dict(raw)
        channel = ChannelParams(**raw.get("channel", {}))
        streams = raw.get("streams", {})
        sweep = raw.get("sweep", {})
        snr = raw.get("snr_db", cls.snr_db)
        if isinstance(snr, dict):
            snr = np.arange(
                float(snr["start"]),
                float(snr["stop"]) + float(snr["step"]) / 2.0,
                float(snr["step"]),
            )
        regimes = raw.get("pn_regimes", ["strong"])
        sigma2 = tuple(
            float(r) if not isinstance(r, str) else PnConfig.from_regime(r).sigma2_psi
            for r in regimes
        )
        schemes = tuple(
            SchemeSpec.from_dict(s) for s in raw.get("schemes", [{"kind": "qam", "order": 16}])
        )
        return cls(
            experiment_id=str(raw["experiment_id"]),
            channel=channel,
            n_streams=int(streams.get("n_streams", 4)),
            n_rf=int(streams.get("n_rf", 4)),
            n_pilots=int(streams.get("n_pilots", 0)),
            snr_db=tuple(float(v) for v in snr),
            sigma2_psi=sigma2,
            schemes=schemes,
            detectors=tuple(raw.get("detectors", ["euc"])),
            n_channels=int(sweep.get("n_channels", 10_000)),
            n_symbols=int(sweep.get("n_symbols", 100)),
            min_bit_errors=int(sweep.get("min_bit_errors", 200)),
            block_size=int(sweep.get("block_size", 50)),
            master_seed=int(raw.get("master_seed", 1)),
        )


def derive_stream_rng(
    master_seed: int, realization_index: int, grid_index: int, retry: int = 0
) -> np.random.Generator:
    """Collision-free counter-based substream for one realization.

    The Philox key packs the master seed into the top 64 bits and
    (realization, grid point, retry) into disjoint fields of the low
    word, so distinct tuples can never share a stream.
    """
    if not 0 <= master_seed < 2**64:
        raise ValueError("master_seed must fit in 64 bits")
    if not 0 <= realization_index < 2**40:
        raise ValueError("realization index out of range")
    if not 0 <= grid_index < 2**16:
        raise ValueError("grid index out of range")
    if not 0 <= retry < 2**8:
        raise ValueError("retry count out of range")
    low = (realization_index << 24) | (grid_index << 8) | retry
    return np.random.Generator(np.random.Philox(key=(master_seed << 64) | low))


def _draw_design(
    cfg: ExperimentConfig, realization: int, grid_index: int
) -> tuple[np.random.Generator, np.ndarray, object, int]:
    """Sample a channel and design precoders, resampling degenerate draws."""
    for retry in range(_MAX_RESAMPLES + 1):
        rng = derive_stream_rng(cfg.master_seed, realization, grid_index, retry)
        h = generate_channel(cfg.channel, rng)
        pset = design_precoders(h, cfg.n_streams, cfg.n_rf)
        if pset.v_diag[0] > 0 and pset.v_diag[-1] > _RANK_TOL * pset.v_diag[0]:
            return rng, h, pset, retry
    raise RuntimeError(
        f"channel stayed rank-deficient for {cfg.n_streams} streams after "
        f"{_MAX_RESAMPLES} resamples (realization {realization}, grid {grid_index})"
    )


def _simulate_ber_realization(args: tuple) -> dict:
    """One channel realization of a BER grid point, all detectors.

    Returns integer error counts per detector plus the matching
    analytic prediction so Monte Carlo and closed-form averages share
    the same realizations.
    """
    cfg, grid_index, realization, scheme, sigma2_psi, snr_lin = args
    rng, h, pset, resamples = _draw_design(cfg, realization, grid_index)
    metrics = stream_metrics(pset, h, snr_rx=snr_lin)
    const = _constellation(scheme.kind, scheme.order, scheme.n_rings)
    bps = const.bits_per_symbol
    n_data = cfg.n_streams - cfg.n_pilots
    n_slots = cfg.n_symbols

    tx_bits = rng.integers(0, 2, size=n_data * n_slots * bps, dtype=np.int64)
    tx_idx = map_bits(const, tx_bits)
    symbols = np.ones((cfg.n_streams, n_slots), dtype=complex)
    symbols[cfg.n_pilots :, :] = const.points[tx_idx].reshape(n_data, n_slots)

    trace = sample_pn(PnConfig.from_total(sigma2_psi), n_slots, rng)
    noise = np.sqrt(metrics.sigma2 / 2.0) * (
        rng.standard_normal((cfg.channel.n_rx, n_slots))
        + 1j * rng.standard_normal((cfg.channel.n_rx, n_slots))
    )
    gains = pset.rho * pset.v_diag
    received = (
        np.exp(1j * trace.psi)[None, :] * gains[:, None] * symbols
        + np.exp(1j * trace.phi_rx)[None, :] * (pset.rx_combiner @ noise)
    )
    if cfg.n_pilots:
        pilot_ratio = received[: cfg.n_pilots, :] / gains[: cfg.n_pilots, None]
        psi_hat = np.angle(np.mean(pilot_ratio, axis=0))
        received = received * np.exp(-1j * psi_hat)[None, :]

    normalized = received[cfg.n_pilots :, :] / gains[cfg.n_pilots :, None]
    beta_data = metrics.beta[cfg.n_pilots :]
    counts = {}
    for det in cfg.detectors:
        if det == "euc":
            rx_idx = euclidean_detect(normalized.ravel(), const)
        else:
            rows = []
            for k in range(n_data):
                det_cfg = DetectorConfig.for_stream(sigma2_psi, beta_data[k])
                rows.append(polar_detect(normalized[k], const, det_cfg))
            rx_idx = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
        rx_bits = demap_symbols(const, rx_idx)
        counts[det] = count_errors(tx_bits, rx_bits, bps)

    analytic = analytics.semi_analytic_ber(
        scheme.kind,
        scheme.order,
        scheme.n_rings,
        beta_data,
        sigma2_psi,
        compensated=cfg.n_pilots > 0,
    )
    return {
        "counts": counts,
        "bits": n_data * n_slots * bps,
        "analytic": analytic,
        "resamples": resamples,
    }


def _simulate_se_realization(args: tuple) -> dict:
    """Per-realization SNR-independent link invariants for SE sweeps."""
    cfg, realization = args
    rng, h, pset, resamples = _draw_design(cfg, realization, grid_index=0)
    metrics = stream_metrics(pset, h, snr_rx=1.0)
    fdp = fdp_precoder_set(h, cfg.n_streams)
    fdp_metrics = stream_metrics(fdp, h, sigma2=metrics.sigma2)
    return {
        # beta at unit receive SNR; scales linearly with receive SNR.
        "beta_unit": metrics.beta,
        "beta_fdp_unit": fdp_metrics.beta,
        "resamples": resamples,
    }


def _run_tasks(tasks: list, worker, executor: ProcessPoolExecutor | None) -> list:
    if executor is None:
        return [worker(t) for t in tasks]
    return list(executor.map(worker, tasks))


def _binomial_ci95(errors: int, bits: int) -> float:
    if bits == 0:
        return 0.0
    p = errors / bits
    return 1.96 * np.sqrt(p * (1.0 - p) / bits)


def run_ber_sweep(
    cfg: ExperimentConfig, workers: int = 1, log=None
) -> list[dict]:
    """Simulate every (SNR, phase noise, scheme) point of the config.

    All configured detectors reuse the same channel, bit, and noise
    draws within a point, making detector comparisons paired.  Emits
    Monte Carlo rows plus matching analytic rows (curve and, under
    phase noise without pilots, the high-SNR floor).
    """
    grid = [
        (snr, sigma2, scheme)
        for scheme in cfg.schemes
        for sigma2 in cfg.sigma2_psi
        for snr in cfg.snr_db
    ]
    rows: list[dict] = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for grid_index, (snr, sigma2, scheme) in enumerate(grid):
            snr_lin = 10.0 ** (snr / 10.0)
            errors = {det: 0 for det in cfg.detectors}
            symbol_errors = {det: 0 for det in cfg.detectors}
            bits_sent = 0
            analytic_sum = 0.0
            resamples = 0
            used = 0
            while used < cfg.n_channels:
                block_end = min(used + cfg.block_size, cfg.n_channels)
                tasks = [
                    (cfg, grid_index, r, scheme, sigma2, snr_lin)
                    for r in range(used, block_end)
                ]
                for result in _run_tasks(tasks, _simulate_ber_realization, executor):
                    for det, (bit_err, sym_err) in result["counts"].items():
                        errors[det] += bit_err
                        symbol_errors[det] += sym_err
                    bits_sent += result["bits"]
                    analytic_sum += result["analytic"]
                    resamples += result["resamples"]
                used = block_end
                if cfg.min_bit_errors > 0 and all(
                    e >= cfg.min_bit_errors for e in errors.values()
                ):
                    break
            base = {
                "experiment_id": cfg.experiment_id,
                "snr_db": snr,
                "sigma2_psi": sigma2,
                "modulation": scheme.label,
                "shape_gamma": scheme.n_rings,
                "n_s": cfg.n_streams,
                "n_rf": cfg.n_rf,
                "n_pil": cfg.n_pilots,
                "n_t": cfg.channel.n_tx,
                "n_r": cfg.channel.n_rx,
                "n_channels": used,
                "master_seed": cfg.master_seed,
            }
            for det in cfg.detectors:
                ber = errors[det] / bits_sent
                if log is not None and errors[det] >= 200:
                    _check_analytic_consistency(
                        log, base, det, ber, analytic_sum / used, errors[det], bits_sent
                    )
                rows.append(
                    base
                    | {
                        "source": "montecarlo",
                        "series": "hp",
                        "detector": det,
                        "ber": ber,
                        "bit_errors": errors[det],
                        "bits_sent": bits_sent,
                        "ci95": _binomial_ci95(errors[det], bits_sent),
                        "resamples": resamples,
                        "symbol_errors": symbol_errors[det],
                    }
                )
            rows.append(
                base
                | {
                    "source": "analytic",
                    "series": "hp",
                    "detector": "",
                    "ber": analytic_sum / used,
                }
            )
            if sigma2 > 0 and cfg.n_pilots == 0:
                rows.append(
                    base
                    | {
                        "source": "analytic",
                        "series": "floor",
                        "detector": "",
                        "ber": analytics.ber_floor(
                            scheme.kind, scheme.order, scheme.n_rings, sigma2
                        ),
                    }
                )
    finally:
        if executor is not None:
            executor.shutdown()
    return rows


def _check_analytic_consistency(log, base, det, ber, analytic, errors, bits):
    """Report Monte Carlo points whose analytic curve misses the 99% CI."""
    half = 2.576 * np.sqrt(max(ber * (1.0 - ber), 1e-300) / bits)
    if not (ber - half <= analytic <= ber + half):
        log(
            f"analytic/monte-carlo gap at snr={base['snr_db']} "
            f"sigma2_psi={base['sigma2_psi']} {base['modulation']} {det}: "
            f"simulated {ber:.3e} (+-{half:.1e}), predicted {analytic:.3e}"
        )


def run_se_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    """Ensemble-averaged spectral efficiency over the config grid.

    One shared channel ensemble feeds every grid point; the SNR axis
    only rescales the per-stream SNRs.  Rows cover the hybrid design
    under each phase noise level, the fully digital reference at the
    same noise variance, the post-pilot data-stream sum when pilots
    are configured, and the closed-form high-SNR limit.
    """
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        tasks = [(cfg, r) for r in range(cfg.n_channels)]
        results = []
        for start in range(0, len(tasks), cfg.block_size):
            results.extend(
                _run_tasks(
                    tasks[start : start + cfg.block_size],
                    _simulate_se_realization,
                    executor,
                )
            )
    finally:
        if executor is not None:
            executor.shutdown()
    beta_unit = np.asarray([r["beta_unit"] for r in results])
    beta_fdp_unit = np.asarray([r["beta_fdp_unit"] for r in results])

    rows: list[dict] = []
    for sigma2 in cfg.sigma2_psi:
        for snr in cfg.snr_db:
            snr_lin = 10.0 ** (snr / 10.0)
            beta = beta_unit * snr_lin
            beta_fdp = beta_fdp_unit * snr_lin
            base = {
                "experiment_id": cfg.experiment_id,
                "snr_db": snr,
                "sigma2_psi": sigma2,
                "n_s": cfg.n_streams,
                "n_rf": cfg.n_rf,
                "n_pil": cfg.n_pilots,
                "n_t": cfg.channel.n_tx,
                "n_r": cfg.channel.n_rx,
                "n_channels": cfg.n_channels,
                "master_seed": cfg.master_seed,
            }
            hp = np.mean(
                np.sum(np.log2(1.0 + _pn_sinr(beta, sigma2)), axis=1)
            )
            fdp = np.mean(
                np.sum(np.log2(1.0 + _pn_sinr(beta_fdp, sigma2)), axis=1)
            )
            rows.append(
                base | {"source": "montecarlo", "series": "hp", "se_bps_hz": float(hp)}
            )
            rows.append(
                base | {"source": "montecarlo", "series": "fdp", "se_bps_hz": float(fdp)}
            )
            if cfg.n_pilots:
                pilot = np.mean(
                    np.sum(np.log2(1.0 + beta[:, cfg.n_pilots :]), axis=1)
                )
                rows.append(
                    base
                    | {
                        "source": "montecarlo",
                        "series": "hp_pilot",
                        "se_bps_hz": float(pilot),
                    }
                )
            if sigma2 > 0:
                rows.append(
                    base
                    | {
                        "source": "analytic",
                        "series": "hp_closed_form",
                        "se_bps_hz": analytics.se_pn_high_snr(cfg.n_streams, sigma2),
                    }
                )
    return rows


def _pn_sinr(beta: np.ndarray, sigma2_psi: float) -> np.ndarray:
    """Vectorized per-stream SINR of the phase noise SE bound."""
    expo = np.exp(sigma2_psi)
    return 1.0 / ((expo - 1.0) + expo / beta)


def _format_value(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def write_results_csv(path: str | Path, rows: Iterable[dict]) -> Path:
    """Write result rows in the fixed column order, byte-stable."""
    path = Path(path)
    lines = [",".join(SCHEMA_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(_format_value(row.get(col, "")) for col in SCHEMA_COLUMNS)
        )
    path.write_text("\n".join(lines) + "\n")
    return path


def write_config_sidecar(path: str | Path, cfg: ExperimentConfig, extra: dict | None = None) -> Path:
    """Persist the exact configuration next to the result files."""
    path = Path(path)
    payload = {
        "experiment_id": cfg.experiment_id,
        "channel": {
            "n_tx": cfg.channel.n_tx,
            "n_rx": cfg.channel.n_rx,
            "n_clusters": cfg.channel.n_clusters,
            "n_rays": cfg.channel.n_rays,
            "angle_spread_deg": cfg.channel.angle_spread_deg,
        },
        "streams": {
            "n_streams": cfg.n_streams,
            "n_rf": cfg.n_rf,
            "n_pilots": cfg.n_pilots,
        },
        "snr_db": list(cfg.snr_db),
        "sigma2_psi": list(cfg.sigma2_psi),
        "schemes": [
            {"kind": s.kind, "order": s.order, "n_rings": s.n_rings}
            for s in cfg.schemes
        ],
        "detectors": list(cfg.detectors),
        "sweep": {
            "n_channels": cfg.n_channels,
            "n_symbols": cfg.n_symbols,
            "min_bit_errors": cfg.min_bit_errors,
            "block_size": cfg.block_size,
        },
        "master_seed": cfg.master_seed,
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def split_rows(rows: Sequence[dict]) -> tuple[list[dict], list[dict]]:
    """Separate Monte Carlo rows from analytic rows."""
    mc = [r for r in rows if r.get("source") == "montecarlo"]
    analytic = [r for r in rows if r.get("source") == "analytic"]
    return mc, analytic
