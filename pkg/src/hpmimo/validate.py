"""Named self-checks covering module invariants and key endpoints.

Each check compares a measured quantity against its expectation at an
explicit tolerance and reports a machine-readable result.  The CLI
runs the full registry at a reduced Monte Carlo scale; the test suite
exercises the same physics at full scale.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import analytics, detection, modulation, phasenoise, precoding
from .channel import ChannelParams, array_response, generate_channel, sample_angles
from .montecarlo import ExperimentConfig, SchemeSpec, derive_stream_rng, run_ber_sweep, write_results_csv


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    expected: float
    tolerance: str
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = (
            f"{status} {self.name}: measured={self.measured:.6g} "
            f"expected={self.expected:.6g} tol={self.tolerance}"
        )
        return text + (f" ({self.detail})" if self.detail else "")


_DESK_CHANNEL = ChannelParams()


def _result(name, measured, expected, passed, tolerance, detail="") -> CheckResult:
    return CheckResult(
        name=name,
        passed=bool(passed),
        measured=float(measured),
        expected=float(expected),
        tolerance=tolerance,
        detail=detail,
    )


@lru_cache(maxsize=1)
def _shared_ensemble(n: int = 400) -> tuple[np.ndarray, np.ndarray]:
    """Per-stream SNRs at unit receive SNR for hybrid and digital designs."""
    beta_unit = np.empty((n, 4))
    beta_fdp = np.empty((n, 4))
    for i in range(n):
        rng = derive_stream_rng(20260824, i, 0)
        h = generate_channel(_DESK_CHANNEL, rng)
        pset = precoding.design_precoders(h, 4, 4)
        metrics = precoding.stream_metrics(pset, h, snr_rx=1.0)
        fdp = precoding.fdp_precoder_set(h, 4)
        beta_unit[i] = metrics.beta
        beta_fdp[i] = precoding.stream_metrics(fdp, h, sigma2=metrics.sigma2).beta
    return beta_unit, beta_fdp


def check_array_response_norm() -> CheckResult:
    worst = 0.0
    for n in (1, 7, 36, 144):
        for theta in (-1.2, 0.0, 0.4, 2.0, 5.9):
            worst = max(worst, abs(np.linalg.norm(array_response(theta, n)) - 1.0))
    return _result("array-response-norm", worst, 0.0, worst <= 1e-12, "<=1e-12")


def check_channel_frobenius() -> CheckResult:
    rng = np.random.default_rng(101)
    total = 0.0
    n = 2000
    for _ in range(n):
        h = generate_channel(_DESK_CHANNEL, rng)
        total += np.linalg.norm(h) ** 2
    measured = total / n
    expected = _DESK_CHANNEL.n_tx * _DESK_CHANNEL.n_rx
    rel = abs(measured - expected) / expected
    return _result("channel-frobenius-power", measured, expected, rel <= 0.02, "2% rel")


def check_angle_spread() -> CheckResult:
    params = ChannelParams(n_clusters=1, n_rays=100_000)
    rng = np.random.default_rng(7)
    aod, _ = sample_angles(params, rng)
    measured = float(np.std(aod - np.mean(aod)))
    expected = params.angle_spread_rad
    rel = abs(measured - expected) / expected
    return _result("angle-spread-std", measured, expected, rel <= 0.02, "2% rel")


def check_constellation_energy() -> CheckResult:
    worst = 0.0
    for const in (
        modulation.build_qam(4),
        modulation.build_qam(16),
        modulation.build_pqam(16, 4),
        modulation.build_pqam(16, 8),
    ):
        worst = max(worst, abs(modulation.average_energy(const) - 1.0))
    return _result("constellation-unit-energy", worst, 0.0, worst <= 1e-12, "<=1e-12")


def check_qam16_deltas() -> CheckResult:
    geo = modulation.polar_geometry(modulation.build_qam(16))
    expected = np.array(
        [
            1.0 - 1.0 / np.sqrt(5.0),
            3.0 / np.sqrt(5.0) - 1.0,
            np.pi / 2.0,
            2.0 * np.arctan(1.0 / 3.0),
            np.arctan(3.0) - np.arctan(1.0 / 3.0),
            np.pi / 2.0,
        ]
    )
    measured = np.concatenate([geo.delta_rho, geo.delta_theta])
    worst = float(np.max(np.abs(measured - expected)))
    return _result("qam16-polar-deltas", worst, 0.0, worst <= 1e-12, "<=1e-12")


def check_pqam_ring_gaps() -> CheckResult:
    worst = 0.0
    for n_rings in (2, 4, 8):
        geo = modulation.polar_geometry(modulation.build_pqam(16, n_rings))
        gap = 2.0 / np.sqrt((4.0 * n_rings**2 - 1.0) / 3.0)
        worst = max(worst, float(np.max(np.abs(geo.delta_rho - gap))))
    return _result("pqam-uniform-ring-gaps", worst, 0.0, worst <= 1e-12, "<=1e-12")


def check_gray_adjacency() -> CheckResult:
    violations = 0
    for const in (
        modulation.build_qam(4),
        modulation.build_qam(16),
        modulation.build_pqam(16, 4),
        modulation.build_pqam(16, 8),
    ):
        pts = const.points
        for i in range(const.order):
            d = np.abs(pts - pts[i])
            d[i] = np.inf
            nearest = np.flatnonzero(np.isclose(d, d.min(), rtol=1e-9))
            for j in nearest:
                if bin(i ^ int(j)).count("1") != 1:
                    violations += 1
    return _result("gray-neighbor-labels", violations, 0, violations == 0, "exact")


def check_altmin_monotone() -> CheckResult:
    rng = np.random.default_rng(31)
    worst = -np.inf
    for _ in range(10):
        h = generate_channel(_DESK_CHANNEL, rng)
        f_opt, _ = precoding.optimal_fdp(h, 4)
        res = precoding.pe_altmin(f_opt, 4)
        if res.objectives.size > 1:
            worst = max(worst, float(np.max(np.diff(res.objectives))))
        if not np.allclose(np.abs(res.analog), 1.0, atol=1e-12):
            return _result("altmin-monotone-objective", 1.0, 0.0, False, "exact", "analog modulus drifted")
    return _result("altmin-monotone-objective", worst, 0.0, worst <= 1e-10, "<=1e-10")


def check_power_normalization() -> CheckResult:
    rng = np.random.default_rng(32)
    worst = 0.0
    for _ in range(10):
        h = generate_channel(_DESK_CHANNEL, rng)
        pset = precoding.design_precoders(h, 4, 4)
        norm = pset.rho * np.linalg.norm(pset.f_rf @ pset.f_bb)
        worst = max(worst, abs(norm - np.sqrt(4.0)))
    return _result("transmit-power-normalization", worst, 0.0, worst <= 1e-10, "<=1e-10")


def check_isi_suppression() -> CheckResult:
    rng = np.random.default_rng(33)
    worst = 0.0
    for _ in range(5):
        h = generate_channel(_DESK_CHANNEL, rng)
        pset = precoding.design_precoders(h, 4, 4)
        h_eq = precoding.equivalent_channel(h, pset.f_rf, pset.w_rf)
        coupled = pset.u_bb.conj().T @ h_eq @ pset.f_bb
        off = coupled - np.diag(np.diag(coupled))
        worst = max(worst, float(np.max(np.abs(off)) / pset.v_diag[0]))
    return _result("inter-stream-leakage", worst, 0.0, worst <= 1e-9, "<=1e-9 of top gain")


def check_beta_consistency() -> CheckResult:
    rng = np.random.default_rng(34)
    h = generate_channel(_DESK_CHANNEL, rng)
    pset = precoding.design_precoders(h, 4, 4)
    via_snr = precoding.stream_metrics(pset, h, snr_rx=123.4)
    via_sigma = precoding.stream_metrics(pset, h, sigma2=via_snr.sigma2)
    rel = float(np.max(np.abs(via_snr.beta - via_sigma.beta) / via_sigma.beta))
    return _result("per-stream-snr-consistency", rel, 0.0, rel <= 1e-9, "<=1e-9 rel")


def check_noise_shaping() -> CheckResult:
    rng = np.random.default_rng(35)
    h = generate_channel(_DESK_CHANNEL, rng)
    pset = precoding.design_precoders(h, 4, 4)
    sigma2 = 0.37
    n = 100_000
    noise = np.sqrt(sigma2 / 2.0) * (
        rng.standard_normal((_DESK_CHANNEL.n_rx, n))
        + 1j * rng.standard_normal((_DESK_CHANNEL.n_rx, n))
    )
    filtered = pset.rx_combiner @ noise
    xi = precoding.stream_metrics(pset, h, sigma2=sigma2).xi
    measured = np.var(filtered, axis=1)
    rel = float(np.max(np.abs(measured - sigma2 * xi) / (sigma2 * xi)))
    return _result("combined-noise-variance", rel, 0.0, rel <= 0.02, "2% rel")


def check_coherent_gain() -> CheckResult:
    sigma2 = 0.1
    cfg = phasenoise.PnConfig.from_total(sigma2)
    rng = np.random.default_rng(36)
    trace = phasenoise.sample_pn(cfg, 1_000_000, rng)
    measured = float(np.abs(np.mean(np.exp(1j * trace.psi))))
    expected = phasenoise.coherent_gain(sigma2)
    rel = abs(measured - expected) / expected
    return _result("pn-coherent-gain", measured, expected, rel <= 0.003, "0.3% rel")


def check_regime_map() -> CheckResult:
    expected = {"strong": 1e-1, "medium": 1e-2, "low": 1e-3, "off": 0.0}
    worst = 0.0
    for name, value in expected.items():
        cfg = phasenoise.PnConfig.from_regime(name)
        worst = max(worst, abs(cfg.sigma2_psi - value))
        worst = max(worst, abs(cfg.sigma2_tx - cfg.sigma2_rx))
    return _result("pn-regime-map", worst, 0.0, worst <= 0.0, "exact")


def check_se_identity_no_pn() -> CheckResult:
    beta = np.array([0.3, 2.0, 55.0, 1.0e6])
    a = analytics.se_pn_lower_bound(beta, 0.0)
    b = analytics.se_sum(beta)
    rel = abs(a - b) / b
    return _result("se-bound-reduces-without-pn", rel, 0.0, rel <= 1e-9, "<=1e-9 rel")


def check_se_high_snr_limit() -> CheckResult:
    beta_unit, _ = _shared_ensemble()
    # sigma2 -> 0 at fixed transmit scaling drives every beta to infinity.
    beta = beta_unit[0] * 1.0e10
    worst = 0.0
    for sigma2_psi in (0.1, 0.01):
        bound = analytics.se_pn_lower_bound(beta, sigma2_psi)
        limit = analytics.se_pn_high_snr(beta.size, sigma2_psi)
        worst = max(worst, abs(bound - limit) / limit)
    return _result("se-bound-high-snr-limit", worst, 0.0, worst <= 1e-3, "<=1e-3 rel")


def check_ber_floor_limits() -> CheckResult:
    big = np.array([1.0e12])
    worst = 0.0
    for sigma2 in (0.1, 0.01):
        a = analytics.ber_qam16_pn(big, sigma2)
        b = analytics.ber_qam16_pn_floor(sigma2)
        worst = max(worst, abs(a - b) / b)
        a = analytics.ber_pqam_pn(big, 16, 8, sigma2)
        b = analytics.ber_pqam_pn_floor(16, 8, sigma2)
        worst = max(worst, abs(a - b) / b)
    return _result("ber-approximation-floor-limit", worst, 0.0, worst <= 1e-6, "<=1e-6 rel")


def check_floor_values() -> CheckResult:
    pinned = [
        (analytics.ber_qam4_pn_floor(0.1), 6.502231193527252e-3),
        (analytics.ber_qam16_pn_floor(0.1), 4.024211641516596e-2),
        (analytics.ber_qam16_pn_floor(0.01), 1.616381598938668e-4),
        (analytics.ber_pqam_pn_floor(16, 8, 0.1), 1.6973392869246548e-7),
        (analytics.se_pn_high_snr(4, 0.1), 13.573847096334935),
        (analytics.se_pn_high_snr(4, 0.01), 26.60425461501943),
    ]
    worst = max(abs(m - e) / e for m, e in pinned)
    return _result("pinned-closed-form-values", worst, 0.0, worst <= 1e-9, "<=1e-9 rel")


def check_wrap_invariance() -> CheckResult:
    rng = np.random.default_rng(40)
    const = modulation.build_pqam(16, 4)
    cfg = detection.DetectorConfig.for_stream(0.01, 200.0)
    obs = (0.2 + rng.standard_normal(500) * 0.4) * np.exp(
        1j * rng.uniform(-20.0, 20.0, 500)
    )
    base = detection.polar_detect(obs, const, cfg)
    shifted = detection.polar_detect(obs * np.exp(2j * np.pi * 3), const, cfg)
    mismatches = int(np.sum(base != shifted))
    return _result("polar-metric-wrap-invariance", mismatches, 0, mismatches == 0, "exact")


def check_polar_statistics() -> CheckResult:
    rng = np.random.default_rng(41)
    beta = 1000.0
    sigma2_psi = 0.01
    sigma2_n = 1.0 / (2.0 * beta)
    worst = 0.0
    n = 100_000
    for s_rho in (1.0 / np.sqrt(5.0), 1.0):
        s = s_rho + 0.0j
        noise = np.sqrt(1.0 / (2.0 * beta)) * (
            rng.standard_normal(n) + 1j * rng.standard_normal(n)
        )
        psi = np.sqrt(sigma2_psi) * rng.standard_normal(n)
        observed = s * np.exp(1j * psi) + noise
        var_rho = float(np.var(np.abs(observed) - s_rho))
        var_theta = float(np.var(np.angle(observed)))
        worst = max(worst, abs(var_rho - sigma2_n) / sigma2_n)
        expected_theta = sigma2_psi + sigma2_n / s_rho**2
        worst = max(worst, abs(var_theta - expected_theta) / expected_theta)
    return _result("high-snr-polar-statistics", worst, 0.0, worst <= 0.05, "5% rel")


def check_rng_substreams() -> CheckResult:
    a = derive_stream_rng(9, 5, 3).standard_normal(4096)
    b = derive_stream_rng(9, 5, 3).standard_normal(4096)
    c = derive_stream_rng(9, 6, 3).standard_normal(4096)
    d = derive_stream_rng(9, 5, 4).standard_normal(4096)
    if not np.array_equal(a, b):
        return _result("rng-substream-derivation", 1.0, 0.0, False, "exact", "same tuple diverged")
    corr = max(
        abs(float(np.corrcoef(a, c)[0, 1])), abs(float(np.corrcoef(a, d)[0, 1]))
    )
    return _result("rng-substream-derivation", corr, 0.0, corr <= 0.08, "near-zero correlation")


def _tiny_ber_config(**overrides) -> ExperimentConfig:
    defaults = dict(
        experiment_id="validate-tiny",
        channel=ChannelParams(n_tx=32, n_rx=16),
        n_streams=2,
        n_rf=2,
        snr_db=(20.0,),
        sigma2_psi=(0.1,),
        schemes=(SchemeSpec("qam", 4),),
        detectors=("euc", "pm"),
        n_channels=40,
        n_symbols=50,
        min_bit_errors=0,
        block_size=10,
        master_seed=3,
    )
    defaults.update(overrides)
    return ExperimentConfig(**defaults)


def check_worker_invariance() -> CheckResult:
    cfg = _tiny_ber_config()
    serial = run_ber_sweep(cfg, workers=1)
    pooled = run_ber_sweep(cfg, workers=2)
    repeat = run_ber_sweep(cfg, workers=1)
    same = serial == pooled == repeat
    return _result("worker-count-invariance", 0.0 if same else 1.0, 0.0, same, "bit-identical rows")


def check_csv_stability(tmp_dir: str | None = None) -> CheckResult:
    import tempfile
    from pathlib import Path

    cfg = _tiny_ber_config()
    rows = run_ber_sweep(cfg, workers=1)
    with tempfile.TemporaryDirectory(dir=tmp_dir) as td:
        p1 = write_results_csv(Path(td) / "a.csv", rows)
        p2 = write_results_csv(Path(td) / "b.csv", run_ber_sweep(cfg, workers=1))
        same = p1.read_bytes() == p2.read_bytes()
    return _result("csv-byte-stability", 0.0 if same else 1.0, 0.0, same, "identical bytes")


def check_se_strong_floor() -> CheckResult:
    beta_unit, _ = _shared_ensemble()
    beta = beta_unit * 10.0**4.0
    measured = float(np.mean(np.sum(np.log2(1.0 + _sinr(beta, 0.1)), axis=1)))
    expected = analytics.se_pn_high_snr(4, 0.1)
    rel = abs(measured - expected) / expected
    return _result("se-saturation-strong-pn", measured, expected, rel <= 0.02, "2% rel")


def check_se_medium_floor() -> CheckResult:
    beta_unit, _ = _shared_ensemble()
    beta = beta_unit * 10.0**4.0
    measured = float(np.mean(np.sum(np.log2(1.0 + _sinr(beta, 0.01)), axis=1)))
    expected = analytics.se_pn_high_snr(4, 0.01)
    rel = abs(measured - expected) / expected
    return _result("se-saturation-medium-pn", measured, expected, rel <= 0.02, "2% rel")


def check_fdp_gap() -> CheckResult:
    beta_unit, beta_fdp = _shared_ensemble()
    snr = 10.0**2.0
    se_h = np.sum(np.log2(1.0 + beta_unit * snr), axis=1)
    se_f = np.sum(np.log2(1.0 + beta_fdp * snr), axis=1)
    if np.any(se_h > se_f + 1e-12):
        return _result("hybrid-vs-digital-se", 1.0, 0.0, False, "ordering", "hybrid exceeded digital")
    gap = float(np.mean((se_f - se_h) / se_f))
    return _result("hybrid-vs-digital-se", gap, 0.0, gap <= 0.10, "mean gap <=10%")


def _sinr(beta: np.ndarray, sigma2_psi: float) -> np.ndarray:
    expo = np.exp(sigma2_psi)
    return 1.0 / ((expo - 1.0) + expo / beta)


def check_qam4_floor_mc() -> CheckResult:
    cfg = ExperimentConfig(
        experiment_id="validate-qam4-floor",
        snr_db=(40.0,),
        sigma2_psi=(0.1,),
        schemes=(SchemeSpec("qam", 4),),
        detectors=("euc",),
        n_channels=600,
        min_bit_errors=200,
        master_seed=15,
    )
    rows = run_ber_sweep(cfg)
    ber = next(r["ber"] for r in rows if r["source"] == "montecarlo")
    expected = analytics.ber_qam4_pn_floor(0.1)
    rel = abs(ber - expected) / expected
    return _result("qam4-strong-pn-floor", ber, expected, rel <= 0.2, "20% rel")


def check_qam16_floor_mc() -> CheckResult:
    cfg = ExperimentConfig(
        experiment_id="validate-qam16-floor",
        snr_db=(37.5,),
        sigma2_psi=(0.1,),
        schemes=(SchemeSpec("qam", 16),),
        detectors=("pm",),
        n_channels=300,
        min_bit_errors=200,
        master_seed=16,
    )
    rows = run_ber_sweep(cfg)
    ber = next(r["ber"] for r in rows if r["source"] == "montecarlo")
    expected = analytics.ber_qam16_pn_floor(0.1)
    rel = abs(ber - expected) / expected
    return _result("qam16-strong-pn-floor", ber, expected, rel <= 0.2, "20% rel")


def check_detector_ordering() -> CheckResult:
    cfg = ExperimentConfig(
        experiment_id="validate-ordering",
        snr_db=(15.0, 27.5, 40.0),
        sigma2_psi=(0.1, 0.01),
        schemes=(SchemeSpec("qam", 16),),
        detectors=("euc", "pm"),
        n_channels=2500,
        min_bit_errors=200,
        master_seed=17,
    )
    rows = run_ber_sweep(cfg)
    mc = [r for r in rows if r["source"] == "montecarlo"]
    worst = -np.inf
    for point in {(r["snr_db"], r["sigma2_psi"]) for r in mc}:
        pair = {r["detector"]: r for r in mc if (r["snr_db"], r["sigma2_psi"]) == point}
        if min(pair["euc"]["bit_errors"], pair["pm"]["bit_errors"]) < 200:
            return _result(
                "polar-beats-euclidean-under-pn", 0.0, 0.0, False, ">=200 errors",
                f"insufficient errors at {point}",
            )
        worst = max(worst, pair["pm"]["ber"] - pair["euc"]["ber"])
    return _result("polar-beats-euclidean-under-pn", worst, 0.0, worst <= 0.0, "pm <= euc everywhere")


def check_shaped_constellation_gain() -> CheckResult:
    cfg = ExperimentConfig(
        experiment_id="validate-shaping",
        snr_db=(40.0,),
        sigma2_psi=(0.1,),
        schemes=(
            SchemeSpec("qam", 16),
            SchemeSpec("pqam", 16, 4),
            SchemeSpec("pqam", 16, 8),
        ),
        detectors=("pm",),
        n_channels=1200,
        min_bit_errors=200,
        master_seed=18,
    )
    rows = run_ber_sweep(cfg)
    ber = {
        (r["modulation"], r["shape_gamma"]): r["ber"]
        for r in rows
        if r["source"] == "montecarlo"
    }
    eight = ber[("16pqam", 8)]
    ok = eight <= 1e-4 and ber[("16pqam", 4)] > 1e-4 and ber[("16qam", 0)] > 1e-4
    return _result(
        "ring-heavy-shaping-beats-target", eight, 1e-4, ok,
        "only 8-ring reaches 1e-4 at strong pn",
    )


def check_pilot_compensation() -> CheckResult:
    cfg = ExperimentConfig(
        experiment_id="validate-mitigation",
        n_streams=8,
        n_rf=8,
        n_pilots=1,
        snr_db=(0.0,),
        sigma2_psi=(0.1,),
        schemes=(SchemeSpec("qam", 16),),
        detectors=("euc",),
        n_channels=400,
        min_bit_errors=400,
        master_seed=19,
    )
    rows = run_ber_sweep(cfg)
    mc = next(r["ber"] for r in rows if r["source"] == "montecarlo")
    predicted = next(r["ber"] for r in rows if r["source"] == "analytic")
    rel = abs(mc - predicted) / predicted
    return _result("pilot-compensation-tracks-prediction", mc, predicted, rel <= 0.30, "30% rel")


CHECKS = {
    fn.__name__.removeprefix("check_").replace("_", "-"): fn
    for fn in (
        check_array_response_norm,
        check_channel_frobenius,
        check_angle_spread,
        check_constellation_energy,
        check_qam16_deltas,
        check_pqam_ring_gaps,
        check_gray_adjacency,
        check_altmin_monotone,
        check_power_normalization,
        check_isi_suppression,
        check_beta_consistency,
        check_noise_shaping,
        check_coherent_gain,
        check_regime_map,
        check_se_identity_no_pn,
        check_se_high_snr_limit,
        check_ber_floor_limits,
        check_floor_values,
        check_wrap_invariance,
        check_polar_statistics,
        check_rng_substreams,
        check_worker_invariance,
        check_csv_stability,
        check_se_strong_floor,
        check_se_medium_floor,
        check_fdp_gap,
        check_qam4_floor_mc,
        check_qam16_floor_mc,
        check_detector_ordering,
        check_shaped_constellation_gain,
        check_pilot_compensation,
    )
}


def run_checks(names: list[str] | None = None) -> list[CheckResult]:
    """Run all (or the named) registered checks in a stable order."""
    selected = list(CHECKS) if names is None else names
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}")
    results = []
    for name in selected:
        try:
            results.append(CHECKS[name]())
        except Exception as exc:  # a crashed check is a failed check
            results.append(
                CheckResult(
                    name=name,
                    passed=False,
                    measured=float("nan"),
                    expected=float("nan"),
                    tolerance="n/a",
                    detail=f"raised {type(exc).__name__}: {exc}",
                )
            )
    return results


def report(results: list[CheckResult]) -> dict:
    """JSON-ready summary of a check run."""
    return {
        "passed": all(r.passed for r in results),
        "n_checks": len(results),
        "n_failed": sum(not r.passed for r in results),
        "checks": [asdict(r) for r in results],
    }
