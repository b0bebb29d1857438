"""Command line front end: sweeps, constellation export, self-checks.

Exit codes: 0 success, 1 runtime or check failure, 2 invalid usage or
configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__, analytics, modulation
from . import validate as validation
from .channel import ChannelParams, generate_channel
from .detection import normalize_stream
from .montecarlo import (
    ExperimentConfig,
    derive_stream_rng,
    run_ber_sweep,
    run_se_sweep,
    split_rows,
    write_config_sidecar,
    write_results_csv,
)
from .phasenoise import PnConfig, apply_clo, sample_pn
from .precoding import design_precoders, stream_metrics


class ConfigError(Exception):
    """Raised for malformed configs, presets, or option combinations."""


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _load_yaml(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid yaml in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return raw


def preset_names() -> list[str]:
    root = resources.files("hpmimo") / "presets"
    return sorted(p.name.removesuffix(".yaml") for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    path = resources.files("hpmimo") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    raw = yaml.safe_load(path.read_text())
    if not isinstance(raw, dict):
        raise ConfigError(f"preset {name!r} is not a mapping")
    return raw


def _apply_override(raw: dict, spec: str) -> None:
    key, sep, text = spec.partition("=")
    if not sep or not key:
        raise ConfigError(f"override {spec!r} must look like key.path=value")
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {text!r}: {exc}") from exc
    node = raw
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {spec!r} descends through a non-mapping")
    node[parts[-1]] = value


def _build_config(args: argparse.Namespace, mode: str) -> ExperimentConfig:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("provide exactly one of --config or --preset")
    raw = load_preset(args.preset) if args.preset else _load_yaml(args.config)
    declared = raw.pop("mode", None)
    if declared is not None and declared != mode:
        raise ConfigError(f"configuration declares mode {declared!r} but was run as {mode!r}")
    for spec in args.override or []:
        _apply_override(raw, spec)
    if args.seed is not None:
        raw["master_seed"] = args.seed
    try:
        return ExperimentConfig.from_dict(raw)
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def _write_outputs(args, cfg: ExperimentConfig, rows: list[dict], mode: str, extra: dict) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mc_rows, analytic_rows = split_rows(rows)
    written = []
    if mc_rows:
        written.append(write_results_csv(out / f"{cfg.experiment_id}_montecarlo.csv", mc_rows))
    written.append(write_results_csv(out / f"{cfg.experiment_id}_analytic.csv", analytic_rows))
    written.append(
        write_config_sidecar(
            out / f"{cfg.experiment_id}_config.json",
            cfg,
            extra={"mode": mode, "workers": args.workers, **extra},
        )
    )
    for path in written:
        print(path)
    return 0


def cmd_ber(args: argparse.Namespace) -> int:
    cfg = _build_config(args, "ber")
    log = None if args.quiet else _progress
    rows = run_ber_sweep(cfg, workers=args.workers, log=log)
    return _write_outputs(args, cfg, rows, "ber", {})


def cmd_se(args: argparse.Namespace) -> int:
    cfg = _build_config(args, "se")
    extra: dict = {}
    if args.channel_dump:
        rows = analytics.evaluate_channel_dump(
            args.channel_dump, cfg.snr_db, cfg.sigma2_psi, cfg.n_streams, cfg.n_rf
        )
        for row in rows:
            row["experiment_id"] = cfg.experiment_id
            row["series"] = "hp_closed_form"
        extra["channel_dump"] = str(args.channel_dump)
    else:
        rows = run_se_sweep(cfg, workers=args.workers)
    return _write_outputs(args, cfg, rows, "se", extra)


def _build_constellation(args: argparse.Namespace) -> modulation.Constellation:
    try:
        if args.kind == "qam":
            if args.rings:
                raise ValueError("ring count only applies to pqam")
            return modulation.build_qam(args.order)
        return modulation.build_pqam(args.order, args.rings)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _constellation_rows(const: modulation.Constellation) -> list[str]:
    lines = ["index,bits,re,im,ring,phase_index"]
    bps = const.bits_per_symbol
    for i, point in enumerate(const.points):
        bits = format(i, f"0{bps}b")
        lines.append(
            f"{i},{bits},{point.real:.10g},{point.imag:.10g},"
            f"{const.ring_index[i]},{const.phase_index[i]}"
        )
    return lines


def _scatter_rows(
    const: modulation.Constellation, snr_db: float, sigma2_psi: float, n_slots: int, seed: int
) -> list[str]:
    params = ChannelParams()
    rng = derive_stream_rng(seed, 0, 0)
    h = generate_channel(params, rng)
    pset = design_precoders(h, 4, 4)
    metrics = stream_metrics(pset, h, snr_rx=10.0 ** (snr_db / 10.0))
    trace = sample_pn(PnConfig.from_total(sigma2_psi), n_slots, rng)
    indices = rng.integers(0, const.order, size=(pset.n_streams, n_slots))
    symbols = const.points[indices]
    scale = np.sqrt(metrics.sigma2 / 2.0)
    lines = ["slot,stream,tx_index,re,im"]
    for slot in range(n_slots):
        noise = scale * (
            rng.standard_normal(params.n_rx) + 1j * rng.standard_normal(params.n_rx)
        )
        received = apply_clo(symbols[:, slot], pset, noise, trace, slot)
        for k in range(pset.n_streams):
            obs = complex(normalize_stream(received[k], pset.rho, pset.v_diag[k]))
            lines.append(
                f"{slot},{k},{indices[k, slot]},{obs.real:.10g},{obs.imag:.10g}"
            )
    return lines


def cmd_constellation(args: argparse.Namespace) -> int:
    const = _build_constellation(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = const.label + (str(const.n_rings) if const.kind == "pqam" else "")
    points_path = out / f"{stem}_points.csv"
    points_path.write_text("\n".join(_constellation_rows(const)) + "\n")
    print(points_path)
    if args.scatter:
        sigma2 = PnConfig.from_regime(args.pn_regime).sigma2_psi
        lines = _scatter_rows(const, args.snr_db, sigma2, args.n_slots, args.seed or 1)
        scatter_path = out / f"{stem}_scatter.csv"
        scatter_path.write_text("\n".join(lines) + "\n")
        print(scatter_path)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    if args.list:
        for name in validation.CHECKS:
            print(name)
        return 0
    try:
        results = validation.run_checks(args.check or None)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for result in results:
        print(result.line())
    summary = validation.report(results)
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{summary['n_checks'] - summary['n_failed']}/{summary['n_checks']} checks passed")
    return 0 if summary["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpmimo",
        description="Hybrid-precoded mmWave link simulation with oscillator phase noise.",
    )
    parser.add_argument("--version", action="version", version=f"hpmimo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--config", help="YAML experiment description")
    sweep.add_argument("--preset", help="named built-in configuration")
    sweep.add_argument("--out", default="results", help="output directory (default: results)")
    sweep.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sweep.add_argument("--seed", type=int, help="override the master seed")
    sweep.add_argument(
        "--override",
        action="append",
        metavar="KEY=VALUE",
        help="dotted-path config override, e.g. sweep.n_channels=200 (repeatable)",
    )
    sweep.add_argument("--quiet", action="store_true", help="suppress progress messages")

    p_ber = sub.add_parser("ber", parents=[sweep], help="bit error rate sweep")
    p_ber.set_defaults(func=cmd_ber)

    p_se = sub.add_parser("se", parents=[sweep], help="spectral efficiency sweep")
    p_se.add_argument(
        "--channel-dump",
        help="evaluate the closed-form curves over a stored channel ensemble instead of sampling",
    )
    p_se.set_defaults(func=cmd_se)

    p_const = sub.add_parser("constellation", help="export constellation points")
    p_const.add_argument("--kind", choices=("qam", "pqam"), required=True)
    p_const.add_argument("--order", type=int, required=True)
    p_const.add_argument("--rings", type=int, default=0, help="ring count for pqam")
    p_const.add_argument("--out", default="results")
    p_const.add_argument("--scatter", action="store_true", help="also export received samples")
    p_const.add_argument("--snr-db", type=float, default=30.0)
    p_const.add_argument("--pn-regime", choices=("strong", "medium", "low", "off"), default="medium")
    p_const.add_argument("--n-slots", type=int, default=200)
    p_const.add_argument("--seed", type=int)
    p_const.set_defaults(func=cmd_constellation)

    p_val = sub.add_parser("validate", help="run the self-check registry")
    p_val.add_argument("--check", action="append", help="run only the named check (repeatable)")
    p_val.add_argument("--list", action="store_true", help="list check names and exit")
    p_val.add_argument("--out", help="write a JSON report")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - surface, do not traceback
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
