"""Tests for the command line interface and its exit codes."""

import json

import numpy as np
import pytest

from hpmimo import cli
from hpmimo.channel import ChannelParams, generate_channel, write_channel_dump
from hpmimo.montecarlo import ExperimentConfig

TINY_YAML = """
mode: ber
experiment_id: cli-tiny
channel: {n_tx: 32, n_rx: 16}
streams: {n_streams: 2, n_rf: 2}
snr_db: [15.0]
pn_regimes: [strong]
schemes:
  - {kind: qam, order: 4}
detectors: [euc]
sweep: {n_channels: 6, n_symbols: 20, min_bit_errors: 0, block_size: 3}
master_seed: 9
"""


@pytest.fixture
def tiny_config_path(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY_YAML)
    return path


def test_ber_run_writes_three_files(tiny_config_path, tmp_path, capsys):
    out = tmp_path / "results"
    code = cli.main(
        ["ber", "--config", str(tiny_config_path), "--out", str(out), "--quiet"]
    )
    assert code == 0
    assert (out / "cli-tiny_montecarlo.csv").is_file()
    assert (out / "cli-tiny_analytic.csv").is_file()
    assert (out / "cli-tiny_config.json").is_file()
    printed = capsys.readouterr().out.splitlines()
    assert len(printed) == 3
    header = (out / "cli-tiny_montecarlo.csv").read_text().splitlines()[0]
    assert header.startswith("experiment_id,source,snr_db")


def test_overrides_and_seed_reach_the_config(tiny_config_path, tmp_path):
    out = tmp_path / "results"
    code = cli.main(
        [
            "ber",
            "--config",
            str(tiny_config_path),
            "--out",
            str(out),
            "--quiet",
            "--override",
            "sweep.n_channels=4",
            "--override",
            "snr_db=[20.0]",
            "--seed",
            "123",
        ]
    )
    assert code == 0
    sidecar = json.loads((out / "cli-tiny_config.json").read_text())
    assert sidecar["sweep"]["n_channels"] == 4
    assert sidecar["snr_db"] == [20.0]
    assert sidecar["master_seed"] == 123


def test_config_and_preset_are_mutually_exclusive(tiny_config_path):
    assert cli.main(["ber"]) == 2  # neither given
    assert (
        cli.main(["ber", "--config", str(tiny_config_path), "--preset", "paper-fig5"])
        == 2
    )


def test_missing_and_malformed_configs_exit_two(tmp_path):
    assert cli.main(["ber", "--config", str(tmp_path / "nope.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment_id: [unclosed\n")
    assert cli.main(["ber", "--config", str(bad)]) == 2
    scalar = tmp_path / "scalar.yaml"
    scalar.write_text("just a string\n")
    assert cli.main(["ber", "--config", str(scalar)]) == 2


def test_mode_mismatch_exits_two(tiny_config_path):
    assert cli.main(["se", "--config", str(tiny_config_path)]) == 2


def test_bad_override_exits_two(tiny_config_path):
    assert cli.main(["ber", "--config", str(tiny_config_path), "--override", "oops"]) == 2


def test_invalid_config_value_exits_two(tiny_config_path, tmp_path):
    code = cli.main(
        [
            "ber",
            "--config",
            str(tiny_config_path),
            "--out",
            str(tmp_path),
            "--override",
            "streams.n_rf=1",  # fewer chains than streams
        ]
    )
    assert code == 2


def test_runtime_failure_exits_one(tmp_path):
    cfg = tmp_path / "rank.yaml"
    cfg.write_text(
        """
mode: ber
experiment_id: rank-deficient
channel: {n_tx: 8, n_rx: 4, n_clusters: 1, n_rays: 1}
streams: {n_streams: 2, n_rf: 2}
snr_db: [10.0]
pn_regimes: [medium]
schemes: [{kind: qam, order: 4}]
detectors: [euc]
sweep: {n_channels: 2, n_symbols: 10, min_bit_errors: 0, block_size: 2}
"""
    )
    assert cli.main(["ber", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == 1


def test_unknown_preset_exits_two():
    assert cli.main(["se", "--preset", "paper-fig99"]) == 2


def test_all_presets_parse():
    modes = {
        "paper-fig4": "se",
        "paper-fig5": "ber",
        "paper-fig6": "ber",
        "paper-fig7": "ber",
        "paper-fig8": "ber",
        "paper-fig9": "ber",
    }
    assert cli.preset_names() == sorted(modes)
    for name, mode in modes.items():
        raw = cli.load_preset(name)
        assert raw.pop("mode") == mode
        cfg = ExperimentConfig.from_dict(raw)
        assert cfg.channel.n_tx == 144
        assert cfg.snr_db[0] == -10.0
        assert cfg.snr_db[-1] == 40.0
    # The pilot preset carries the eight-stream compensation setup.
    pilot = ExperimentConfig.from_dict({k: v for k, v in cli.load_preset("paper-fig9").items() if k != "mode"})
    assert (pilot.n_streams, pilot.n_rf, pilot.n_pilots) == (8, 8, 1)


def test_se_preset_smoke(tmp_path):
    out = tmp_path / "se"
    code = cli.main(
        [
            "se",
            "--preset",
            "paper-fig4",
            "--out",
            str(out),
            "--quiet",
            "--override",
            "sweep.n_channels=5",
            "--override",
            "snr_db=[0.0, 30.0]",
        ]
    )
    assert code == 0
    text = (out / "se-pn-regimes_montecarlo.csv").read_text()
    assert ",hp\n" in text.replace("\r", "")
    assert ",fdp\n" in text.replace("\r", "")


def test_se_channel_dump_evaluation(tmp_path):
    params = ChannelParams(n_tx=32, n_rx=16)
    rng = np.random.default_rng(80)
    records = [(i, generate_channel(params, rng)) for i in range(3)]
    dump = tmp_path / "channels.bin"
    write_channel_dump(dump, params, records)
    cfg = tmp_path / "dump.yaml"
    cfg.write_text(
        """
mode: se
experiment_id: dump-eval
channel: {n_tx: 32, n_rx: 16}
streams: {n_streams: 2, n_rf: 2}
snr_db: [0.0, 10.0]
pn_regimes: [medium]
"""
    )
    out = tmp_path / "out"
    code = cli.main(
        [
            "se",
            "--config",
            str(cfg),
            "--channel-dump",
            str(dump),
            "--out",
            str(out),
            "--quiet",
        ]
    )
    assert code == 0
    lines = (out / "dump-eval_analytic.csv").read_text().splitlines()
    assert len(lines) == 3  # header + two SNR points
    assert all("hp_closed_form" in line for line in lines[1:])
    assert not (out / "dump-eval_montecarlo.csv").exists()


def test_constellation_points_csv(tmp_path):
    out = tmp_path / "const"
    assert cli.main(["constellation", "--kind", "qam", "--order", "16", "--out", str(out)]) == 0
    lines = (out / "16qam_points.csv").read_text().splitlines()
    assert lines[0] == "index,bits,re,im,ring,phase_index"
    assert len(lines) == 17
    # Energy of the listed points is one.
    pts = np.array([complex(float(l.split(",")[2]), float(l.split(",")[3])) for l in lines[1:]])
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_constellation_scatter(tmp_path):
    out = tmp_path / "const"
    code = cli.main(
        [
            "constellation",
            "--kind",
            "pqam",
            "--order",
            "16",
            "--rings",
            "8",
            "--out",
            str(out),
            "--scatter",
            "--n-slots",
            "5",
            "--seed",
            "3",
        ]
    )
    assert code == 0
    lines = (out / "16pqam8_scatter.csv").read_text().splitlines()
    assert lines[0] == "slot,stream,tx_index,re,im"
    assert len(lines) == 1 + 5 * 4  # four streams per slot


def test_constellation_invalid_combo_exits_two(tmp_path):
    assert cli.main(["constellation", "--kind", "qam", "--order", "16", "--rings", "2"]) == 2
    assert cli.main(["constellation", "--kind", "pqam", "--order", "16"]) == 2
    assert cli.main(["constellation", "--kind", "qam", "--order", "12"]) == 2


def test_validate_list_and_subset(capsys):
    assert cli.main(["validate", "--list"]) == 0
    names = capsys.readouterr().out.split()
    assert "coherent-gain" in names
    assert cli.main(["validate", "--check", "qam16-deltas", "--check", "regime-map"]) == 0
    out = capsys.readouterr().out
    assert "PASS qam16-polar-deltas" in out
    assert "2/2 checks passed" in out


def test_validate_unknown_check_exits_two():
    assert cli.main(["validate", "--check", "not-a-check"]) == 2


def test_validate_report_file(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert cli.main(["validate", "--check", "regime-map", "--out", str(report)]) == 0
    capsys.readouterr()
    payload = json.loads(report.read_text())
    assert payload["passed"] is True
    assert payload["checks"][0]["name"] == "pn-regime-map"
