import csv
from dataclasses import replace

import pytest

from emmsim.cli import MissingOracleData, main, parse_seeds, report_bounds
from emmsim.config import RunConfig, dump_config, parse_config
from emmsim.engine import run_simulation, run_with_oracle
from emmsim.io import SUMMARY_COLUMNS, TRACE_COLUMNS, read_trace, write_trace
from emmsim.scenario import NetworkConfig

SMALL = "tasks = 20\nbattery = 40\nbs_count = 9\narea_side = 300\n"


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def test_trace_header_and_round_trip(tmp_path):
    cfg = RunConfig(tasks=5, battery=10.0, policy="emm-lsi")
    trace, _ = run_simulation(cfg)
    path = write_trace(tmp_path / "t.csv", trace)
    with path.open() as fh:
        assert tuple(next(csv.reader(fh))) == TRACE_COLUMNS
    assert read_trace(path) == trace


def test_parse_seeds():
    assert parse_seeds("4") == [4]
    assert parse_seeds("1..3") == [1, 2, 3]
    assert parse_seeds("2,5") == [2, 5]


def test_run_writes_trace_summary_and_config(tmp_path, small_cfg):
    out = tmp_path / "out"
    assert main(["run", "--config", str(small_cfg), "--seeds", "1..2", "--out", str(out)]) == 0
    assert (out / "trace_emm-gsi_1.csv").exists() and (out / "trace_emm-gsi_2.csv").exists()
    with (out / "summary.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == SUMMARY_COLUMNS and len(rows) == 3
    assert parse_config(out / "config.txt") == parse_config(small_cfg)


def test_dump_config_round_trips(tmp_path, capsys):
    assert main(["dump-config"]) == 0
    path = tmp_path / "dump.cfg"
    path.write_text(capsys.readouterr().out)
    assert parse_config(path) == RunConfig()


def test_verify_passes_with_zero_exit(small_cfg, capsys):
    assert main(["verify", "--config", str(small_cfg), "--seeds", "1..2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 4


def test_verify_lsi_labels_surrogate(small_cfg, capsys):
    assert main(["verify", "--config", str(small_cfg), "--policy", "emm-lsi"]) == 0
    assert "empirical surrogate" in capsys.readouterr().out


def test_report_flags_corrupted_summary():
    cfg = RunConfig(tasks=20, battery=40.0, network=NetworkConfig(area_side=300.0, bs_count=9))
    _, summary, oracle = run_with_oracle(cfg)
    from emmsim.engine import bound_inputs, verify_bounds
    summary.frame_delay = [d * 1e6 for d in summary.frame_delay]
    summary.bound_report = verify_bounds(summary, oracle, bound_inputs(cfg, oracle))
    text, ok = report_bounds(summary)
    assert not ok and "FAIL" in text


def test_report_without_oracle_is_an_error():
    _, summary = run_simulation(RunConfig(tasks=5, battery=10.0))
    with pytest.raises(MissingOracleData):
        report_bounds(summary)


def test_verify_cli_refuses_epoch_runs(tmp_path, capsys):
    path = tmp_path / "e.cfg"
    path.write_text(SMALL + "epochs.model = random\n")
    assert main(["verify", "--config", str(path)]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_config_exits_with_message(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("alpha = 1.5\n")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "alpha" in capsys.readouterr().err


def test_custom_sweep_cli(tmp_path, small_cfg):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(small_cfg), "--var", "ks", "--values", "4,8",
                 "--series", "emm-lsi", "--seeds", "1..2", "--out", str(out), "--no-render"]) == 0
    assert (out / "trace_ks-4_1.csv").exists() and (out / "plotdata_custom.csv").exists()
