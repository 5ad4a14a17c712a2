from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

from randhold.cli import main
from randhold.config import config_from_dict, dump_config, loads_config, parse_config
from randhold.errors import ConfigError, OutputError
from randhold.experiments import CheckReport, run_sweep
from randhold.reports import CSV_COLUMNS, emit_reports, verify_manifest

MINIMAL = """
model: linear
system: S1
dist: {kind: exponential, rate: 1.0}
regime: {kind: R1, delta: 0.5}
n_values: [64, 256]
replications: 100
"""

SWEEP = """
model: linear
system: S1
dist: {kind: exponential, rate: 1.0}
regime: {kind: R3}
n_values: [32, 64, 128]
replications: 32
metrics: ["lln:1", regime3]
seed: 11
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_parses(tmp_path):
    cfg = parse_config(write(tmp_path, MINIMAL))
    assert cfg.n_values == (64, 256) and cfg.replications == 100
    assert cfg.metrics == ("lln:1",) and cfg.regime.delta == 0.5


@pytest.mark.parametrize("edit,key", [
    (lambda d: d.update(regime={"kind": "R2"}), "regime.c"),
    (lambda d: d.update(n_values=[256, 64]), "n_values"),
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d.pop("dist"), "dist"),
    (lambda d: d.update(replications="many"), "replications"),
    (lambda d: d.update(regime={"kind": "R1", "delta": 0.5, "speed": 2}), "regime.speed"),
    (lambda d: d.update(dist={"kind": "exponential", "rate": -1}), "dist"),
    (lambda d: d.update(metrics="clt"), "metrics"),
    (lambda d: d.update(seed=1.5), "seed"),
])
def test_config_errors_name_the_key(edit, key):
    import yaml

    doc = yaml.safe_load(MINIMAL)
    edit(doc)
    with pytest.raises(ConfigError) as info:
        config_from_dict(doc)
    assert info.value.key == key


def test_missing_regime_constant_message():
    with pytest.raises(ConfigError, match="regime.c: required"):
        loads_config(MINIMAL.replace("{kind: R1, delta: 0.5}", "{kind: R2}"))


def test_bad_yaml():
    with pytest.raises(ConfigError):
        loads_config("model: [unclosed")


def test_round_trip():
    cfg = loads_config(SWEEP + "expected_slopes: {'lln:1': [-1.2, -0.8]}\nforcing_sign: -1\n")
    again = loads_config(dump_config(cfg))
    assert again == cfg
    matrices = loads_config(MINIMAL.replace("system: S1", "system: {A: [[1.0]], B: [[1.0]], K: [[2.0]], x0: [1.0]}"))
    assert loads_config(dump_config(matrices)) == matrices


def test_manifest_config_round_trip(tmp_path):
    cfg = loads_config(SWEEP)
    manifest = emit_reports(run_sweep(cfg), tmp_path)
    assert config_from_dict(manifest.config) == cfg


def test_empty_check_list_gives_no_data_files(tmp_path):
    manifest = emit_reports([], tmp_path)
    assert manifest.files == {}
    assert sorted(os.listdir(tmp_path)) == ["manifest.json"]


def test_single_point_sweep(tmp_path):
    cfg = loads_config(SWEEP.replace("[32, 64, 128]", "[32]"))
    emit_reports(run_sweep(cfg), tmp_path)
    rows = (tmp_path / "series.csv").read_text().splitlines()
    assert rows[0] == ",".join(CSV_COLUMNS)
    assert len(rows) == 3  # one n, two metrics
    assert rows[1].split(",")[2] == "nan"
    fits = json.loads((tmp_path / "report.json").read_text())["fits"]
    assert all(f["slope"] is None for f in fits.values())


def test_golden_replay_hashes(tmp_path):
    cfg = loads_config(SWEEP)
    a = emit_reports(run_sweep(cfg), tmp_path / "a", wall_clock=1.0)
    b = emit_reports(run_sweep(cfg), tmp_path / "b", wall_clock=2.0)
    assert a.files == b.files and len(a.files) == 2
    assert verify_manifest(tmp_path / "a") == []
    (tmp_path / "a" / "series.csv").write_text("tampered\n")
    assert verify_manifest(tmp_path / "a") == ["series.csv"]


def test_check_reports_json(tmp_path):
    checks = [CheckReport("wald", 1.0, 1.0, 0.0), CheckReport("mean_age_M", 0.5, 1.0, 0.05)]
    manifest = emit_reports(checks, tmp_path)
    data = json.loads((tmp_path / "checks.json").read_text())
    assert [c["passed"] for c in data["checks"]] == [True, False]
    assert manifest.summaries["checks"] == {"wald": True, "mean_age_M": False}


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OutputError) as info:
        emit_reports([], blocker / "sub")
    assert "file" in str(info.value)


# --- command line -----------------------------------------------------------

def test_cli_list_systems(capsys):
    assert main(["--verb", "list-systems"]) == 0
    out = capsys.readouterr().out
    assert "S1" in out and "sine_feedback" in out


def test_cli_sweep_and_threads(tmp_path, capsys):
    cfg = write(tmp_path, SWEEP)
    assert main(["--verb", "sweep", "--config", str(cfg), "--out", str(tmp_path / "o1")]) == 0
    assert main(["--verb", "sweep", "--config", str(cfg), "--out", str(tmp_path / "o8"), "--threads", "8"]) == 0
    m1 = json.loads((tmp_path / "o1" / "manifest.json").read_text())
    m8 = json.loads((tmp_path / "o8" / "manifest.json").read_text())
    assert m1["files"] == m8["files"]


def test_cli_seed_override(tmp_path):
    cfg = write(tmp_path, SWEEP)
    main(["--verb", "sweep", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "99"])
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert m["seed"] == 99 and m["config"]["seed"] == 99


def test_cli_expected_slope_failure(tmp_path):
    cfg = write(tmp_path, SWEEP + "expected_slopes: {'lln:1': [0.0, 1.0]}\n")
    assert main(["--verb", "sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_cli_parse_errors(tmp_path):
    bad = write(tmp_path, MINIMAL.replace("{kind: R1, delta: 0.5}", "{kind: R2}"))
    assert main(["--verb", "sweep", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["--verb", "sweep", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2
    assert main(["--verb", "sweep", "--out", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["--verb", "dance"])
    assert info.value.code == 2


def test_cli_io_error(tmp_path):
    cfg = write(tmp_path, SWEEP)
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    assert main(["--verb", "sweep", "--config", str(cfg), "--out", str(blocker / "o")]) == 4


def test_cli_check_and_path(tmp_path):
    text = MINIMAL.replace("replications: 100", "replications: 1000").replace("[64, 256]", "[64, 2000]")
    cfg = write(tmp_path, text)
    assert main(["--verb", "check", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 0
    names = [c["name"] for c in json.loads((tmp_path / "c" / "checks.json").read_text())["checks"]]
    assert names == ["wald", "elementary_renewal", "donsker_variance", "mean_age_M", "z_gaussianity"]
    assert main(["--verb", "path", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 0
    header = (tmp_path / "p" / "path.csv").read_text().splitlines()[0]
    assert header == "t,anchor,x0,xn0,X0,Z0,Q0"


def test_cli_check_failure_exit_code(tmp_path):
    text = MINIMAL.replace("replications: 100", "replications: 1000").replace("[64, 256]", "[1, 2]")
    cfg = write(tmp_path, text)
    assert main(["--verb", "check", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 3


def test_cli_check_needs_replications(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    assert main(["--verb", "check", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 2
