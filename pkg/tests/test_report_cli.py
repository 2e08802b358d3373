import json
import math
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperheat.calibration import read_thresholds
from hyperheat.cli import main, parse_cli, read_config_file
from hyperheat.errors import (
    DimensionError,
    DomainError,
    UnknownExperimentError,
    UsageError,
    ValidationError,
)
from hyperheat.experiments import EXPERIMENTS, run_experiment
from hyperheat.report import ExperimentReport, Series, config_hash, to_json, write_report

NAMES = {"kernel-checks", "radial-converge", "gaussian1d", "delayed", "horo",
         "counterexample", "forced", "mass-lines"}


def small_report():
    return ExperimentReport(
        "demo",
        {"n": 3, "t": [1.0, 2.0]},
        {"value": 0.1, "count": 2},
        {"a": Series.of(("x", "y"), [0.0, 1.0], [2.0, 3.0]),
         "b": Series.of(("t", "m", "e"), [1.0, 2.0, 3.0], [1.0, 1.0, 1.0], [0.0, 0.5, 1.0])},
        {"tool": "hyperheat"},
    )


# --- serialisation ----------------------------------------------------------------


def test_json_is_sorted_and_round_trips():
    text = small_report().to_json()
    data = json.loads(text)
    assert data["metrics"] == {"count": 2.0, "value": 0.1}
    assert list(data) == sorted(data)
    assert text.endswith("\n")


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_formatting_round_trips(x):
    assert json.loads(to_json(x)) == x


def test_nonfinite_values_rejected():
    with pytest.raises(DomainError):
        to_json(math.nan)
    with pytest.raises(DomainError):
        ExperimentReport("x", {}, {"bad": math.inf})


def test_series_contract():
    with pytest.raises(DomainError):
        Series.of(("x", "y"), [0.0, 0.0], [1.0, 2.0])
    with pytest.raises(DomainError):
        Series.of(("x",), [0.0])
    csv = Series.of(("x", "y"), [0.0, 1.0], [0.5, 0.25]).to_csv()
    assert csv == "x,y\n0,0.5\n1,0.25\n"


def test_report_is_write_once():
    r = small_report()
    with pytest.raises(Exception):
        r.metrics["value"] = 2.0
    with pytest.raises(Exception):
        r.experiment = "other"


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": 2.0}) == config_hash({"b": 2.0, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_write_report_files(tmp_out):
    paths = write_report(small_report(), tmp_out)
    names = sorted(p.name for p in paths)
    assert names == ["demo.a.csv", "demo.b.csv", "demo.json"]
    assert (tmp_out / "demo.a.csv").read_bytes() == b"x,y\n0,2\n1,3\n"
    assert not [p for p in tmp_out.iterdir() if p.name.endswith(".tmp")]


def test_write_report_into_file_fails(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        write_report(small_report(), blocker / "sub")


# --- experiments --------------------------------------------------------------------


def test_registry_matches_contract():
    assert set(EXPERIMENTS) == NAMES


def test_unknown_experiment():
    with pytest.raises(UnknownExperimentError):
        run_experiment("nope", {})


def test_errors_carry_experiment_context():
    with pytest.raises(ValidationError, match=r"\[kernel-checks\]"):
        run_experiment("kernel-checks", {"n": [4]})


def test_report_provenance():
    r = run_experiment("delayed", {"t": [10.0, 25.0]})
    assert r.provenance["tool"] == "hyperheat"
    assert r.provenance["config_sha256"] == config_hash(r.params)
    assert r.params["t"] == [10.0, 25.0]


def test_mass_lines_example():
    r = run_experiment("mass-lines", {"n": 3, "t": [5.0, 10.0, 20.0]})
    rows = {row[0]: row for row in r.series["lines_n3"].rows}
    cols = r.series["lines_n3"].columns
    assert abs(rows[20.0][cols.index("half_mass_radius")] - 40.0) <= 2.0
    assert r.metrics["sign_change_t1_n3"] == pytest.approx(math.sqrt(10.0), rel=1e-15)


def test_forced_example():
    r = run_experiment("forced", {})
    assert r.metrics["final_mass"] == pytest.approx(r.metrics["expected_final_mass"], abs=1e-4)
    assert r.metrics["pass.l1_contraction"] == 1.0


def test_parallel_run_identical(monkeypatch):
    serial = run_experiment("counterexample", {}).to_json()
    monkeypatch.setenv("HYPERHEAT_THREADS", "4")
    assert run_experiment("counterexample", {}).to_json() == serial


# --- command line ------------------------------------------------------------------


def test_parse_example():
    name, config = parse_cli(["converge", "gaussian1d", "--n", "3", "--t-list", "10,25,50,100"])
    assert name == "gaussian1d"
    assert config == {"n": 3, "t": [10.0, 25.0, 50.0, 100.0]}


def test_parse_missing_experiment():
    with pytest.raises(UsageError):
        parse_cli([])
    with pytest.raises(UsageError):
        parse_cli(["run", "--n", "3"])


def test_parse_rejects_bad_dimension():
    with pytest.raises(DimensionError):
        parse_cli(["kernel-checks", "--n", "1"])


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nt-list = 1,2\nn = 5\nr_max = 30  # trailing\n")
    assert read_config_file(cfg) == {"t": "1,2", "n": "5", "r_max": "30"}
    name, config = parse_cli(["horo", "--config", str(cfg), "--n", "3"])
    assert config == {"t": [1.0, 2.0], "n": 3, "r_max": 30.0}


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n")
    with pytest.raises(UsageError):
        read_config_file(bad)
    with pytest.raises(UsageError):
        read_config_file(tmp_path / "missing.cfg")


def test_threshold_file_merges(tmp_path):
    path = tmp_path / "th.json"
    path.write_text(json.dumps({"positive_part_l1": {"1": 0.5}}))
    table = read_thresholds(path)
    assert table["positive_part_l1"]["1"] == 0.5
    assert "2" in table["positive_part_l1"] and "davies" in table


def test_main_exit_codes(tmp_path, capsys):
    assert main(["nope"]) == 2
    assert main([]) == 2
    assert main(["kernel-checks", "--n", "1"]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["delayed", "--out", str(blocker / "sub")]) == 1
    assert main(["delayed", "--t-list", "10,25"]) == 0
    assert json.loads(capsys.readouterr().out)["experiment"] == "delayed"


def test_main_writes_json_and_csv(tmp_out):
    assert main(["delayed", "--out", str(tmp_out)]) == 0
    files = sorted(p.name for p in tmp_out.iterdir())
    assert files == ["delayed.intersections.csv", "delayed.json", "delayed.l1_gap.csv"]


def test_strict_threshold_file_fails_run(tmp_path, capsys):
    path = tmp_path / "strict.json"
    path.write_text(json.dumps({"positive_part_l1": {"1": 0.9}}))
    assert main(["counterexample", "--thresholds", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["metrics"]["pass.threshold"] == 0.0


def test_console_script_rerun_is_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        proc = subprocess.run([sys.executable, "-m", "hyperheat.cli", "run", "horo", "--out", str(d)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]
