import json
from importlib import resources

import jsonschema
import pytest

from qkdsim.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

SMALL = {
    "visibility-scan": {"scenario": {"rounds": 4, "pulses_per_point": 100000, "round_interval_s": 5.0}},
    "long-run": {"scenario": {"duration_s": 20000.0, "bin_seconds": 3600.0}},
    "loss-sweep": {"scenario": {"losses": [10.0, 20.0], "fine_step": 4.0, "mc_pulses": 2000000}},
    "postprocess-demo": {"security": {"block_size": 16384}},
}
SCHEMA = json.loads(resources.files("qkdsim").joinpath("schemas/summary.schema.json").read_text())


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_all(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


@pytest.mark.parametrize("scenario", sorted(SMALL))
def test_scenario_runs_validates_and_is_deterministic(tmp_path, scenario, capsys):
    cfg = write_config(tmp_path, SMALL[scenario])
    out = tmp_path / "out"
    assert main([scenario, "--config", cfg, "--seed", "5", "--out", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert printed[-1].endswith("summary.json")
    first = read_all(out)
    summary = json.loads(first["summary.json"])
    jsonschema.validate(summary, SCHEMA)
    assert summary["seed"] == 5 and summary["scenario"] == scenario
    assert sorted(summary["files"]) == sorted(n for n in first if n.endswith(".csv"))
    for name, data in first.items():
        text = data.decode("utf-8")
        if name.endswith(".csv"):
            header = text.splitlines()[0]
            assert header and ";" not in header
    assert main([scenario, "--config", cfg, "--seed", "5", "--out", str(out)]) == EXIT_OK
    assert read_all(out) == first


def test_embedded_config_reproduces_run(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg = write_config(tmp_path, SMALL["visibility-scan"])
    assert main(["visibility-scan", "--config", cfg, "--seed", "3", "--out", str(out1)]) == EXIT_OK
    embedded = json.loads((out1 / "summary.json").read_text())["config"]
    embedded["scenario"]["output_path"] = str(out2)
    cfg2 = write_config(tmp_path, embedded, "embedded.json")
    assert main(["visibility-scan", "--config", cfg2, "--out", str(out2)]) == EXIT_OK
    a, b = read_all(out1), read_all(out2)
    assert {k: v for k, v in a.items() if k.endswith(".csv")} == {k: v for k, v in b.items() if k.endswith(".csv")}


def test_different_seed_changes_output(tmp_path):
    cfg = write_config(tmp_path, SMALL["visibility-scan"])
    main(["visibility-scan", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "s1")])
    main(["visibility-scan", "--config", cfg, "--seed", "2", "--out", str(tmp_path / "s2")])
    assert (tmp_path / "s1" / "visibility_rounds.csv").read_bytes() != \
        (tmp_path / "s2" / "visibility_rounds.csv").read_bytes()


@pytest.mark.parametrize("data", [
    {"scenario": {"rounds": -1}},
    {"system": {"probabilities": [0.5, 0.5, 0.5]}},
    {"scenario": {"name": "long-run"}},
    {"channel": {"unknown": 1}},
])
def test_config_errors_exit_2(tmp_path, data, capsys):
    cfg = write_config(tmp_path, data)
    assert main(["visibility-scan", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_unreadable_and_malformed_config_exit_2(tmp_path):
    assert main(["loss-sweep", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["loss-sweep", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["loss-sweep", "--seed", "-4", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_runtime_failure_exit_3(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = write_config(tmp_path, SMALL["loss-sweep"] | {"scenario": {"mc_pulses": 0}})
    assert main(["loss-sweep", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_RUNTIME
    assert str(blocker) in capsys.readouterr().err
