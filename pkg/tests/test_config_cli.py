import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from aircomp import cli
from aircomp.celldual import NonConvergence
from aircomp.config import (ConfigError, RunConfig, config_from_dict, config_to_dict, parse_config,
                            serialize_config)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def tiny(**overrides):
    raw = {
        "version": 1, "mode": "pareto", "seed": 5, "realizations": 2,
        "scenario": {"devices_per_cell": [2, 2]},
        "centralized": {"num_profiles": 3, "bisect_tol": 1e-3},
        "baselines": {"power_sweep_w": [0.1, 1.0]},
        "validate": {"trials": 2000},
    }
    raw.update(overrides)
    return raw


def write(tmp_path, raw, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_defaults_match_two_cell_setup():
    config = RunConfig()
    sc = config.scenario.build()
    assert sc.num_cells == 2 and sc.num_devices == 40
    assert sc.noise_power == pytest.approx(1e-15)
    assert sc.pathloss.ref_gain == pytest.approx(1e-6)
    assert config.distributed.alpha == 1.0


@pytest.mark.parametrize("name", ["two_cell.yaml", "three_cell.yaml"])
def test_shipped_configs_parse(name):
    config = parse_config(CONFIGS / name)
    assert config.scenario.noise_w == pytest.approx(1e-15)
    assert config.scenario.ref_gain == pytest.approx(1e-6)


def test_round_trip_is_identity():
    config = parse_config(CONFIGS / "two_cell.yaml")
    again = config_from_dict(yaml.safe_load(serialize_config(config)))
    assert again == config
    assert config_to_dict(again) == config_to_dict(config)


@pytest.mark.parametrize("raw, key", [
    (dict(centralized={"profiles": [[0.5, 0.6]]}), "centralized.profiles[0]"),
    (dict(scenario={"radius": 3.0}), "scenario.radius"),
    (dict(colour="blue"), "colour"),
    (dict(mode="fast"), "mode"),
    (dict(version=7), "version"),
    (dict(realizations=0), "realizations"),
    (dict(scenario={"noise_dbm": -120, "noise_w": 1e-15}), "scenario.noise_dbm"),
    (dict(scenario={"devices_per_cell": [2]}), "scenario.devices_per_cell"),
    (dict(scenario={"ap_positions": [[0, 0], [0, 40], [20, 40]], "devices_per_cell": [1, 1, 1]}),
     "centralized.profiles"),
    (dict(seed="abc"), "seed"),
])
def test_invalid_configs_name_the_key(raw, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        config_from_dict(tiny(**raw))


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("mode: [unclosed\n")
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_cli_exit_code_on_bad_config(tmp_path, capsys):
    path = write(tmp_path, tiny(centralized={"profiles": [[0.3, 0.3]]}))
    assert cli.main(["--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "centralized.profiles" in capsys.readouterr().err


def test_cli_overrides_and_determinism(tmp_path):
    path = write(tmp_path, tiny())
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["--config", str(path), "--out", str(a), "--seed", "9"]) == 0
    assert cli.main(["--config", str(path), "--out", str(b), "--seed", "9"]) == 0
    assert (a / "pareto.csv").read_bytes() == (b / "pareto.csv").read_bytes()
    stored = parse_config(a / "config.yaml")
    assert stored.seed == 9 and stored.output == str(a)
    rows = read_csv(a / "pareto.csv")
    assert len(rows) == 2 * 3 and all(r["error"] == "" for r in rows)


def test_pareto_output_non_dominated(tmp_path):
    path = write(tmp_path, tiny(realizations=1, centralized={"num_profiles": 5, "bisect_tol": 1e-5}))
    assert cli.main(["--config", str(path), "--out", str(tmp_path)]) == 0
    mse = np.array([[float(r["mse_1"]), float(r["mse_2"])] for r in read_csv(tmp_path / "pareto.csv")])
    for i in range(len(mse)):
        for j in range(len(mse)):
            assert i == j or not np.all(mse[j] < mse[i] - 2e-5)


def test_baselines_mode_ordering(tmp_path):
    path = write(tmp_path, tiny(mode="baselines", realizations=3))
    assert cli.main(["--config", str(path), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "baselines.csv")
    assert [r["scheme"] for r in rows[:4]] == list(cli.BASELINE_ORDER)
    for value in ("0.10000000000000001", "1"):
        means = {r["scheme"]: float(r["mean_sum_mse"]) for r in rows if r["value"] == value}
        assert means["centralized"] <= means["max_interference"] + 1e-3
        assert all(r["realizations"] == "3" and r["errors"] == "" for r in rows)


def test_distributed_mode_records_failures(tmp_path, monkeypatch):
    real_run = cli.run_algorithm2
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) == 1:
            raise NonConvergence("dual search stalled", 0.5)
        return real_run(*args, **kwargs)

    monkeypatch.setattr(cli, "run_algorithm2", flaky)
    path = write(tmp_path, tiny(mode="distributed"))
    assert cli.main(["--config", str(path), "--out", str(tmp_path)]) == 0
    summary = read_csv(tmp_path / "distributed.csv")
    assert summary[0]["stop_reason"] == "error" and "NonConvergence" in summary[0]["error"]
    assert summary[1]["error"] == "" and summary[1]["stop_reason"] != "error"
    trace = read_csv(tmp_path / "convergence.csv")
    assert trace and {r["realization"] for r in trace} == {"1"}
    lines = (tmp_path / "messages.jsonl").read_text().splitlines()
    assert lines and all(json.loads(line)["realization"] == 1 for line in lines)


def test_validate_mode(tmp_path):
    path = write(tmp_path, tiny(mode="validate", realizations=1))
    assert cli.main(["--config", str(path), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "validate.csv")
    assert len(rows) == 4
    assert all(abs(float(r["z_score"])) < 5 for r in rows)


def test_unwritable_output_exits_one(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    path = write(tmp_path, tiny())
    assert cli.main(["--config", str(path), "--out", str(blocker / "sub")]) == 1
