import json

import pytest

from ness_dmrg.cli import build_parser, main
from ness_dmrg.experiments import EXIT_CONFIG_ERROR, EXIT_OK

CONFIG = """
model:
  N: 2
  gamma: 1.0
  Delta: 1.0
  f1: 1.0
  fN: 0.0
schedule:
  local_solver_iters: 24
  max_bond: 8
  max_sweeps: 60
workers: 1
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(CONFIG)
    return path


def test_run_writes_outputs(tmp_path, config_path):
    out = tmp_path / "run"
    assert main(["run", str(config_path), "--out", str(out), "--scheme", "rnln"]) == EXIT_OK
    assert (out / "run-000" / "history.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["result"]["metadata"]["ordering"] == "RNLN"
    assert summary["run"] == "run-000"


def test_log_level_is_case_insensitive(tmp_path, config_path):
    out = tmp_path / "run"
    assert main(["--log-level", "debug", "run", str(config_path), "--out", str(out)]) == EXIT_OK


def test_bad_yaml_is_a_config_error(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("model: {N: 2\n")
    assert main(["run", str(path), "--out", str(tmp_path / "run")]) == EXIT_CONFIG_ERROR


def test_missing_config(tmp_path):
    assert main(["run", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG_ERROR


def test_oracle_writes_fixture(tmp_path, config_path):
    out = tmp_path / "fixtures"
    assert main(["oracle", str(config_path), "--out", str(out)]) == EXIT_OK
    record = json.loads((out / "oracle_N2.json").read_text())
    assert len(record["current_profile"]) == 1
    assert len(record["magnetization_profile"]) == 2


def test_oracle_rejects_large_chain(tmp_path):
    path = tmp_path / "big.yaml"
    path.write_text("model: {N: 7}\n")
    assert main(["oracle", str(path), "--out", str(tmp_path / "fixtures")]) == EXIT_CONFIG_ERROR
    assert not (tmp_path / "fixtures" / "oracle_N7.json").exists()


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
