import json
import logging
from importlib import resources
from pathlib import Path

import numpy as np
import pytest
import yaml

from ustatlab.cli import main
from ustatlab.emitters import load_field
from ustatlab.engine import build_config, load_check_module, load_registry, resolve_check, run_experiment
from ustatlab.pyd_models.config import ExperimentConfig
from ustatlab.utils.errors import BadCheckError, ConfigError
from ustatlab.utils.tracker import Tracker, compute_mismatches
from ustatlab.utils.validator import load_config_file

FOUR_SUMMAND = {"check": "trivial_direction_4sum", "n": 2, "omega": 2, "p": 2.0, "count": 10, "seed": 7}


def _json_out(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_registry_entries_load():
    registry = load_registry()
    ids = [c.check_id for c in registry.checks]
    assert len(ids) == 14 and len(set(ids)) == 14
    for entry in registry.checks:
        module = load_check_module(entry)
        for name in ("sample", "evaluate", "perturb", "adverse"):
            assert callable(getattr(module, name))
    assert not resolve_check("canonical", registry).asserted
    with pytest.raises(BadCheckError):
        resolve_check("nope", registry)


def test_packaged_registry_parses_every_entry():
    raw = yaml.safe_load(resources.files("ustatlab.registry").joinpath("checks.yaml").read_text())
    registry = load_registry()
    assert [c.check_id for c in registry.checks] == [e["check_id"] for e in raw["checks"]]
    assert resolve_check("square_function", registry).description.startswith("||f||_p over")
    assert resolve_check("sqfn_decoupled", registry).description.startswith("||f||_p^p")


def test_malformed_registry_entries_are_skipped(tmp_path, caplog):
    good = {"check_id": "rosenthal", "check_module": "ustatlab.verify.rosenthal", "description": "d", "asserted": True}
    entries = [
        good,
        {"check_id": "no_flag", "check_module": "ustatlab.verify.mz", "description": "d"},
        {**good, "check_module": "ustatlab.verify.mz"},
        {**good, "check_id": "Bad-Id"},
    ]
    path = tmp_path / "checks.yaml"
    path.write_text(yaml.safe_dump({"checks": entries}))
    with caplog.at_level(logging.WARNING, logger="ustatlab.engine"):
        registry = load_registry(path)
    assert [(c.check_id, c.check_module) for c in registry.checks] == [("rosenthal", "ustatlab.verify.rosenthal")]
    assert len([r for r in caplog.records if r.levelno == logging.WARNING]) == 3


@pytest.mark.parametrize("text", ["checks:\n  - description: ||f||\n", "checks: 3\n", "- a\n- b\n"])
def test_unusable_registry_file_is_a_config_error(tmp_path, text):
    path = tmp_path / "checks.yaml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_registry(path)


def test_four_summand_batch_writes_reports_and_manifest(tmp_path):
    result = run_experiment(ExperimentConfig(**FOUR_SUMMAND), out_dir=tmp_path)
    assert len(result.reports) == 10
    assert all(r.passed is True and r.error is None for r in result.reports)
    assert [r.instance for r in result.reports] == list(range(10))
    assert result.exit_status == 0
    assert sorted(p.name for p in result.outputs) == ["reports.csv", "reports.jsonl"]
    tracker = Tracker(tmp_path / "manifest.json")
    assert compute_mismatches(tracker) == []
    assert tracker.meta["seed"] == 7
    assert tracker.meta["config"]["check"] == "trivial_direction_4sum"
    assert tracker.meta["outcome"] == {"instances": 10, "passed": 10, "failed": 0, "errors": 0, "measured": 0}


def test_reports_are_byte_identical_across_runs_and_threads(tmp_path):
    outputs = []
    for name, threads in (("a", 1), ("b", 1), ("c", 2)):
        config = ExperimentConfig(**{**FOUR_SUMMAND, "threads": threads, "format": "jsonl"})
        run_experiment(config, out_dir=tmp_path / name)
        outputs.append((tmp_path / name / "reports.jsonl").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_config_errors():
    with pytest.raises(ConfigError):
        build_config({"check": "rosenthal", "p": -1.0})
    with pytest.raises(ConfigError):
        build_config({"check": "rosenthal", "bogus": 1})
    with pytest.raises(ConfigError):
        build_config({"check": "weighted_lower_bound"}, {"kappa": 0.2, "eps": 0.3})
    assert build_config({"check": "rosenthal", "p": 3.0}, {"p": None, "n": 4}).n == 4


def test_config_file_schema(tmp_path):
    good = tmp_path / "good.yaml"
    good.write_text(yaml.safe_dump(FOUR_SUMMAND))
    assert load_config_file(good)["count"] == 10
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump({**FOUR_SUMMAND, "bogus": True}))
    with pytest.raises(ConfigError):
        load_config_file(bad)


def test_error_instances_do_not_fail_the_run():
    result = run_experiment(ExperimentConfig(check="mz", n=13, omega=2, count=2))
    assert result.exit_status == 0
    assert all(r.passed is None and r.error.startswith("TooLargeError") for r in result.reports)


def test_cli_run_from_config(tmp_path, capsys):
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(FOUR_SUMMAND))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out"), "--count", "3"]) == 0
    out = _json_out(capsys)
    assert out["status"] == "ok" and out["instances"] == 3 and out["failed"] == 0
    assert (tmp_path / "out" / "manifest.json").exists()


def test_cli_usage_errors_exit_two(capsys):
    assert main(["check", "rosenthal", "--p=-1"]) == 2
    assert _json_out(capsys)["status"] == "error"
    assert main(["check", "no_such_check"]) == 2
    assert "BadCheckError" in _json_out(capsys)["error"]


def test_cli_kfun(capsys):
    assert main(["kfun", "--atoms", "1", "--mass", "1", "--value", "4", "--t", "0.25"]) == 0
    out = _json_out(capsys)
    assert abs(out["value"] - 1.0) <= 1e-9
    assert out["dual"] <= out["value"]


def test_cli_thetaq_is_homogeneous(capsys):
    args = ["thetaq", "--atoms", "2", "--mass", "0.5", "--theta", "0.5", "--q", "2"]
    assert main([*args, "--value", "1"]) == 0
    one = _json_out(capsys)
    assert main([*args, "--value", "3"]) == 0
    three = _json_out(capsys)
    assert one["status"] == "ok" and one["theta"] == 0.5 and one["q"] == 2.0
    assert one["value"] > 0.0
    assert abs(three["value"] - 3.0 * one["value"]) <= 1e-4 * three["value"]


def test_cli_decompose_four_summand(tmp_path, capsys):
    assert main(["decompose", "four-summand", "--out", str(tmp_path), "--seed", "3"]) == 0
    out = _json_out(capsys)
    assert out["passed"] is True
    assert sorted(out["certificates"]) == ["a", "b", "c", "d"]
    payload = json.loads((tmp_path / "decomposition_four-summand.json").read_text())
    assert len(payload["parts"]) == 4
    assert payload["checks"]["passed"] is True
    target = load_field(tmp_path / "decomposition_four-summand_target.npy")
    assert np.array_equal(target.values, np.asarray(payload["target"]["values"]))


def test_cli_search_list_and_oracles(capsys):
    assert main(["search", "mz", "--budget", "4", "--n", "3"]) == 0
    worst = _json_out(capsys)["worst"]
    assert worst["params"]["search"]["budget"] == 4
    assert main(["list"]) == 0
    assert len(_json_out(capsys)["checks"]) == 14
    assert main(["oracle", "inclusion-exclusion", "--n", "3", "--omega", "2", "--subset", "1,3"]) == 0
    assert _json_out(capsys)["max_difference"] <= 1e-12
    assert main(["decouple", "--n", "3", "--m", "2", "--q", "0.5"]) == 0
    assert _json_out(capsys)["ratio"] > 0.0


def test_shipped_experiment_configs_validate():
    paths = sorted((Path(__file__).resolve().parents[1] / "data" / "experiments").glob("*.yaml"))
    assert paths
    for path in paths:
        config = build_config(load_config_file(path))
        resolve_check(config.check)
