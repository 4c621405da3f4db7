import json
import os
from pathlib import Path

import pytest

import fedsim

SOURCE_DIR = Path(os.environ.get("FEDSIM_SOURCE_DIR", Path(__file__).resolve().parents[2]))


def drift_config(strategy="fedavg", rounds=300):
    return {
        "schema_version": 1,
        "seed": 0,
        "dataset": {"kind": "quadratic", "curvatures": [1.0, 3.0], "optima": [0.0, 1.0]},
        "strategy": {"name": strategy},
        "engine": {"rounds": rounds, "local_epochs": 2, "lr_local": 0.1},
    }


def test_run_returns_metrics_and_summary():
    out = fedsim.run(drift_config(rounds=5))
    assert len(out["metrics"]) == 5
    assert all(m["schema_version"] == fedsim.SCHEMA_VERSION for m in out["metrics"])
    assert out["summary"]["schema_version"] == fedsim.SCHEMA_VERSION
    assert [m["round"] for m in out["metrics"]] == [1, 2, 3, 4, 5]


def test_drift_fixed_points():
    avg = fedsim.run(drift_config("fedavg"))["summary"]["server_state"]["w"][0]
    scaffold = fedsim.run(drift_config("scaffold"))["summary"]["server_state"]["w"][0]
    assert avg == pytest.approx(0.728571, abs=1e-3)
    assert scaffold == pytest.approx(0.75, abs=1e-3)


def test_runs_are_deterministic():
    cfg = {
        "schema_version": 1,
        "seed": 4,
        "dataset": {"kind": "sine", "clients": 6, "hidden": [8]},
        "strategy": {"name": "fedprox"},
        "engine": {"rounds": 4, "batch_size": 5, "lr_local": 0.05, "sample_fraction": 0.5},
    }
    assert fedsim.run(cfg)["metrics"] == fedsim.run(cfg)["metrics"]


def test_config_error_carries_the_path():
    cfg = drift_config()
    cfg["engine"]["rouds"] = 3
    with pytest.raises(fedsim.ConfigError) as info:
        fedsim.run(cfg)
    assert info.value.path == "engine.rouds"
    assert isinstance(info.value, ValueError)


def test_divergence_reports_the_round():
    cfg = drift_config(rounds=50)
    cfg["engine"]["lr_local"] = 10.0
    with pytest.raises(fedsim.DivergenceError) as info:
        fedsim.run(cfg)
    assert info.value.round >= 1


def test_write_produces_artifacts(tmp_path):
    cfg = drift_config(rounds=3)
    cfg["output"] = {"dir": str(tmp_path / "out")}
    fedsim.run(cfg, write=True)
    lines = (tmp_path / "out" / "metrics.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["schema_version"] == 1
    assert (tmp_path / "out" / "curves.csv").read_text().startswith("schema_version,")


def test_strategy_listing():
    names = [s["name"] for s in fedsim.strategies()]
    assert names == sorted(names)
    assert {"fedavg", "scaffold", "pfedme", "cfl"} <= set(names)


def test_schema_matches_published_file_and_configs():
    jsonschema = pytest.importorskip("jsonschema")
    schema = fedsim.config_schema()
    published = json.loads((SOURCE_DIR / "schema" / "config.schema.json").read_text())
    assert schema == published
    for path in sorted((SOURCE_DIR / "configs").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), schema)


def test_gradcheck_passes():
    report = fedsim.gradcheck(trials=5)
    assert report["pass"]
    assert {e["op"] for e in report["entries"]} >= {"gradient", "hvp"}
