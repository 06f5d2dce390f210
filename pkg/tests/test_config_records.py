import json

import pytest

from bandlab.config import ExperimentConfig, config_from_dict, parse_config, write_config
from bandlab.errors import ConfigError
from bandlab.records import (
    COLUMNS,
    ResultRecord,
    read_manifest,
    read_results,
    write_manifest,
    write_results,
)

BASE = {"M_list": [2, 4], "replicas": 3, "master_seed": 7}


def test_defaults_filled():
    cfg = config_from_dict(BASE, kind="decay")
    assert cfg.N_list == (8,) and cfg.lam == 0.0 and cfg.epsilon == 0.25


def test_missing_replicas_names_field():
    data = dict(BASE)
    del data["replicas"]
    with pytest.raises(ConfigError) as info:
        config_from_dict(data, kind="decay")
    assert info.value.field == "replicas"
    assert "replicas" in str(info.value)


def test_lambda_outside_window_rejected():
    with pytest.raises(ConfigError) as info:
        config_from_dict({**BASE, "lambda": 5.0, "epsilon": 0.25}, kind="decay")
    assert info.value.field == "lambda"


@pytest.mark.parametrize("bad", [
    {"replicas": 0}, {"replicas": 1.5}, {"M_list": []}, {"master_seed": -1},
    {"master_seed": 1 << 64}, {"epsilon": 1.0}, {"interval": [1, 0]}, {"extra": 1},
    {"kind": "fluctuations"}, {"cross_check": "yes"},
])
def test_invalid_values(bad):
    with pytest.raises(ConfigError):
        config_from_dict({**BASE, **bad}, kind="decay")


def test_json_syntax_error_has_line(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n  "replicas": 3,\n  oops\n}\n')
    with pytest.raises(ConfigError) as info:
        parse_config(path, kind="decay")
    assert info.value.line == 3


def test_round_trip_and_overrides(tmp_path):
    cfg = config_from_dict({**BASE, "lambda": 0.5, "N_list": [4, 6]}, kind="lemma22")
    path = write_config(cfg, tmp_path / "c.json")
    assert parse_config(path) == cfg
    over = parse_config(path, kind="lemma22", overrides={"master_seed": 9, "replicas": None})
    assert over.master_seed == 9 and over.replicas == cfg.replicas
    assert isinstance(cfg, ExperimentConfig)


def test_header_only_and_rows(tmp_path):
    recs = [ResultRecord("decay", 1, 11, 4, 8, {"log_norm": -1.25}),
            ResultRecord("decay", 0, 10, 4, 8, {"log_norm": 0.1 + 0.2}, flags=1)]
    paths = write_results(recs, tmp_path, experiments=["decay", "decay_summary"])
    assert [p.name for p in paths] == ["decay.csv", "decay_summary.csv"]
    assert (tmp_path / "decay_summary.csv").read_bytes() == (",".join(COLUMNS) + "\n").encode()
    rows = read_results(tmp_path / "decay.csv")
    assert [r["replica"] for r in rows] == [0, 1]
    assert rows[0]["stat_value"] == 0.1 + 0.2  # 17 significant digits round-trip
    assert rows[0]["flags"] == 1
    assert b"\r" not in (tmp_path / "decay.csv").read_bytes()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_non_finite_statistic_rejected():
    with pytest.raises(ValueError):
        ResultRecord("x", 0, 0, 1, 1, {"v": float("nan")})


def test_manifest_round_trip(tmp_path):
    data = {"tool": "bandlab", "files": ["a.csv"], "exclusions": {"4": 0}}
    path = write_manifest(data, tmp_path / "out")
    assert read_manifest(path) == data
    assert json.loads(path.read_text()) == data
