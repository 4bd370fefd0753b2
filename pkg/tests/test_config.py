import pytest
import yaml

from src.core.config import DEFAULT_CONFIG_PATH, ENV_OUTPUT_DIR, ENV_THREADS, Config, RunConfig
from src.core.errors import InvalidParameterError


def test_shipped_settings_match_defaults():
    config = Config(DEFAULT_CONFIG_PATH).run_config()
    assert config.to_mapping() == RunConfig().with_env_overrides().to_mapping()


def test_yaml_round_trip():
    config = RunConfig.from_mapping({"lattice": {"lam": 2, "n_list": [8, 16]}, "nls": {"sign": "focusing"}})
    assert config.lattice.lam == 2.0
    assert isinstance(config.lattice.lam, float)
    restored = RunConfig.load_yaml(config.dump_yaml())
    assert restored == config


def test_unknown_key_is_rejected():
    with pytest.raises(InvalidParameterError, match="lamda"):
        RunConfig.from_mapping({"lattice": {"lamda": 2.0}})


def test_section_must_be_mapping():
    with pytest.raises(InvalidParameterError):
        RunConfig.from_mapping({"harness": [1, 2]})


@pytest.mark.parametrize(
    "mapping",
    [
        {"lattice": {"geometry": "XX"}},
        {"nls": {"sign": "neutral"}},
        {"harness": {"report_format": "xml"}},
        {"harness": {"threads": 0}},
        {"window": {"bump": "gauss"}},
        {"functional": {"c_a": float("nan")}},
        {"extremizer": {"max_iter": 2.5}},
        {"nls": {"contraction_factor": 1.0}},
    ],
)
def test_invalid_values(mapping):
    with pytest.raises(InvalidParameterError):
        RunConfig.from_mapping(mapping)


def test_env_overrides():
    config = RunConfig().with_env_overrides({ENV_OUTPUT_DIR: "/tmp/lab", ENV_THREADS: "4", "UNRELATED": "x"})
    assert config.harness.out_dir == "/tmp/lab"
    assert config.harness.threads == 4
    assert RunConfig().with_env_overrides({}).harness.threads == 1


def test_env_threads_must_be_integer():
    with pytest.raises(InvalidParameterError):
        RunConfig().with_env_overrides({ENV_THREADS: "viele"})


def test_missing_file_falls_back_to_defaults(tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    monkeypatch.delenv(ENV_THREADS, raising=False)
    assert Config(tmp_path / "fehlt.yaml").run_config() == RunConfig()


def test_record_value_persists_section(tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_OUTPUT_DIR, raising=False)
    monkeypatch.delenv(ENV_THREADS, raising=False)
    path = tmp_path / "settings.yaml"
    path.write_text("nls:\n  sign: focusing\nharness:\n  seed: 11\n", encoding="utf-8")
    updated = Config(path).record_value("nls", "smallness", 0.0625)
    assert updated.nls.smallness == 0.0625
    assert updated.nls.sign == "focusing"

    stored = yaml.safe_load(path.read_text(encoding="utf-8"))
    assert "config_path" not in stored
    assert stored["nls"] == {"sign": "focusing", "smallness": 0.0625}
    assert stored["harness"] == {"seed": 11}
    assert Config(path).run_config().nls.smallness == 0.0625


def test_record_value_rejects_invalid_values(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("nls:\n  smallness: 0.1\n", encoding="utf-8")
    with pytest.raises(InvalidParameterError):
        Config(path).record_value("nls", "contraction_factor", 2.0)
    assert yaml.safe_load(path.read_text(encoding="utf-8")) == {"nls": {"smallness": 0.1}}
