import pytest

from src.config.settings import SimConfig, load_config, read_config_file
from src.domain.postprocess import LambdaMode
from src.domain.topology import PlacementPreset
from src.exceptions import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    for name in ("QKDNET_ROUNDS", "QKDNET_PRESET", "QKDNET_POLICY"):
        monkeypatch.delenv(name, raising=False)
    # no stray .env file from the working directory
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "sim.yaml"
    path.write_text("preset: diag-2-6-4\nrounds: 300\npolicy: Dynamic\ndecoherence: 0.02\n", encoding="utf-8")
    return path


class TestDefaults:
    def test_values(self):
        cfg = load_config()
        assert cfg.lattice_size == 7
        assert cfg.preset is PlacementPreset.ONE_TN_IDEAL
        assert cfg.alpha == 0.15
        assert cfg.bsm_success == 0.85
        assert cfg.rounds == 1_000_000
        assert cfg.policy == "static"
        assert (cfg.sigma, cfg.delta, cfg.theta) == (0.15, 0.05, 0.75)
        assert cfg.cad_lambda == "worst-case"

    def test_derived_objects(self):
        cfg = load_config(overrides={"success_prob": 0.5, "cad": True, "cad_lambda": "werner"})
        assert cfg.link_model().P == 0.5
        assert cfg.distillation_options().lambda_mode is LambdaMode.WERNER
        assert cfg.balancer_params().theta == 0.75
        assert len(cfg.topology().trusted_nodes) == 1


class TestSources:
    def test_file_values(self, config_file):
        cfg = load_config(config_file)
        assert cfg.preset is PlacementPreset.DIAG_2_6_4
        assert cfg.rounds == 300
        assert cfg.policy == "dynamic"

    def test_flags_beat_file(self, config_file):
        cfg = load_config(config_file, {"rounds": 50, "policy": None})
        assert cfg.rounds == 50
        assert cfg.policy == "dynamic"

    def test_file_beats_environment(self, config_file, monkeypatch):
        monkeypatch.setenv("QKDNET_ROUNDS", "999")
        assert load_config(config_file).rounds == 300
        assert load_config().rounds == 999

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        assert read_config_file(path) == {}

    def test_link_overrides(self, tmp_path):
        path = tmp_path / "links.yaml"
        path.write_text(
            "preset: no-tn\nlink_overrides:\n  - {a: [0, 0], b: [0, 1], length_km: 3.0}\n",
            encoding="utf-8",
        )
        t = load_config(path).topology()
        assert t.links[t.link_between((0, 0), (0, 1))].length_km == 3.0


class TestValidation:
    @pytest.mark.parametrize("overrides, field", [
        ({"rounds": 0}, "rounds"),
        ({"preset": "3tn-somewhere"}, "preset"),
        ({"decoherence": 1.5}, "decoherence"),
        ({"theta": 1.0}, "theta"),
        ({"policy": "flooding"}, "policy"),
        ({"cad_lambda": "bell"}, "cad_lambda"),
    ])
    def test_out_of_range(self, overrides, field):
        with pytest.raises(ConfigError) as e:
            load_config(overrides=overrides)
        assert e.value.field == field

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "typo.yaml"
        path.write_text("roundz: 10\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("rounds: [1, 2\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="malformed"):
            load_config(path)

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.yaml")


class TestWithOverrides:
    def test_copy_is_validated(self):
        cfg = SimConfig(rounds=10)
        copy = cfg.with_overrides(decoherence=0.01, policy="dynamic")
        assert copy.decoherence == 0.01
        assert copy.policy == "dynamic"
        assert cfg.policy == "static"
        with pytest.raises(ConfigError):
            cfg.with_overrides(rounds=-1)

    def test_echo_is_plain_data(self):
        echo = SimConfig(preset="2tn-corner").echo()
        assert echo["preset"] == "2tn-corner"
        assert echo["rounds"] == 1_000_000
