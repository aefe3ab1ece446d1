import orjson
import pytest

from src.client.config import Config, ExperimentConfig, TrainingConfig
from src.client.errors import ConfigError


def test_harness_settings_load():
    assert Config.get("harness")["workers"] >= 1
    assert Config.get("noise")["presets"]["L3"] == 0.1
    assert Config.get("missing", "fallback") == "fallback"


def test_defaults():
    config = ExperimentConfig.from_mapping({})
    assert config.trials == 100
    assert config.seed == 0
    assert config.levels == (0.0, 0.02, 0.05, 0.1, 0.2, 0.3)
    assert config.solver.lam == 0.05
    assert config.solver.gamma is None
    assert config.solver.step_rule == "adaptive"
    assert config.denoise.lam_l1 == 0.4
    assert config.training.lr_dictionary == pytest.approx(0.5 * 0.02)
    assert config.problem.magnitude == (0.5, 1.5)
    assert config.influence.scale == 0.05


def test_overrides():
    config = ExperimentConfig.from_mapping(
        {
            "trials": 3,
            "seed": 7,
            "problem": {"H": 5, "W": 4},
            "solver": {"lambda": 0.2, "gamma": 0.01, "step-rule": "guarded"},
            "noise": {"levels": ["L5", 0.0]},
        }
    )
    assert (config.trials, config.seed) == (3, 7)
    assert (config.problem.H, config.problem.W, config.problem.D) == (5, 4, 4)
    assert (config.solver.lam, config.solver.gamma, config.solver.step_rule) == (0.2, 0.01, "guarded")
    assert config.levels == (0.3, 0.0)


def test_single_rate_wins_over_levels():
    config = ExperimentConfig.from_mapping({"noise": {"rate": "L2", "levels": [0.0, 0.1]}})
    assert config.levels == (0.05,)


def test_hyphenated_section_keys():
    config = ExperimentConfig.from_mapping(
        {"training": {"lr-dictionary-scale": 0.0, "learn-beta": True, "lambda": 0.1, "epochs": 2}}
    )
    assert config.training == TrainingConfig(lr_dictionary_scale=0.0, learn_beta=True, lam=0.1, epochs=2)
    assert ExperimentConfig.from_mapping({"sweep": {"lambdas": [0, 1]}}).sweep.lambdas == (0.0, 1.0)


@pytest.mark.parametrize(
    "raw",
    [
        [],
        {"trials": 0},
        {"trials": 2.5},
        {"seed": "zero"},
        {"extra": 1},
        {"solver": {"alpha": 1}},
        {"solver": []},
        {"solver": {"beta": 2.0}},
        {"solver": {"lambda": True}},
        {"problem": {"k": 4}},
        {"noise": {"levels": ["L7"]}},
        {"noise": {"levels": []}},
        {"training": {"learn-beta": 1}},
        {"training": {"lr": -0.1}},
        {"attack": {"budgets": [-1.0]}},
        {"sweep": {"lambdas": [0.5, 0.1]}},
        {"denoise": {"lambda-l1": -1.0}},
        {"training": {"lr-dictionary": 0.01}},
        {"influence": {"ts": [0.5]}},
    ],
)
def test_invalid_configs(raw):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_mapping(raw)
    assert info.value.exit_code == 2


def test_zero_learning_rate_is_allowed():
    assert ExperimentConfig.from_mapping({"training": {"lr": 0.0}}).training.lr == 0.0


def test_zero_learning_rate_freezes_the_dictionary():
    training = ExperimentConfig.from_mapping({"training": {"lr": 0.0}}).training
    assert training.lr_dictionary == 0.0
    assert TrainingConfig(lr=0.2, lr_dictionary_scale=0.5).lr_dictionary == pytest.approx(0.1)


def test_denoise_lambdas():
    denoise = ExperimentConfig.from_mapping({"denoise": {"lambda-l1": 0.3}}).denoise
    assert denoise.lam_l1 == 0.3
    assert denoise.lam_for(0.05, 1.0) == 0.05
    assert denoise.lam_for(0.05, 0.0) == 0.3
    assert denoise.lam_for(0.05, 0.5) == pytest.approx(0.175)


def test_from_file(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_bytes(orjson.dumps({"trials": 2, "solver": {"beta": 1.0}}))
    config = ExperimentConfig.from_file(path)
    assert config.trials == 2 and config.solver.beta == 1.0

    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{trials: 2")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(broken)


def test_with_seed_and_canonical():
    config = ExperimentConfig.from_mapping({"seed": 1})
    reseeded = config.with_seed(9)
    assert reseeded.seed == 9 and config.seed == 1
    data = reseeded.canonical()
    assert data["seed"] == 9
    assert data["solver"]["lam"] == 0.05
    assert data["problem"]["magnitude"] == [0.5, 1.5]
    assert config.canonical() == ExperimentConfig.from_mapping({"seed": 1}).canonical()
