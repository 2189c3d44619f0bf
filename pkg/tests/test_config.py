"""Tests du chargement de configuration TOML et des surcharges pointées."""

import pytest

from hlps._paths import path_configs
from hlps.errors import ConfigError
from hlps.trainer import TrainConfig, apply_overrides, load_config, parse_override


def _write(tmp_path, text):
    path = tmp_path / "config.toml"
    path.write_text(text)
    return path


def test_shipped_configs_load():
    files = sorted(path_configs.glob("*.toml"))
    assert files
    for path in files:
        load_config(path)
    sparse = load_config(path_configs / "maze_sparse.toml")
    assert (sparse.k, sparse.m, sparse.T) == (50, 100, 3)
    assert sparse.env.layout == "u_maze" and sparse.env.reward_mode == "sparse"
    assert sparse.sac.hidden == 256


def test_defaults_without_file():
    config = load_config()
    assert config == TrainConfig()


@pytest.mark.parametrize("text, line", [
    ("[train]\nk = 5\nfoo = 1\n", 3),
    ("[env]\nlayout = \"open\"\n\nhorizon = 0\n", 4),
    ("[train]\nk = 50\neval_every = 10\n", 3),
    ("[model]\nwidth = 3\n", 1),
    ("seed = 3\n[train]\nk = 5\n", 1),
    ("[train]\nk = = 3\n", 2),
])
def test_errors_are_anchored_to_lines(tmp_path, text, line):
    with pytest.raises(ConfigError) as excinfo:
        load_config(_write(tmp_path, text))
    assert excinfo.value.line == line
    assert str(excinfo.value).startswith(f"line {line}:")


def test_wrong_type_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[train]\nk = \"five\"\n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


def test_overrides_take_precedence(tmp_path):
    path = _write(tmp_path, "[train]\nk = 20\neval_every = 100\n[env]\nlayout = \"u_maze\"\n")
    config = load_config(path, ["train.k=10", "env.layout=open", "env.fixed_goal=[1.5, 2.5]", "sac.learn_alpha=false"])
    assert config.k == 10
    assert config.eval_every == 100
    assert config.env.layout == "open"
    assert config.env.fixed_goal == (1.5, 2.5)
    assert config.sac.learn_alpha is False


@pytest.mark.parametrize("text", ["train.k", "k=3", "model.k=3", "train.=3", "train.a.b=1"])
def test_malformed_overrides(text):
    with pytest.raises(ConfigError):
        parse_override(text)


def test_override_values_are_toml_literals():
    assert parse_override("train.gp_lr=1e-4") == ("train", "gp_lr", 1e-4)
    assert parse_override("env.layout = four_rooms") == ("env", "layout", "four_rooms")
    assert apply_overrides({"train": {"k": 5}}, ["train.m=7"]) == {"train": {"k": 5, "m": 7}}


def test_unknown_override_key_is_rejected():
    with pytest.raises(ConfigError, match="train.kk"):
        load_config(None, ["train.kk=3"])


def test_dict_round_trip():
    config = load_config(path_configs / "four_rooms.toml", ["env.fixed_goal=[14.5, 14.5]"])
    assert TrainConfig.from_dict(config.to_dict()) == config


def test_configs_directory_is_the_source_tree_one():
    """path_configs pointe sur configs/ à côté de setup.py (arbre source ou installation éditable)."""
    assert (path_configs.parent / "setup.py").exists()
    names = {path.stem for path in path_configs.glob("*.toml")}
    assert {"maze_sparse", "maze_dense", "noise_0", "noise_0.15", "window_T1", "window_T5",
            "four_rooms", "transfer_target", "smoke"} <= names
