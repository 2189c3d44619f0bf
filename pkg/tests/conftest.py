"""Fixtures partagées: configurations minuscules et marqueur ``slow``."""

import os

import pytest

from hlps.envs import MazeConfig
from hlps.rl import SacConfig
from hlps.trainer import TrainConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long acceptance run, enabled with HLPS_RUN_SLOW=1")


def pytest_collection_modifyitems(config, items):
    if os.getenv("HLPS_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set HLPS_RUN_SLOW=1 to run the long acceptance tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def make_tiny_config(**changes) -> TrainConfig:
    """Configuration minuscule: réseaux de largeur 8, horizon 40, lots de 8."""
    env = changes.pop("env", MazeConfig(layout="open", horizon=40))
    sac = changes.pop("sac", SacConfig(hidden=8, batch_size=8))
    values = dict(
        seed=0,
        total_steps=200,
        k=10,
        m=20,
        T=2,
        eval_every=100,
        eval_episodes=1,
        warmup_steps=0,
        buffer_capacity=5000,
        repr_batch_size=8,
        hyper_batch_size=4,
        encoder_hidden=8,
    )
    values.update(changes)
    return TrainConfig(env=env, sac=sac, **values)


@pytest.fixture
def tiny_config() -> TrainConfig:
    return make_tiny_config()


TINY_TOML = """\
[train]
seed = 0
total_steps = 60
k = 10
m = 20
T = 2
eval_every = 30
eval_episodes = 1
warmup_steps = 10
buffer_capacity = 500
repr_batch_size = 8
hyper_batch_size = 4
encoder_hidden = 8

[env]
layout = "open"
horizon = 30

[sac]
hidden = 8
batch_size = 8
"""


@pytest.fixture
def tiny_toml(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_TOML)
    return path


@pytest.fixture(autouse=True)
def _out_dir(tmp_path, monkeypatch):
    """Aucune sortie hors du répertoire temporaire du test."""
    monkeypatch.setenv("HLPS_OUT_DIR", str(tmp_path / "runs"))
