"""Tests du labyrinthe à masse ponctuelle: grilles, dynamique, murs, récompenses."""

import logging

import numpy as np
import pytest

from hlps.envs import (
    LAYOUTS,
    EnvState,
    MazeConfig,
    PointMaze,
    load_layout,
    parse_layout,
    print_all_layouts,
    reset,
    step,
    success_metric,
)
from hlps.errors import ConfigError


def _state(position, velocity=(0.0, 0.0), goal=(9.5, 9.5), t=0, horizon=100):
    return EnvState(np.array(position, dtype=float), np.array(velocity, dtype=float), t, horizon, np.array(goal, dtype=float))


def test_parse_layout_puts_first_line_on_top():
    layout = parse_layout("###\n#.#\n#..\n", "tiny")
    assert (layout.width, layout.height) == (3, 3)
    assert layout.is_free(np.array([2.5, 0.5]))
    assert not layout.is_free(np.array([2.5, 2.5]))
    assert not layout.is_free(np.array([-0.5, 1.5]))
    assert layout.free_cells().tolist() == [[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]]


@pytest.mark.parametrize("text, line", [("###\n##\n", 2), ("###\n#x#\n###\n", 2)])
def test_parse_layout_errors_name_the_row(text, line):
    with pytest.raises(ConfigError) as excinfo:
        parse_layout(text)
    assert excinfo.value.line == line
    assert f"line {line}" in str(excinfo.value)


def test_parse_layout_rejects_empty_or_walled():
    with pytest.raises(ConfigError):
        parse_layout("\n\n")
    with pytest.raises(ConfigError):
        parse_layout("##\n##\n")


def test_registered_layouts_load(tmp_path):
    for name, info in LAYOUTS.items():
        layout = load_layout(name)
        assert layout.is_free(np.array(info.eval_start))
        assert layout.is_free(np.array(info.eval_goal))
    u = load_layout("u_maze")
    assert not u.is_free(np.array([4.5, 5.5]))
    custom = tmp_path / "corridor.txt"
    custom.write_text("#####\n#...#\n#####\n")
    assert load_layout(str(custom)).name == "corridor"
    with pytest.raises(ConfigError):
        load_layout("labyrinth_of_minos")


def test_print_all_layouts(capsys):
    print_all_layouts()
    out = capsys.readouterr().out
    assert out.startswith("Registered maze layouts:")
    for name in LAYOUTS:
        assert name in out


@pytest.mark.parametrize("changes", [
    {"noise_sigma": -0.1},
    {"reward_mode": "shaped"},
    {"success_radius": 0.0},
    {"horizon": 0},
    {"goal_sampling": "corner"},
])
def test_maze_config_validation(changes):
    with pytest.raises(ConfigError):
        MazeConfig(**changes)


def test_noiseless_step_follows_damped_dynamics():
    """v = 0.8·0 + 0.2·1, x = 2.5 + 0.2·0.5."""
    config = MazeConfig(layout="open", noise_sigma=0.0)
    result = step(_state((2.5, 2.5)), [1.0, 0.0], config, np.random.default_rng(0))
    assert result.state.position == pytest.approx([2.6, 2.5], abs=1e-12)
    assert result.state.velocity == pytest.approx([0.2, 0.0])
    assert result.state.t == 1 and not result.done and not result.clamped


def test_wall_projection_zeroes_velocity_on_hit_axis():
    config = MazeConfig(layout="open", noise_sigma=0.0)
    result = step(_state((1.05, 5.5), velocity=(-1.0, 0.3)), [-1.0, 0.0], config, np.random.default_rng(0))
    assert result.state.position[0] == 1.0
    assert result.state.velocity[0] == 0.0
    assert result.state.velocity[1] == pytest.approx(0.24)
    assert result.state.position[1] == pytest.approx(5.5 + 0.24 * 0.5)


def test_noise_free_step_leaves_rng_untouched():
    config = MazeConfig(layout="open", noise_sigma=0.0)
    rng = np.random.default_rng(7)
    before = rng.bit_generator.state
    step(_state((2.5, 2.5)), [0.3, -0.4], config, rng)
    assert rng.bit_generator.state == before


def test_random_walk_never_enters_walls():
    config = MazeConfig(layout="four_rooms", noise_sigma=0.3, horizon=2000)
    layout = load_layout("four_rooms")
    rng = np.random.default_rng(1)
    state = reset(config, rng)
    for _ in range(2000):
        result = step(state, rng.uniform(-1, 1, size=2), config, rng)
        state = result.state
        assert layout.is_free(state.position)


def test_rewards_and_termination():
    dense = MazeConfig(layout="open", noise_sigma=0.0, reward_mode="dense")
    result = step(_state((2.5, 2.5), goal=(5.5, 6.5)), [0.0, 0.0], dense, np.random.default_rng(0))
    assert result.reward == pytest.approx(-5.0)
    assert not result.success

    sparse = MazeConfig(layout="open", noise_sigma=0.0)
    result = step(_state((5.5, 6.2), goal=(5.5, 6.5)), [0.0, 0.0], sparse, np.random.default_rng(0))
    assert result.reward == 1.0 and result.success and result.done

    short = MazeConfig(layout="open", noise_sigma=0.0, horizon=3)
    state = _state((2.5, 2.5), horizon=3)
    for t in range(3):
        result = step(state, [0.0, 0.0], short, np.random.default_rng(0))
        state = result.state
        assert result.reward == 0.0
        assert result.done == (t == 2)
    assert state.remaining == 0.0


def test_fixed_positions_must_be_free():
    good = MazeConfig(layout="u_maze", start_sampling="fixed", goal_sampling="fixed")
    state = reset(good, np.random.default_rng(0))
    assert state.position.tolist() == [2.5, 2.5]
    assert state.goal.tolist() == [2.5, 9.5]
    assert state.observation().shape == (7,)
    bad = MazeConfig(layout="u_maze", start_sampling="fixed", fixed_start=(4.5, 5.5))
    with pytest.raises(ConfigError):
        reset(bad, np.random.default_rng(0))


def test_random_reset_samples_free_space():
    config = MazeConfig(layout="u_maze")
    layout = load_layout("u_maze")
    rng = np.random.default_rng(2)
    for _ in range(200):
        state = reset(config, rng)
        assert layout.is_free(state.position) and layout.is_free(state.goal)


def test_success_metric_checks_any_visited_position():
    states = [_state((2.5, 2.5), goal=(3.0, 3.0)), _state((2.9, 3.1), goal=(3.0, 3.0))]
    assert success_metric(states, 0.5)
    assert not success_metric(states[:1], 0.5)
    assert not success_metric([], 0.5)


def test_point_maze_clamps_and_warns_once(caplog):
    env = PointMaze(MazeConfig(layout="open", noise_sigma=0.0), np.random.default_rng(0))
    with pytest.raises(RuntimeError):
        env.step([0.0, 0.0])
    env.reset()
    with caplog.at_level(logging.WARNING, logger="hlps.envs.maze"):
        first = env.step([3.0, 0.0])
        env.step([0.0, -2.0])
        env.step([0.5, 0.5])
    assert first.clamped
    assert env.clamped_actions == 2
    assert sum("clamped" in record.getMessage() for record in caplog.records) == 1


def test_position_noise_has_configured_std():
    """Agent immobile au centre de la salle ouverte: std du déplacement à 2 % de σ sur 10⁵ pas."""
    config = MazeConfig(layout="open", noise_sigma=0.1)
    rng = np.random.default_rng(8)
    start = _state((5.5, 5.5))
    moves = np.array([step(start, [0.0, 0.0], config, rng).state.position - start.position for _ in range(100_000)])
    assert moves.std(axis=0) == pytest.approx([0.1, 0.1], rel=0.02)


def test_same_seed_and_actions_replay_the_same_trajectory():
    config = MazeConfig(layout="u_maze", noise_sigma=0.15, horizon=300)
    actions = np.random.default_rng(9).uniform(-1.0, 1.0, size=(300, 2))
    runs = []
    for _ in range(2):
        env = PointMaze(config, np.random.default_rng(10))
        positions = [env.reset()[:2]]
        for action in actions:
            result = env.step(action)
            positions.append(result.state.position)
            if result.done:
                break
        runs.append(np.array(positions))
    assert np.array_equal(runs[0], runs[1])
