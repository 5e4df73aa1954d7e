import importlib

import numpy as np
import pytest

from pegsim.ddqn import TrainConfig, evaluate, train
from pegsim.ddqn.train import CoarseEnv, EpisodeStats, format_episode_record
from pegsim.sim_env import EnvConfig, Layout, TerminalReason

train_module = importlib.import_module("pegsim.ddqn.train")


class TwoStepStubEnv:
    """Environment stub: rewards [1, 1], terminal on the second step."""

    def __init__(self, *args, **kwargs):
        self._steps = 0

    def observation_shape(self):
        return (3,)

    def reset(self, seed, layout=None):
        self._steps = 0
        return np.zeros(3, dtype=np.float32)

    def step(self, action_index):
        self._steps += 1
        terminal = self._steps >= 2

        class Outcome:
            terminal_reason = (TerminalReason.REACHED_AND_ALIGNED if terminal
                               else TerminalReason.NONE)

        return np.zeros(3, dtype=np.float32), 1.0, terminal, Outcome()


def test_discounted_return_hand_sum(monkeypatch):
    # Two steps of reward 1 at gamma 0.95: 1 + 0.95 * 1 = 1.95.
    monkeypatch.setattr(train_module, "CoarseEnv", TwoStepStubEnv)
    cfg = TrainConfig(seed=0, max_episodes=1, batch_size=2)
    result = train_module.train(cfg)
    stats = result.episodes[0]
    assert stats.discounted_return == pytest.approx(1.95)
    assert stats.undiscounted_return == pytest.approx(2.0)
    assert stats.length == 2
    assert stats.success


def test_training_is_seed_deterministic():
    cfg = TrainConfig(seed=7, max_episodes=4)
    a = train(cfg)
    b = train(cfg)
    assert [e.discounted_return for e in a.episodes] == \
           [e.discounted_return for e in b.episodes]
    assert [e.length for e in a.episodes] == [e.length for e in b.episodes]
    assert np.array_equal(a.net.theta, b.net.theta)


def test_different_seeds_differ():
    a = train(TrainConfig(seed=1, max_episodes=3))
    b = train(TrainConfig(seed=2, max_episodes=3))
    assert [e.length for e in a.episodes] != [e.length for e in b.episodes] or \
        not np.array_equal(a.net.theta, b.net.theta)


def test_episode_record_format_is_stable():
    stats = EpisodeStats(episode=3, discounted_return=1.25,
                         undiscounted_return=2.5, length=4, epsilon=0.5,
                         wall_ms=133, success=True)
    line = format_episode_record(stats)
    assert line == ("episode=3 return=1.25 undiscounted=2.5 length=4 "
                    "epsilon=0.5 wall_ms=133")


def test_wall_ms_is_simulated_clock():
    result = train(TrainConfig(seed=3, max_episodes=2))
    for e in result.episodes:
        assert e.wall_ms == int(e.length * 1000 / 30)


def test_target_network_not_synced_at_start():
    result = train(TrainConfig(seed=5, max_episodes=1, target_sync_period=10**9))
    assert not np.array_equal(result.net.theta, result.target.theta)


def test_vision_mode_trains_and_stays_finite():
    env = EnvConfig(max_steps=10)
    cfg = TrainConfig(seed=2, max_episodes=2, obs_mode="vision",
                      batch_size=8, replay_capacity=64)
    result = train(cfg, env_config=env)
    assert len(result.episodes) == 2
    assert np.all(np.isfinite(result.net.theta))
    assert result.net.input_shape == (4, 84, 84)


def test_evaluate_reports_rates_in_range():
    result = train(TrainConfig(seed=4, max_episodes=3))
    rate, mean_len, lengths = evaluate(result.net, EnvConfig(), Layout.EVAL_A,
                                       episodes=3, seed=0)
    assert 0.0 <= rate <= 1.0
    assert len(lengths) == 3
    assert mean_len == pytest.approx(float(np.mean(lengths)))


def test_coarse_env_feature_shape_and_vision_shape():
    env = CoarseEnv(EnvConfig(), obs_mode="feature")
    assert env.reset(seed=0).shape == env.observation_shape()
    venv = CoarseEnv(EnvConfig(), obs_mode="vision")
    obs = venv.reset(seed=0)
    assert obs.shape == (4, 84, 84)
    assert obs.dtype == np.float32
    assert 0.0 <= obs.min() and obs.max() <= 1.0
