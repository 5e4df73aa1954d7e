"""Episode loop: environment adapter, training driver, greedy evaluation.

Everything downstream of the seed is deterministic: network init, epsilon
draws, replay sampling and per-episode layouts all derive from one seed
sequence, so two runs with the same seed produce identical logs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..renderer import (
    FEATURE_DIM,
    RenderConfig,
    feature_observation,
    init_stack,
    push_frame,
    render,
    to_input,
)
from ..sim_env import (
    Action,
    EnvConfig,
    Layout,
    SceneState,
    TerminalReason,
    reset,
    step,
)
from .learner import (
    ReplayBuffer,
    TrainConfig,
    Transition,
    epsilon_at,
    make_optimizer,
    select_action,
    sync_target,
    train_step,
)
from .network import (
    QNetwork,
    default_feature_topology,
    default_vision_topology,
)

__all__ = [
    "CoarseEnv",
    "EpisodeStats",
    "GreedyPolicy",
    "TrainResult",
    "build_network",
    "evaluate",
    "format_episode_record",
    "train",
]

# Simulated wall clock used in training logs: one coarse step per nominal
# 30 Hz tick. Keeps log bytes reproducible across runs.
_MS_PER_STEP = 1000.0 / 30.0


class CoarseEnv:
    """Couples the scene with observation building for the learner.

    obs_mode 'feature' returns the low-dimensional geometric observation;
    'vision' renders, stacks four frames and scales to [0, 1].
    """

    def __init__(
        self,
        env_config: EnvConfig,
        render_config: RenderConfig | None = None,
        obs_mode: str = "feature",
        layout: Layout = Layout.RANDOM_UNIFORM,
    ) -> None:
        self.env_config = env_config
        self.render_config = render_config or RenderConfig()
        self.obs_mode = obs_mode
        self.layout = layout
        self._scene: SceneState | None = None
        self._stack = None

    @property
    def scene(self) -> SceneState:
        if self._scene is None:
            raise RuntimeError("call reset() before reading the scene")
        return self._scene

    def observation_shape(self) -> tuple[int, ...]:
        if self.obs_mode == "feature":
            return (FEATURE_DIM,)
        return (4, self.render_config.height, self.render_config.width)

    def _observe(self) -> np.ndarray:
        if self.obs_mode == "feature":
            return feature_observation(self.scene, self.env_config)
        frame = render(self.scene, self.render_config)
        if self._stack is None:
            self._stack = init_stack(frame)
        else:
            self._stack = push_frame(self._stack, frame)
        return to_input(self._stack)

    def reset(self, seed: int, layout: Layout | None = None) -> np.ndarray:
        self._scene = reset(self.env_config, seed=seed, layout=layout or self.layout)
        self._stack = None
        return self._observe()

    def step(self, action_index: int):
        action = Action.from_index(action_index, self.env_config)
        outcome = step(self.scene, action, self.env_config)
        self._scene = outcome.next_state
        return self._observe(), outcome.reward, outcome.terminal, outcome


def build_network(
    obs_shape: tuple[int, ...],
    seed,
    n_actions: int = Action.N_ACTIONS,
) -> QNetwork:
    if len(obs_shape) == 1:
        return QNetwork(obs_shape, default_feature_topology(n_actions), seed=seed)
    return QNetwork(obs_shape, default_vision_topology(n_actions), seed=seed)


class GreedyPolicy:
    """Scene-to-action policy around a trained network (epsilon = 0).

    Vision networks keep a rolling frame stack internally; a scene with
    tick 0 restarts it, matching episode boundaries.
    """

    def __init__(self, net: QNetwork, env_config: EnvConfig,
                 render_config: RenderConfig | None = None) -> None:
        self.net = net
        self.env_config = env_config
        self.render_config = render_config or RenderConfig()
        self.vision = len(net.input_shape) == 3
        self._stack = None

    def observe(self, scene: SceneState) -> np.ndarray:
        if not self.vision:
            return feature_observation(scene, self.env_config)
        frame = render(scene, self.render_config)
        if self._stack is None or scene.tick == 0:
            self._stack = init_stack(frame)
        else:
            self._stack = push_frame(self._stack, frame)
        return to_input(self._stack)

    def __call__(self, scene: SceneState) -> int:
        return int(np.argmax(self.net.forward(self.observe(scene))))


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    discounted_return: float
    undiscounted_return: float
    length: int
    epsilon: float
    wall_ms: int
    success: bool


@dataclass
class TrainResult:
    net: QNetwork
    target: QNetwork
    episodes: list[EpisodeStats] = field(default_factory=list)
    global_steps: int = 0
    elapsed_s: float = 0.0
    # Snapshot taken at the best trailing-window success seen during the
    # run (ties broken by shorter mean episode length); what checkpoints
    # should persist.
    best_theta: np.ndarray | None = None
    best_target_theta: np.ndarray | None = None
    best_episode: int = 0

    def best_networks(self) -> tuple[QNetwork, QNetwork]:
        net = self.net.clone_topology(seed=0)
        target = self.target.clone_topology(seed=0)
        net.theta = (self.best_theta if self.best_theta is not None
                     else self.net.theta).copy()
        target.theta = (self.best_target_theta if self.best_target_theta is not None
                        else self.target.theta).copy()
        return net, target


def format_episode_record(e: EpisodeStats) -> str:
    return (
        f"episode={e.episode} return={e.discounted_return!r} "
        f"undiscounted={e.undiscounted_return!r} length={e.length} "
        f"epsilon={e.epsilon!r} wall_ms={e.wall_ms}"
    )


def train(
    config: TrainConfig,
    env_config: EnvConfig | None = None,
    render_config: RenderConfig | None = None,
    log_lines: list[str] | None = None,
    episode_hook=None,
) -> TrainResult:
    """Run the full training loop and return the trained networks.

    Per step: act epsilon-greedily, store the transition, run one update
    once the replay holds a batch, and sync the target on its period. The
    target network starts from its own initialization and is only ever
    written by the periodic sync.
    """
    env_config = env_config or EnvConfig()
    env = CoarseEnv(env_config, render_config, obs_mode=config.obs_mode)

    ss = np.random.SeedSequence(config.seed)
    net_ss, target_ss, explore_ss, env_ss = ss.spawn(4)
    net = build_network(env.observation_shape(), seed=net_ss)
    target = build_network(env.observation_shape(), seed=target_ss)
    rng = np.random.default_rng(explore_ss)
    env_seeds = np.random.default_rng(env_ss)

    buffer = ReplayBuffer(config.replay_capacity)
    optimizer = make_optimizer(config)
    result = TrainResult(net=net, target=target)
    t0 = time.perf_counter()
    global_step = 0
    best_score = (-1.0, 0.0)

    for episode in range(1, config.max_episodes + 1):
        obs = env.reset(seed=int(env_seeds.integers(0, 2**31 - 1)))
        discounted = 0.0
        undiscounted = 0.0
        disc = 1.0
        length = 0
        success = False
        epsilon = epsilon_at(global_step, config)
        while True:
            epsilon = epsilon_at(global_step, config)
            a = select_action(net, obs, epsilon, rng)
            obs_next, r, terminal, outcome = env.step(a)
            # Bootstrap through the step-budget cutoff: only goal attainment
            # is a value-zero terminal, truncation is not.
            reached = outcome.terminal_reason is TerminalReason.REACHED_AND_ALIGNED
            buffer.push(Transition(s=obs, a=a, r=r * config.reward_scale,
                                   s_next=obs_next, terminal=reached))
            obs = obs_next
            discounted += disc * r
            undiscounted += r
            disc *= config.gamma
            length += 1
            global_step += 1
            if len(buffer) >= config.batch_size:
                train_step(net, target, buffer.sample(rng, config.batch_size),
                           config, optimizer)
            if global_step % config.target_sync_period == 0:
                sync_target(net, target)
            if terminal:
                success = outcome.terminal_reason is TerminalReason.REACHED_AND_ALIGNED
                break
        stats = EpisodeStats(
            episode=episode,
            discounted_return=discounted,
            undiscounted_return=undiscounted,
            length=length,
            epsilon=epsilon,
            wall_ms=int(length * _MS_PER_STEP),
            success=success,
        )
        result.episodes.append(stats)
        window = result.episodes[-20:]
        score = (
            sum(e.success for e in window) / len(window),
            -sum(e.length for e in window) / len(window),
        )
        if len(window) == 20 and score > best_score:
            best_score = score
            result.best_theta = net.theta.copy()
            result.best_target_theta = target.theta.copy()
            result.best_episode = episode
        if log_lines is not None:
            log_lines.append(format_episode_record(stats))
        if episode_hook is not None:
            episode_hook(stats)

    result.global_steps = global_step
    result.elapsed_s = time.perf_counter() - t0
    return result


def evaluate(
    net: QNetwork,
    env_config: EnvConfig,
    layout: Layout,
    episodes: int,
    seed: int,
    obs_mode: str = "feature",
    render_config: RenderConfig | None = None,
    step_log: list[str] | None = None,
) -> tuple[float, float, list[int]]:
    """Greedy rollouts; returns (success_rate, mean_length, lengths).

    With ``step_log`` supplied, appends one episode-log record per step
    (tick, pose, action, reward, d, dtheta, terminal flag).
    """
    from ..sim_env import format_step_record

    env = CoarseEnv(env_config, render_config, obs_mode=obs_mode, layout=layout)
    seeds = np.random.default_rng(seed)
    rng = np.random.default_rng(0)
    successes = 0
    lengths: list[int] = []
    for episode in range(episodes):
        obs = env.reset(seed=int(seeds.integers(0, 2**31 - 1)))
        if step_log is not None:
            step_log.append(f"episode {episode}")
        while True:
            a = select_action(net, obs, 0.0, rng)
            obs, _, terminal, outcome = env.step(a)
            if step_log is not None:
                step_log.append(format_step_record(
                    env.scene.tick, env.scene, a, outcome))
            if terminal:
                lengths.append(env.scene.tick)
                if outcome.terminal_reason is TerminalReason.REACHED_AND_ALIGNED:
                    successes += 1
                break
    return successes / episodes, float(np.mean(lengths)), lengths
