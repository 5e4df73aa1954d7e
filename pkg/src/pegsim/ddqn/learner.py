"""Double-Q learning machinery: replay, behaviour policy, targets, updates.

The bootstrap target decouples action selection from evaluation: the online
network picks the best next action and the target network scores it. Targets
are constants during backprop (semi-gradient regression), and the update
only ever touches the online parameters.

Loss convention: half mean squared error, loss = sum((q - y)^2) / (2B), so
with batch size 1 and a one-hot linear network the update collapses to the
tabular rule Q(s, a) += lr * (y - Q(s, a)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import QNetwork

__all__ = [
    "AdamState",
    "ReplayBuffer",
    "SgdState",
    "Transition",
    "TrainConfig",
    "double_q_target",
    "epsilon_at",
    "make_optimizer",
    "select_action",
    "sync_target",
    "train_step",
]


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions with uniform sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._cursor] = t
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, batch_size: int) -> list[Transition]:
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]

    def snapshot(self) -> list[Transition]:
        """Contents in insertion order, oldest first."""
        if len(self._items) < self.capacity:
            return list(self._items)
        return self._items[self._cursor:] + self._items[:self._cursor]

    def __len__(self) -> int:
        return len(self._items)


@dataclass
class TrainConfig:
    """Training hyperparameters; every field has a desk-scale default."""

    gamma: float = 0.95
    learning_rate: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 10_000
    epsilon_start: float = 1.0
    epsilon_min: float = 0.05
    epsilon_decay_steps: int = 20_000
    target_sync_period: int = 500
    max_episodes: int = 400
    seed: int = 0
    optimizer: str = "adam"
    momentum: float = 0.0
    loss: str = "squared"
    huber_delta: float = 1.0
    obs_mode: str = "feature"
    # Rewards are multiplied by this before entering the replay buffer. A
    # positive scale leaves the optimal policy untouched and keeps value
    # magnitudes near unity, where the default step size can fit them
    # within a desk-scale episode budget. Logged returns stay unscaled.
    reward_scale: float = 0.01

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if not (0.0 <= self.epsilon_min <= self.epsilon_start <= 1.0):
            raise ValueError("require 0 <= epsilon_min <= epsilon_start <= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")
        if self.loss not in ("squared", "huber"):
            raise ValueError("loss must be 'squared' or 'huber'")
        if self.obs_mode not in ("feature", "vision"):
            raise ValueError("obs_mode must be 'feature' or 'vision'")


def epsilon_at(step: int, config: TrainConfig) -> float:
    """Linear decay from epsilon_start to epsilon_min, then constant."""
    if step < 0:
        raise ValueError("step must be non-negative")
    if config.epsilon_decay_steps <= 0 or step >= config.epsilon_decay_steps:
        return config.epsilon_min
    frac = step / config.epsilon_decay_steps
    return config.epsilon_start + (config.epsilon_min - config.epsilon_start) * frac


def select_action(
    net: QNetwork,
    obs: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over the network's action values; ties pick the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(0, net.n_actions))
    return int(np.argmax(net.forward(obs)))


def double_q_target(
    t: Transition,
    net: QNetwork,
    target: QNetwork,
    gamma: float,
) -> float:
    """Bootstrap value: r, or r + gamma * Q_target(s', argmax_a Q_online(s', a))."""
    if t.terminal:
        return float(t.r)
    a_star = int(np.argmax(net.forward(t.s_next)))
    return float(t.r + gamma * float(target.forward(t.s_next)[a_star]))


def _batch_targets(
    batch: list[Transition],
    net: QNetwork,
    target: QNetwork,
    gamma: float,
) -> np.ndarray:
    rs = np.array([t.r for t in batch], dtype=np.float64)
    ys = rs.copy()
    live = [i for i, t in enumerate(batch) if not t.terminal]
    if live:
        s_next = np.stack([batch[i].s_next for i in live])
        online_next = net.forward(s_next)
        a_star = np.argmax(online_next, axis=1)
        target_next = target.forward(s_next)
        boot = target_next[np.arange(len(live)), a_star]
        ys[live] = rs[live] + gamma * boot.astype(np.float64)
    return ys


def sync_target(net: QNetwork, target: QNetwork) -> None:
    """Copy online parameters into the target network, exactly."""
    if net.theta.shape != target.theta.shape:
        raise ValueError("online and target parameter shapes differ")
    target.theta[:] = net.theta


@dataclass
class SgdState:
    learning_rate: float
    momentum: float = 0.0
    velocity: np.ndarray | None = None

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        if self.momentum == 0.0:
            theta -= (self.learning_rate * grad).astype(theta.dtype)
            return
        if self.velocity is None:
            self.velocity = np.zeros_like(theta, dtype=np.float64)
        self.velocity = self.momentum * self.velocity + grad
        theta -= (self.learning_rate * self.velocity).astype(theta.dtype)


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(theta, dtype=np.float64)
            self.v = np.zeros_like(theta, dtype=np.float64)
        self.t += 1
        g = grad.astype(np.float64)
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        theta -= (self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)).astype(theta.dtype)


def make_optimizer(config: TrainConfig) -> SgdState | AdamState:
    if config.optimizer == "adam":
        return AdamState(learning_rate=config.learning_rate)
    return SgdState(learning_rate=config.learning_rate, momentum=config.momentum)


def train_step(
    net: QNetwork,
    target: QNetwork,
    batch: list[Transition],
    config: TrainConfig,
    optimizer: SgdState | AdamState | None = None,
) -> float:
    """One regression step of Q(s, a) toward the double-Q target.

    Returns the pre-update loss. The target network is read, never written.
    """
    if not batch:
        raise ValueError("train_step requires a non-empty batch")
    if optimizer is None:
        optimizer = SgdState(learning_rate=config.learning_rate, momentum=config.momentum)

    ys = _batch_targets(batch, net, target, config.gamma)
    s = np.stack([t.s for t in batch])
    actions = np.array([t.a for t in batch], dtype=np.intp)
    out, cache = net.forward_cached(s)
    rows = np.arange(len(batch))
    q = out[rows, actions].astype(np.float64)
    err = q - ys
    n = float(len(batch))

    if config.loss == "squared":
        loss = float(np.sum(err * err) / (2.0 * n))
        derr = err / n
    else:
        delta = config.huber_delta
        small = np.abs(err) <= delta
        loss = float(
            np.sum(np.where(small, 0.5 * err * err, delta * (np.abs(err) - 0.5 * delta))) / n
        )
        derr = np.clip(err, -delta, delta) / n

    dout = np.zeros_like(out)
    dout[rows, actions] = derr.astype(dout.dtype)
    grad = net.backward(cache, dout)
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    optimizer.step(net.theta, grad)
    if not np.all(np.isfinite(net.theta)):
        raise FloatingPointError("non-finite parameters after update")
    return loss
