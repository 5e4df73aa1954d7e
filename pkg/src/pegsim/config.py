"""INI-style configuration covering the simulator, renderer, trainer and
session server.

Sections and keys mirror the config dataclasses one to one; unknown keys
are rejected so typos fail loudly. ``write_default_config`` emits a fully
commented reference file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .arbiter import ArbiterConfig
from .ddqn import TrainConfig
from .renderer import RenderConfig
from .sim_env import AngularStep, EnvConfig, RewardAngleUnit, RewardDistanceUnit, Workspace

__all__ = ["AppConfig", "ConfigError", "load_config", "write_default_config"]


class ConfigError(ValueError):
    pass


@dataclass
class GatewayConfig:
    port: int = 7777
    host: str = "127.0.0.1"
    tick_rate_hz: float = 30.0


@dataclass
class AppConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    arbiter: ArbiterConfig = field(default_factory=ArbiterConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)


_ENV_KEYS = {
    "d_threshold": float,
    "gamma": float,
    "max_steps": int,
    "grasp_radius": float,
    "align_tolerance": float,
    "constant_height": float,
    "dx_step": float,
    "dy_step": float,
    "peg_side": float,
    "start_x": float,
    "start_y": float,
    "start_roll": float,
    "angular_step": str,
    "reward_distance_unit": str,
    "reward_angle_unit": str,
}
_WORKSPACE_KEYS = {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"}
_RENDER_KEYS = {
    "roi_x_min": float, "roi_x_max": float, "roi_y_min": float, "roi_y_max": float,
    "width": int, "height": int, "background": int, "peg_intensity": int,
    "target_intensity": int, "gripper_intensity": int,
    "jaw_length": float, "jaw_width": float, "jaw_gap": float,
}
_TRAIN_KEYS = {
    "gamma": float, "learning_rate": float, "batch_size": int,
    "replay_capacity": int, "epsilon_start": float, "epsilon_min": float,
    "epsilon_decay_steps": int, "target_sync_period": int, "max_episodes": int,
    "seed": int, "optimizer": str, "momentum": float, "loss": str,
    "huber_delta": float, "obs_mode": str, "reward_scale": float,
}
_ARBITER_KEYS = {
    "deadband_mm": float, "deadband_rad": float, "cap_mm": float,
    "cap_rad": float, "coarse_budget": int, "tick_rate_hz": float,
}
_GATEWAY_KEYS = {"port": int, "host": str, "tick_rate_hz": float}


def _apply(section, keys, raw: dict) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in keys:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        caster = keys[key]
        try:
            out[key] = caster(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {value!r}") from exc
    return out


def load_config(path: str) -> AppConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    known = {"env", "workspace", "render", "train", "arbiter", "gateway"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")

    env_kwargs = _apply("env", _ENV_KEYS, dict(parser.items("env")) if parser.has_section("env") else {})
    if "angular_step" in env_kwargs:
        env_kwargs["angular_step"] = AngularStep(env_kwargs["angular_step"])
    if "reward_distance_unit" in env_kwargs:
        env_kwargs["reward_distance_unit"] = RewardDistanceUnit(env_kwargs["reward_distance_unit"])
    if "reward_angle_unit" in env_kwargs:
        env_kwargs["reward_angle_unit"] = RewardAngleUnit(env_kwargs["reward_angle_unit"])
    if parser.has_section("workspace"):
        ws_raw = {k: float(v) for k, v in parser.items("workspace") if k in _WORKSPACE_KEYS}
        unknown = set(dict(parser.items("workspace"))) - _WORKSPACE_KEYS
        if unknown:
            raise ConfigError(f"unknown key(s) in [workspace]: {sorted(unknown)}")
        env_kwargs["workspace"] = Workspace(**ws_raw)

    render_kwargs = _apply("render", _RENDER_KEYS, dict(parser.items("render")) if parser.has_section("render") else {})
    train_kwargs = _apply("train", _TRAIN_KEYS, dict(parser.items("train")) if parser.has_section("train") else {})
    arb_kwargs = _apply("arbiter", _ARBITER_KEYS, dict(parser.items("arbiter")) if parser.has_section("arbiter") else {})
    gw_kwargs = _apply("gateway", _GATEWAY_KEYS, dict(parser.items("gateway")) if parser.has_section("gateway") else {})

    try:
        return AppConfig(
            env=EnvConfig(**env_kwargs),
            render=RenderConfig(**render_kwargs),
            train=TrainConfig(**train_kwargs),
            arbiter=ArbiterConfig(**arb_kwargs),
            gateway=GatewayConfig(**gw_kwargs),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


_DEFAULT_TEMPLATE = """\
# pegsim configuration. Every key is optional; defaults shown.

[env]
# distance threshold separating the two reward branches, mm
d_threshold = 10.0
# discount factor
gamma = 0.95
# coarse steps per episode before truncation
max_steps = 200
# jaw-closing capture radius, mm
grasp_radius = 5.0
# orientation tolerance for coarse-goal attainment, rad (~5 degrees)
align_tolerance = 0.0873
# fixed gripper height during coarse control, mm
constant_height = 10.0
# coarse action increments, mm per step
dx_step = 6.0
dy_step = 8.0
# square peg head side, mm
peg_side = 8.0
# gripper start pose
start_x = 80.0
start_y = 20.0
start_roll = 0.0
# rotation increment reading: degrees10 (10 deg) or radians10 (literal 10 rad)
angular_step = degrees10
# distance unit inside the reward: mm or m
reward_distance_unit = mm
# angle unit inside the reward: deg or rad
reward_angle_unit = deg

[workspace]
x_min = 0.0
x_max = 160.0
y_min = 0.0
y_max = 120.0
z_min = 0.0
z_max = 40.0

[render]
roi_x_min = 0.0
roi_x_max = 160.0
roi_y_min = 0.0
roi_y_max = 120.0
width = 84
height = 84
background = 0
peg_intensity = 200
target_intensity = 255
gripper_intensity = 128

[train]
gamma = 0.95
learning_rate = 0.001
batch_size = 32
replay_capacity = 10000
epsilon_start = 1.0
epsilon_min = 0.05
epsilon_decay_steps = 20000
target_sync_period = 500
max_episodes = 400
seed = 0
# sgd or adam
optimizer = adam
# squared or huber
loss = squared
# feature or vision
obs_mode = feature
reward_scale = 0.01

[arbiter]
deadband_mm = 0.1
deadband_rad = 0.001
cap_mm = 2.0
cap_rad = 0.05
coarse_budget = 120
tick_rate_hz = 30.0

[gateway]
host = 127.0.0.1
port = 7777
tick_rate_hz = 30.0
"""


def write_default_config(path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_DEFAULT_TEMPLATE)
