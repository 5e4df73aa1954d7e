"""Scripted coarse policies for tests that need a competent agent without
training a network first."""

from __future__ import annotations

import math

from pegsim.sim_env import (
    Action,
    EnvConfig,
    SceneState,
    delta_theta,
    distance_to_target,
    signed_alignment_error,
)


class GeometricCoarseAgent:
    """Greedy one-step geometric controller over the 27-action set.

    Moves to cut distance fastest, rotates toward alignment; reaches the
    coarse goal from any start in a workspace-bounded number of steps.
    """

    def __init__(self, config: EnvConfig) -> None:
        self.config = config

    def __call__(self, scene: SceneState) -> int:
        cfg = self.config
        target = scene.target
        best = None
        for ix in (-1, 0, 1):
            for iy in (-1, 0, 1):
                nx = scene.gripper_x + ix * cfg.dx_step
                ny = scene.gripper_y + iy * cfg.dy_step
                nx, ny = cfg.workspace.clamp_xy(nx, ny)
                d = math.hypot(nx - target.x, ny - target.y)
                if best is None or d < best[0]:
                    best = (d, ix, iy)
        _, ix, iy = best
        err = signed_alignment_error(scene)
        if abs(err) <= cfg.align_tolerance:
            iphi = 0
        else:
            iphi = -1 if err > 0 else 1
        if distance_to_target(scene) <= cfg.d_threshold and delta_theta(scene) <= cfg.align_tolerance:
            return Action.index_of((0, 0, 0))
        return Action.index_of((ix, iy, iphi))
