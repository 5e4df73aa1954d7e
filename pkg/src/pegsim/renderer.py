"""Scene rasterization and observation building.

Produces the agent's visual input: a top-down grayscale rendering clipped to
a region of interest, stacked over the last four ticks. Rasterization is
hard-edged (pixel-centre sampling, no anti-aliasing) so identical states
yield identical pixels on any platform.

A low-dimensional feature observation is also exposed; it exists for oracle
tests and fast desk-scale training, not as the primary sensing mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sim_env import EnvConfig, SceneState, distance_to_target, signed_alignment_error

__all__ = [
    "Frame",
    "FrameStack",
    "RenderConfig",
    "feature_observation",
    "FEATURE_DIM",
    "init_stack",
    "push_frame",
    "render",
    "to_input",
    "write_pgm",
]


@dataclass(frozen=True)
class Frame:
    """A single grayscale image; pixels are row-major uint8, row 0 at top."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self) -> None:
        if self.pixels.shape != (self.height, self.width):
            raise ValueError("pixel buffer shape must be (height, width)")
        if self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be uint8")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.pixels, other.pixels))
        )


@dataclass(frozen=True)
class FrameStack:
    """Exactly four frames, oldest first."""

    frames: tuple[Frame, Frame, Frame, Frame]

    def __post_init__(self) -> None:
        if len(self.frames) != 4:
            raise ValueError("stack holds exactly 4 frames")
        w, h = self.frames[0].width, self.frames[0].height
        if any(f.width != w or f.height != h for f in self.frames):
            raise ValueError("all stacked frames must share dimensions")


@dataclass(frozen=True)
class RenderConfig:
    """Region of interest (workspace mm) and the intensity map."""

    roi_x_min: float = 0.0
    roi_x_max: float = 160.0
    roi_y_min: float = 0.0
    roi_y_max: float = 120.0
    width: int = 84
    height: int = 84
    background: int = 0
    peg_intensity: int = 200
    target_intensity: int = 255
    gripper_intensity: int = 128
    # Gripper glyph geometry: two jaw bars straddling the tip.
    jaw_length: float = 6.0
    jaw_width: float = 1.6
    jaw_gap: float = 11.0

    def __post_init__(self) -> None:
        if self.roi_x_max <= self.roi_x_min or self.roi_y_max <= self.roi_y_min:
            raise ValueError("roi must have positive area")
        if len({self.background, self.peg_intensity, self.target_intensity,
                self.gripper_intensity}) != 4:
            raise ValueError("intensity map values must be distinct")


def _pixel_centres(config: RenderConfig) -> tuple[np.ndarray, np.ndarray]:
    sx = (config.roi_x_max - config.roi_x_min) / config.width
    sy = (config.roi_y_max - config.roi_y_min) / config.height
    xs = config.roi_x_min + (np.arange(config.width) + 0.5) * sx
    ys = config.roi_y_max - (np.arange(config.height) + 0.5) * sy
    return np.meshgrid(xs, ys)


def _square_mask(px: np.ndarray, py: np.ndarray, cx: float, cy: float,
                 half: float, angle: float) -> np.ndarray:
    dx = px - cx
    dy = py - cy
    c, s = math.cos(angle), math.sin(angle)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= half) & (np.abs(v) <= half)


def _gripper_mask(px: np.ndarray, py: np.ndarray, state: SceneState,
                  config: RenderConfig) -> np.ndarray:
    dx = px - state.gripper_x
    dy = py - state.gripper_y
    c, s = math.cos(state.gripper_roll), math.sin(state.gripper_roll)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    along = np.abs(u) <= config.jaw_length / 2.0
    offset = config.jaw_gap / 2.0
    bar = (np.abs(v - offset) <= config.jaw_width / 2.0) | (
        np.abs(v + offset) <= config.jaw_width / 2.0
    )
    return along & bar


def render(state: SceneState, config: RenderConfig) -> Frame:
    """Rasterize one state: oriented peg squares, then the gripper glyph."""
    px, py = _pixel_centres(config)
    img = np.full((config.height, config.width), config.background, dtype=np.uint8)
    for i, peg in enumerate(state.pegs):
        mask = _square_mask(px, py, peg.x, peg.y, peg.side_length / 2.0,
                            peg.side_orientation)
        value = config.target_intensity if i == state.target_index else config.peg_intensity
        img[mask] = value
    img[_gripper_mask(px, py, state, config)] = config.gripper_intensity
    return Frame(width=config.width, height=config.height, pixels=img)


def init_stack(frame: Frame) -> FrameStack:
    """Episode-start stack: the first frame replicated four times."""
    return FrameStack(frames=(frame, frame, frame, frame))


def push_frame(stack: FrameStack, frame: Frame) -> FrameStack:
    """Drop the oldest frame and append the newest."""
    ref = stack.frames[0]
    if frame.width != ref.width or frame.height != ref.height:
        raise ValueError("frame dimensions must match the stack")
    return FrameStack(frames=(stack.frames[1], stack.frames[2], stack.frames[3], frame))


def to_input(stack: FrameStack) -> np.ndarray:
    """Network input tensor of shape (4, H, W), oldest channel first, in [0, 1]."""
    planes = [f.pixels.astype(np.float32) / 255.0 for f in stack.frames]
    return np.stack(planes, axis=0)


# Feature observation: target offset, unit bearing, distance, signed
# alignment error, and the episode-best distance/deviation the reward
# ratchets against, all scaled to roughly unit range.
FEATURE_DIM = 8
_FEATURE_SCALE_MM = 100.0


def feature_observation(state: SceneState, config: EnvConfig) -> np.ndarray:
    t = state.target
    dxr = t.x - state.gripper_x
    dyr = t.y - state.gripper_y
    d = distance_to_target(state)
    if d > 1e-9:
        cos_b, sin_b = dxr / d, dyr / d
    else:
        cos_b, sin_b = 0.0, 0.0
    err = signed_alignment_error(state) / (math.pi / 4.0)
    best_d = min(state.best_d, 10.0 * _FEATURE_SCALE_MM) / _FEATURE_SCALE_MM
    best_th = min(state.best_dtheta, math.pi / 4.0) / (math.pi / 4.0)
    return np.array(
        [
            dxr / _FEATURE_SCALE_MM,
            dyr / _FEATURE_SCALE_MM,
            cos_b,
            sin_b,
            d / _FEATURE_SCALE_MM,
            err,
            best_d,
            best_th,
        ],
        dtype=np.float32,
    )


def write_pgm(frame: Frame, path: str) -> None:
    """Dump a frame as binary PGM (P5), one file per tick when debugging."""
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frame.pixels.tobytes())
