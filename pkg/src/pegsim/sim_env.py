"""Planar kinematic peg-board environment.

All lengths are millimetres, all angles radians. The environment is a pure
value-semantics state machine: every operation is a deterministic function
of its inputs and returns fresh state objects, so states can be copied,
replayed and compared bit for bit.

Two motion regimes share one scene:

* coarse: discrete 27-action steps at a fixed height (``step``), used by
  the autonomous controller;
* manual: continuous pose deltas plus a jaw clutch (``manual_step``), used
  by the human operator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Action",
    "AngularStep",
    "ControlRegime",
    "EnvConfig",
    "Layout",
    "Peg",
    "PhaseError",
    "RewardAngleUnit",
    "RewardDistanceUnit",
    "SceneState",
    "Slot",
    "StepOutcome",
    "TerminalReason",
    "Workspace",
    "WorkspaceError",
    "delta_theta",
    "distance_to_target",
    "format_step_record",
    "manual_step",
    "reset",
    "reward",
    "signed_alignment_error",
    "step",
    "wrap_pi",
]


class WorkspaceError(ValueError):
    """Raised when a configured workspace cannot satisfy a placement rule."""


class PhaseError(RuntimeError):
    """Raised when a motion command arrives in the wrong control regime."""


def wrap_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(angle, math.tau)
    if r <= -math.pi:
        r += math.tau
    return r


def _wrap_quarter(angle: float) -> float:
    """Wrap a square-head orientation to [0, pi/2)."""
    return angle % (math.pi / 2.0)


class ControlRegime(enum.Enum):
    COARSE = "coarse"
    MANUAL = "manual"


class Layout(enum.Enum):
    RANDOM_UNIFORM = "random_uniform"
    EVAL_A = "eval_a"
    EVAL_B = "eval_b"
    EVAL_C = "eval_c"


class TerminalReason(enum.Enum):
    REACHED_AND_ALIGNED = "reached_and_aligned"
    MAX_STEPS = "max_steps"
    NONE = "none"


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned motion bounds; x/y bound both regimes, z only manual."""

    x_min: float = 0.0
    x_max: float = 160.0
    y_min: float = 0.0
    y_max: float = 120.0
    z_min: float = 0.0
    z_max: float = 40.0

    def clamp_xy(self, x: float, y: float) -> tuple[float, float]:
        return (
            min(max(x, self.x_min), self.x_max),
            min(max(y, self.y_min), self.y_max),
        )

    def clamp_z(self, z: float) -> float:
        return min(max(z, self.z_min), self.z_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class Slot:
    """A board slot a peg can be parked in."""

    id: int
    x: float
    y: float


# Transfer board used by the trial task: three slots along the top edge and
# a gripper reset region near the bottom. Targets are reachable from the
# start pose without leaving the workspace.
DEFAULT_SLOTS: tuple[Slot, ...] = (
    Slot(1, 40.0, 90.0),
    Slot(2, 80.0, 90.0),
    Slot(3, 120.0, 90.0),
)

# Reset region "A": rectangle (x_min, x_max, y_min, y_max).
DEFAULT_REGION_A: tuple[float, float, float, float] = (60.0, 100.0, 10.0, 30.0)


class AngularStep(enum.Enum):
    """Interpretation of the coarse rotation increment.

    DEGREES_10 treats the configured rotation step as 10 degrees, which keeps
    orientation refinement fine enough to train. RADIANS_10 is the literal
    10-radian reading, kept behind this switch for faithfulness experiments.
    """

    DEGREES_10 = "degrees10"
    RADIANS_10 = "radians10"

    def step_radians(self) -> float:
        if self is AngularStep.DEGREES_10:
            return math.radians(10.0)
        return 10.0


class RewardDistanceUnit(enum.Enum):
    """Unit of the distance branch of the step reward.

    Geometry and thresholds are always millimetres; this only rescales the
    reward magnitude. Millimetres (the default) match the step sizes and
    threshold as printed and give squared-progress terms of order 10^2,
    comparable to the degree-valued orientation branch.
    """

    MILLIMETRES = "mm"
    METRES = "m"

    @property
    def scale(self) -> float:
        return 1.0 if self is RewardDistanceUnit.MILLIMETRES else 1e-3


class RewardAngleUnit(enum.Enum):
    """Unit of the orientation branch of the step reward.

    Angles elsewhere are radians; this only rescales the reward magnitude.
    Degrees (the default) mirror the degree reading of the 10-unit angular
    step and put one rotation step's squared progress (~10^2) on the same
    footing as one translation step's. With radians the orientation branch
    is ~3000x weaker than the millimetre distance branch and its progress
    signal drowns during training.
    """

    DEGREES = "deg"
    RADIANS = "rad"

    @property
    def scale(self) -> float:
        return 180.0 / math.pi if self is RewardAngleUnit.DEGREES else 1.0


@dataclass(frozen=True)
class EnvConfig:
    d_threshold: float = 10.0
    gamma: float = 0.95
    max_steps: int = 200
    workspace: Workspace = field(default_factory=Workspace)
    angular_step: AngularStep = AngularStep.DEGREES_10
    reward_distance_unit: RewardDistanceUnit = RewardDistanceUnit.MILLIMETRES
    reward_angle_unit: RewardAngleUnit = RewardAngleUnit.DEGREES
    grasp_radius: float = 5.0
    align_tolerance: float = 0.0873
    constant_height: float = 10.0
    dx_step: float = 6.0
    dy_step: float = 8.0
    peg_side: float = 8.0
    start_x: float = 80.0
    start_y: float = 20.0
    start_roll: float = 0.0
    slots: tuple[Slot, ...] = DEFAULT_SLOTS
    region_a: tuple[float, float, float, float] = DEFAULT_REGION_A

    def __post_init__(self) -> None:
        if not (self.d_threshold > self.grasp_radius > 0.0):
            raise ValueError("require d_threshold > grasp_radius > 0")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")

    @property
    def dphi_step(self) -> float:
        return self.angular_step.step_radians()


@dataclass(frozen=True)
class Action:
    """One coarse-control action: index in [0, 26] plus its motion triple.

    The encoding is index = 9*ix + 3*iy + iphi with per-axis level codes
    {-1 -> 0, 0 -> 1, +1 -> 2}, so index 13 is the no-op.
    """

    index: int
    dx: float
    dy: float
    dphi: float

    N_ACTIONS = 27

    @staticmethod
    def from_index(index: int, config: EnvConfig) -> "Action":
        if not 0 <= index < Action.N_ACTIONS:
            raise ValueError(f"action index {index} outside [0, 26]")
        ix, rem = divmod(index, 9)
        iy, iphi = divmod(rem, 3)
        return Action(
            index=index,
            dx=(ix - 1) * config.dx_step,
            dy=(iy - 1) * config.dy_step,
            dphi=(iphi - 1) * config.dphi_step,
        )

    @staticmethod
    def index_of(levels: tuple[int, int, int]) -> int:
        """Index for per-axis levels in {-1, 0, +1}."""
        lx, ly, lphi = levels
        return 9 * (lx + 1) + 3 * (ly + 1) + (lphi + 1)

    @property
    def levels(self) -> tuple[int, int, int]:
        ix, rem = divmod(self.index, 9)
        iy, iphi = divmod(rem, 3)
        return (ix - 1, iy - 1, iphi - 1)


@dataclass(frozen=True)
class Peg:
    """A square-headed peg lying on the board."""

    id: int
    x: float
    y: float
    side_orientation: float = 0.0
    side_length: float = 8.0
    slot: int | None = None

    def __post_init__(self) -> None:
        if self.side_length <= 0:
            raise ValueError("peg side_length must be positive")
        object.__setattr__(
            self, "side_orientation", _wrap_quarter(self.side_orientation)
        )


@dataclass(frozen=True)
class SceneState:
    """Full simulator truth for one instant.

    ``best_d`` and ``best_dtheta`` are the smallest distance and orientation
    deviation seen so far this episode; the coarse reward pays only for
    improving them (see ``step``).
    """

    gripper_x: float
    gripper_y: float
    gripper_z: float
    gripper_roll: float
    jaws_closed: bool
    pegs: tuple[Peg, ...]
    target_index: int
    held_peg: int | None
    tick: int
    seed: int
    regime: ControlRegime = ControlRegime.COARSE
    best_d: float = math.inf
    best_dtheta: float = math.inf

    def __post_init__(self) -> None:
        if not self.pegs:
            raise ValueError("scene requires at least one peg")
        if not 0 <= self.target_index < len(self.pegs):
            raise ValueError("target_index out of range")
        if self.held_peg is not None and not 0 <= self.held_peg < len(self.pegs):
            raise ValueError("held_peg out of range")

    @property
    def target(self) -> Peg:
        return self.pegs[self.target_index]


@dataclass(frozen=True)
class StepOutcome:
    next_state: SceneState
    reward: float
    d_prev: float
    d_next: float
    dtheta_prev: float
    dtheta_next: float
    terminal: bool
    terminal_reason: TerminalReason


# Fixed evaluation layouts: three distinct target placements with the same
# start pose, matching the three board slots.
_EVAL_PLACEMENTS = {
    Layout.EVAL_A: (40.0, 90.0, 0.0),
    Layout.EVAL_B: (80.0, 90.0, math.pi / 8.0),
    Layout.EVAL_C: (120.0, 90.0, math.pi / 4.0),
}


def _sample_bounds(config: EnvConfig) -> tuple[float, float, float, float]:
    # Keep random targets a threshold-width away from the walls so the
    # approach never has to fight the clamp.
    ws = config.workspace
    margin = config.d_threshold
    return (
        ws.x_min + margin,
        ws.x_max - margin,
        ws.y_min + margin,
        ws.y_max - margin,
    )


def reset(config: EnvConfig, seed: int, layout: Layout = Layout.RANDOM_UNIFORM) -> SceneState:
    """Start a fresh coarse episode.

    The gripper begins at the configured start pose at the constant coarse
    height. Eval layouts place the target at a fixed position regardless of
    seed; RANDOM_UNIFORM samples a target uniformly over the workspace
    interior, rejecting placements closer than twice the distance threshold
    to the start pose.
    """
    if layout in _EVAL_PLACEMENTS:
        tx, ty, orient = _EVAL_PLACEMENTS[layout]
    else:
        lo_x, hi_x, lo_y, hi_y = _sample_bounds(config)
        if lo_x >= hi_x or lo_y >= hi_y:
            raise WorkspaceError("workspace too small to sample targets")
        min_sep = 2.0 * config.d_threshold
        corners = [(x, y) for x in (lo_x, hi_x) for y in (lo_y, hi_y)]
        if max(math.dist((config.start_x, config.start_y), c) for c in corners) < min_sep:
            raise WorkspaceError(
                "workspace too small: no target position is at least "
                f"{min_sep} mm from the start pose"
            )
        rng = np.random.default_rng(seed)
        while True:
            tx = float(rng.uniform(lo_x, hi_x))
            ty = float(rng.uniform(lo_y, hi_y))
            if math.dist((config.start_x, config.start_y), (tx, ty)) >= min_sep:
                break
        orient = float(rng.uniform(0.0, math.pi / 2.0))

    peg = Peg(id=0, x=tx, y=ty, side_orientation=orient, side_length=config.peg_side)
    scene = SceneState(
        gripper_x=config.start_x,
        gripper_y=config.start_y,
        gripper_z=config.constant_height,
        gripper_roll=wrap_pi(config.start_roll),
        jaws_closed=False,
        pegs=(peg,),
        target_index=0,
        held_peg=None,
        tick=0,
        seed=seed,
        regime=ControlRegime.COARSE,
    )
    return replace(scene, best_d=distance_to_target(scene), best_dtheta=math.inf)


def distance_to_target(state: SceneState) -> float:
    """Planar Euclidean distance from the gripper tip to the target centre."""
    t = state.target
    return math.hypot(state.gripper_x - t.x, state.gripper_y - t.y)


def signed_alignment_error(state: SceneState) -> float:
    """Signed roll error to the nearest side normal, in (-pi/4, pi/4].

    A square head has four side normals a quarter turn apart and the two-jaw
    gripper is symmetric under a half turn, so a straddle perpendicular to
    any side is the same grasp; the error folds modulo pi/2. Folding in roll
    space also makes the deviation independent of gripper position, which
    keeps the orientation reward a pure measure of rotation progress
    (a position-dependent "nearest side" lets translation alone manufacture
    orientation reward whenever the nearest side flips).
    """
    e = math.remainder(state.gripper_roll - state.target.side_orientation, math.pi / 2.0)
    if e <= -math.pi / 4.0:
        e += math.pi / 2.0
    return e


def delta_theta(state: SceneState) -> float:
    """Orientation deviation in [0, pi/4] (square and jaw symmetry folded in)."""
    return abs(signed_alignment_error(state))


def reward(
    d_prev: float,
    d_next: float,
    dtheta_prev: float,
    dtheta_next: float,
    config: EnvConfig,
) -> float:
    """Signed-square progress reward.

    Outside the distance threshold the distance branch applies; at or inside
    it (d_next <= threshold, equality included) the orientation branch
    applies. Exactly one branch contributes per step. The function is
    unit-blind: distances, the threshold and the result are whatever unit
    the caller supplies (angles are radians).
    """
    if d_next > config.d_threshold:
        delta = d_prev - d_next
    else:
        delta = dtheta_prev - dtheta_next
    return delta * abs(delta)


def _step_reward(
    d_prev_mm: float,
    d_next_mm: float,
    dtheta_prev: float,
    dtheta_next: float,
    config: EnvConfig,
) -> float:
    """Step reward with each branch in its configured unit.

    Branch selection always compares millimetres against the millimetre
    threshold; the unit factors only rescale magnitudes (scaling both inputs
    of a branch by s multiplies its signed square by s^2), never the branch
    choice.
    """
    r = reward(d_prev_mm, d_next_mm, dtheta_prev, dtheta_next, config)
    if d_next_mm > config.d_threshold:
        s = config.reward_distance_unit.scale
    else:
        s = config.reward_angle_unit.scale
    return r * (s * s)


def _move_held_peg(state: SceneState) -> tuple[Peg, ...]:
    if state.held_peg is None:
        return state.pegs
    pegs = list(state.pegs)
    held = pegs[state.held_peg]
    pegs[state.held_peg] = replace(held, x=state.gripper_x, y=state.gripper_y, slot=None)
    return tuple(pegs)


def step(state: SceneState, action: Action, config: EnvConfig) -> StepOutcome:
    """Apply one coarse-control action.

    Position deltas are clamped to the workspace, the roll delta wraps, and
    the height stays at the configured constant. Termination fires when the
    gripper is both within the distance threshold and aligned within
    tolerance, or when the step budget runs out.

    Both reward branches are progress-ratcheted. Per quantity (distance,
    deviation) the scalar pair fed to the reward is:

    * new episode best  -> (previous best, new value): progress pays once;
    * raw regression    -> (raw previous, raw next): the literal penalty;
    * otherwise         -> (next, next): re-earning paid ground is neutral.

    Along monotone trajectories every step therefore scores exactly the
    literal per-step values, and the branch choice always compares the raw
    next distance against the threshold. The ratchet exists because the
    literal signed-square shaping is mintable (retreat on a shallow arc and
    re-drop for a net-positive squared difference; derotate for free while
    the distance branch ignores roll, then re-align inside the threshold),
    and one of those loops, not the task, would otherwise be the
    return-optimal policy; with the ratchet every closed loop is
    net-non-positive. Termination always checks the raw geometry.
    """
    if state.regime is not ControlRegime.COARSE:
        raise PhaseError("coarse actions are rejected during manual control")

    d_raw_prev = distance_to_target(state)
    dtheta_raw_prev = delta_theta(state)

    nx, ny = config.workspace.clamp_xy(state.gripper_x + action.dx, state.gripper_y + action.dy)
    moved = replace(
        state,
        gripper_x=nx,
        gripper_y=ny,
        gripper_z=config.constant_height,
        gripper_roll=wrap_pi(state.gripper_roll + action.dphi),
        tick=state.tick + 1,
    )
    moved = replace(moved, pegs=_move_held_peg(moved))

    d_raw = distance_to_target(moved)
    dtheta_raw = delta_theta(moved)

    if d_raw < state.best_d:
        d_prev = state.best_d
    elif d_raw > d_raw_prev:
        d_prev = d_raw_prev
    else:
        d_prev = d_raw
    # The deviation ratchet arms at the first step that lands inside the
    # distance threshold (where the orientation branch starts to matter) and
    # that step scores its own rotation literally. Arming it earlier marks
    # alignment reached during the approach as already paid, which leaves
    # the final in-threshold alignment step with zero value pull toward
    # termination; arming it from the episode start pays any pre-rotation
    # as one large spike at entry.
    if math.isinf(state.best_dtheta) or dtheta_raw >= dtheta_raw_prev:
        dtheta_prev = dtheta_raw_prev
    elif dtheta_raw < state.best_dtheta:
        dtheta_prev = state.best_dtheta
    else:
        dtheta_prev = dtheta_raw

    inside = d_raw <= config.d_threshold
    if inside:
        new_best_dtheta = min(state.best_dtheta, dtheta_raw)
    else:
        new_best_dtheta = state.best_dtheta
    moved = replace(
        moved,
        best_d=min(state.best_d, d_raw),
        best_dtheta=new_best_dtheta,
    )
    r = _step_reward(d_prev, d_raw, dtheta_prev, dtheta_raw, config)

    if d_raw <= config.d_threshold and dtheta_raw <= config.align_tolerance:
        reason = TerminalReason.REACHED_AND_ALIGNED
    elif moved.tick >= config.max_steps:
        reason = TerminalReason.MAX_STEPS
    else:
        reason = TerminalReason.NONE

    return StepOutcome(
        next_state=moved,
        reward=r,
        d_prev=d_prev,
        d_next=d_raw,
        dtheta_prev=dtheta_prev,
        dtheta_next=dtheta_raw,
        terminal=reason is not TerminalReason.NONE,
        terminal_reason=reason,
    )


def _nearest_slot(config: EnvConfig, x: float, y: float) -> int | None:
    """Slot whose centre lies within the grasp radius, nearest first."""
    best = None
    best_d = config.grasp_radius
    for slot in config.slots:
        d = math.hypot(x - slot.x, y - slot.y)
        if d <= best_d:
            best = slot.id
            best_d = d
    return best


def manual_step(
    state: SceneState,
    dx: float,
    dy: float,
    dz: float,
    droll: float,
    clutch: bool,
    config: EnvConfig,
) -> SceneState:
    """Apply one continuous operator pose update plus the clutch state.

    Closing the jaws grasps the target peg only when the gripper is inside
    the grasp radius and aligned within twice the coarse tolerance;
    otherwise the jaws close on nothing, which is operator error rather
    than a fault. Opening them releases a held peg in place and records the
    slot whose centre lies within the grasp radius, if any.
    """
    if state.regime is not ControlRegime.MANUAL:
        raise PhaseError("manual motion is rejected during coarse control")

    ws = config.workspace
    nx, ny = ws.clamp_xy(state.gripper_x + dx, state.gripper_y + dy)
    nz = ws.clamp_z(state.gripper_z + dz)
    out = replace(
        state,
        gripper_x=nx,
        gripper_y=ny,
        gripper_z=nz,
        gripper_roll=wrap_pi(state.gripper_roll + droll),
    )
    out = replace(out, pegs=_move_held_peg(out))

    if clutch and not state.jaws_closed:
        held = None
        if (
            distance_to_target(out) <= config.grasp_radius
            and delta_theta(out) <= 2.0 * config.align_tolerance
        ):
            held = out.target_index
        out = replace(out, jaws_closed=True, held_peg=held)
        out = replace(out, pegs=_move_held_peg(out))
    elif not clutch and state.jaws_closed:
        if out.held_peg is not None:
            pegs = list(out.pegs)
            peg = pegs[out.held_peg]
            slot = _nearest_slot(config, peg.x, peg.y)
            pegs[out.held_peg] = replace(peg, slot=slot)
            out = replace(out, pegs=tuple(pegs), held_peg=None)
        out = replace(out, jaws_closed=False)

    return out


def set_regime(state: SceneState, regime: ControlRegime) -> SceneState:
    """Switch the motion regime (owned by the control arbiter)."""
    return replace(state, regime=regime)


def format_step_record(tick: int, state: SceneState, action_index: int, outcome: StepOutcome) -> str:
    """One episode-log line: tick, pose, action, reward, d, dtheta, terminal."""
    return (
        f"tick={tick} x={state.gripper_x!r} y={state.gripper_y!r} "
        f"z={state.gripper_z!r} roll={state.gripper_roll!r} "
        f"action={action_index} reward={outcome.reward!r} "
        f"d={outcome.d_next!r} dtheta={outcome.dtheta_next!r} "
        f"terminal={int(outcome.terminal)}"
    )
