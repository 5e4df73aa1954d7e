"""Semi-autonomous control flow: coarse autonomy, manual override, trials.

The arbiter owns the phase machine. In the autonomous phase it queries the
coarse policy greedily and applies one environment step per tick; any
motion-bearing operator input takes control away the moment it arrives.
The manual phase applies queued operator inputs and watches for the
placement that completes the current transfer leg. Between legs the
gripper teleports back to the reset region.

Legal transitions only:
AUTO_COARSE -> MANUAL_PRECISION (handover or override),
MANUAL_PRECISION -> AUTO_COARSE (explicit resume),
MANUAL_PRECISION -> RESETTING (successful placement),
RESETTING -> AUTO_COARSE, and any -> TRIAL_COMPLETE on sequence exhaustion.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .sim_env import (
    Action,
    ControlRegime,
    EnvConfig,
    Peg,
    SceneState,
    TerminalReason,
    delta_theta,
    distance_to_target,
    manual_step,
    set_regime,
    signed_alignment_error,
    step,
    wrap_pi,
)

log = logging.getLogger(__name__)

__all__ = [
    "Arbiter",
    "ArbiterConfig",
    "ControlPhase",
    "Event",
    "OperatorInput",
    "TransferLeg",
    "TrialPlan",
    "default_trial_plan",
    "initial_trial_scene",
    "virtual_operator",
]


class ControlPhase(enum.Enum):
    AUTO_COARSE = "auto_coarse"
    MANUAL_PRECISION = "manual_precision"
    RESETTING = "resetting"
    TRIAL_COMPLETE = "trial_complete"


@dataclass(frozen=True)
class OperatorInput:
    """One operator command: pose deltas, clutch state, resume flag.

    ``clutch`` is the desired jaw state (None leaves the jaws alone);
    ``resume`` hands control back to the coarse controller.
    """

    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    droll: float = 0.0
    clutch: bool | None = None
    resume: bool = False
    timestamp_ms: float = 0.0
    seq: int = 0

    def has_motion(self, deadband_mm: float, deadband_rad: float) -> bool:
        return (
            abs(self.dx) > deadband_mm
            or abs(self.dy) > deadband_mm
            or abs(self.dz) > deadband_mm
            or abs(self.droll) > deadband_rad
        )


@dataclass(frozen=True)
class TransferLeg:
    from_slot: int
    to_slot: int


@dataclass(frozen=True)
class TrialPlan:
    legs: tuple[TransferLeg, ...]

    def __post_init__(self) -> None:
        if not self.legs:
            raise ValueError("a trial needs at least one leg")


def default_trial_plan() -> TrialPlan:
    """The 1->2, 2->3, 3->1 rotation repeated three times: nine legs."""
    cycle = (TransferLeg(1, 2), TransferLeg(2, 3), TransferLeg(3, 1))
    return TrialPlan(legs=cycle * 3)


@dataclass(frozen=True)
class ArbiterConfig:
    deadband_mm: float = 0.1
    deadband_rad: float = 0.001
    # Per-tick magnitude caps on operator motion.
    cap_mm: float = 2.0
    cap_rad: float = 0.05
    # Coarse step budget per leg before the arbiter gives up and hands over.
    coarse_budget: int = 120
    tick_rate_hz: float = 30.0

    @property
    def tick_ms(self) -> float:
        return 1000.0 / self.tick_rate_hz


@dataclass(frozen=True)
class Event:
    tick: int
    name: str
    payload: dict = field(default_factory=dict)


def format_event(event: Event) -> str:
    """One event-log line: tick, event type, then payload key=value pairs."""
    extra = " ".join(f"{k}={v!r}" for k, v in sorted(event.payload.items()))
    return f"event tick={event.tick} name={event.name}" + (f" {extra}" if extra else "")


def _clamp(value: float, cap: float) -> float:
    return min(max(value, -cap), cap)


def initial_trial_scene(config: EnvConfig, seed: int) -> SceneState:
    """Trial start: the target peg parked in the first slot, gripper in
    region A at a seeded position, coarse regime."""
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = config.region_a
    gx = float(rng.uniform(x0, x1))
    gy = float(rng.uniform(y0, y1))
    slot = config.slots[0]
    peg = Peg(
        id=0,
        x=slot.x,
        y=slot.y,
        side_orientation=float(rng.uniform(0.0, math.pi / 2.0)),
        side_length=config.peg_side,
        slot=slot.id,
    )
    scene = SceneState(
        gripper_x=gx,
        gripper_y=gy,
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
    return replace(scene, best_d=distance_to_target(scene))


class Arbiter:
    """Owns the phase machine and one scene; drives one trial."""

    def __init__(
        self,
        scene: SceneState,
        env_config: EnvConfig,
        plan: TrialPlan,
        agent,
        config: ArbiterConfig | None = None,
        start_phase: ControlPhase = ControlPhase.AUTO_COARSE,
        reset_seed: int = 0,
    ) -> None:
        self.env_config = env_config
        self.plan = plan
        self.agent = agent
        self.config = config or ArbiterConfig()
        self.phase = start_phase
        self.leg_index = 0
        self.completed_legs = 0
        self.tick_count = 0
        self.events: list[Event] = []
        self._queue: list[OperatorInput] = []
        self._reset_rng = np.random.default_rng(reset_seed)
        self.last_seq_applied = 0
        self.last_auto_action: int | None = None
        regime = (ControlRegime.MANUAL if start_phase is ControlPhase.MANUAL_PRECISION
                  else ControlRegime.COARSE)
        self.scene = set_regime(scene, regime)

    # -- events ---------------------------------------------------------

    def _emit(self, name: str, **payload) -> Event:
        event = Event(tick=self.tick_count, name=name, payload=payload)
        self.events.append(event)
        return event

    def _enter_phase(self, phase: ControlPhase) -> None:
        old = self.phase
        self.phase = phase
        self._emit("phase_change", from_phase=old.value, to_phase=phase.value)

    @property
    def current_leg(self) -> TransferLeg:
        return self.plan.legs[self.leg_index]

    @property
    def time_ms(self) -> float:
        return self.tick_count * self.config.tick_ms

    # -- operator input -------------------------------------------------

    def submit_input(self, inp: OperatorInput) -> ControlPhase:
        """Route one operator input according to the current phase.

        In the autonomous phase motion beyond the deadband overrides
        immediately (same tick); clutch-only input is ignored there. In the
        manual phase a resume flag returns control to the agent, anything
        else queues for the next tick.
        """
        if self.phase is ControlPhase.TRIAL_COMPLETE:
            log.warning("input after trial completion dropped (seq=%d)", inp.seq)
            return self.phase
        if self.phase is ControlPhase.RESETTING:
            log.warning("input during reset dropped (seq=%d)", inp.seq)
            return self.phase

        if self.phase is ControlPhase.AUTO_COARSE:
            if inp.has_motion(self.config.deadband_mm, self.config.deadband_rad):
                self._enter_phase(ControlPhase.MANUAL_PRECISION)
                self.scene = set_regime(self.scene, ControlRegime.MANUAL)
                self._emit("override", seq=inp.seq)
                self._apply_manual(inp)
            # clutch-only input never grabs control blindly
            return self.phase

        # MANUAL_PRECISION
        if inp.resume:
            self._enter_phase(ControlPhase.AUTO_COARSE)
            self.scene = set_regime(self.scene, ControlRegime.COARSE)
            self._emit("resume", seq=inp.seq)
            return self.phase
        self._queue.append(inp)
        return self.phase

    # -- manual application ----------------------------------------------

    def _apply_manual(self, inp: OperatorInput) -> None:
        before = self.scene
        clutch = before.jaws_closed if inp.clutch is None else inp.clutch
        after = manual_step(
            before,
            _clamp(inp.dx, self.config.cap_mm),
            _clamp(inp.dy, self.config.cap_mm),
            _clamp(inp.dz, self.config.cap_mm),
            _clamp(inp.droll, self.config.cap_rad),
            clutch=clutch,
            config=self.env_config,
        )
        self.scene = after
        self.last_seq_applied = max(self.last_seq_applied, inp.seq)
        if after.held_peg is not None and before.held_peg is None:
            self._emit("grasp", peg=after.held_peg, seq=inp.seq)
        elif before.held_peg is not None and after.held_peg is None:
            peg = after.pegs[before.held_peg]
            self._emit("release", peg=before.held_peg, slot=peg.slot, seq=inp.seq)
            self._check_placement(peg)

    def _check_placement(self, peg: Peg) -> None:
        if peg.slot != self.current_leg.to_slot:
            return
        self.completed_legs += 1
        self._emit("leg_complete", leg=self.leg_index,
                   count=self.completed_legs, slot=peg.slot)
        if self.completed_legs >= len(self.plan.legs):
            self._enter_phase(ControlPhase.TRIAL_COMPLETE)
            self._emit("trial_complete", legs=self.completed_legs)
        else:
            self.leg_index += 1
            self._enter_phase(ControlPhase.RESETTING)

    # -- tick loop --------------------------------------------------------

    def tick(self) -> list[Event]:
        """Advance one tick; returns the events it emitted."""
        start = len(self.events)
        self.tick_count += 1

        if self.phase is ControlPhase.AUTO_COARSE:
            self._tick_auto()
        elif self.phase is ControlPhase.MANUAL_PRECISION:
            for inp in self._queue:
                self._apply_manual(inp)
                if self.phase is not ControlPhase.MANUAL_PRECISION:
                    break
            self._queue.clear()
        elif self.phase is ControlPhase.RESETTING:
            self._tick_reset()
        return self.events[start:]

    def _tick_auto(self) -> None:
        action_index = int(self.agent(self.scene))
        self.last_auto_action = action_index
        outcome = step(self.scene, Action.from_index(action_index, self.env_config),
                       self.env_config)
        self.scene = outcome.next_state
        if outcome.terminal_reason is TerminalReason.REACHED_AND_ALIGNED:
            self._handover("coarse_goal")
        elif (outcome.terminal_reason is TerminalReason.MAX_STEPS
              or self.scene.tick >= self.config.coarse_budget):
            # The approach stalled; precision control can always take over.
            self._emit("coarse_timeout", tick_budget=self.config.coarse_budget)
            self._handover("timeout")

    def _handover(self, reason: str) -> None:
        self._enter_phase(ControlPhase.MANUAL_PRECISION)
        self.scene = set_regime(self.scene, ControlRegime.MANUAL)
        self._emit("handover", reason=reason,
                   d=distance_to_target(self.scene),
                   dtheta=delta_theta(self.scene))

    def _tick_reset(self) -> None:
        cfg = self.env_config
        x0, x1, y0, y1 = cfg.region_a
        gx = float(self._reset_rng.uniform(x0, x1))
        gy = float(self._reset_rng.uniform(y0, y1))
        scene = replace(
            self.scene,
            gripper_x=gx,
            gripper_y=gy,
            gripper_z=cfg.constant_height,
            gripper_roll=wrap_pi(cfg.start_roll),
            jaws_closed=False,
            held_peg=None,
            tick=0,
            regime=ControlRegime.COARSE,
            best_dtheta=math.inf,
        )
        self.scene = replace(scene, best_d=distance_to_target(scene))
        self._emit("leg_reset", leg=self.leg_index, x=gx, y=gy)
        self._enter_phase(ControlPhase.AUTO_COARSE)


def virtual_operator(scene: SceneState, leg: TransferLeg, env_config: EnvConfig,
                     config: ArbiterConfig, timestamp_ms: float = 0.0,
                     seq: int = 0) -> OperatorInput:
    """Deterministic proportional stand-in for the human operator.

    Not holding: close on the target peg and align, then clutch. Holding:
    carry to the leg's destination slot and open the jaws over it. Motion
    is capped per tick, so every leg completes in bounded time from any
    reachable pose.
    """
    cap, rcap = config.cap_mm, config.cap_rad
    if scene.held_peg is None:
        target = scene.target
        d = distance_to_target(scene)
        err = signed_alignment_error(scene)
        if d <= 0.8 * env_config.grasp_radius and abs(err) <= 1.6 * env_config.align_tolerance:
            return OperatorInput(clutch=True, timestamp_ms=timestamp_ms, seq=seq)
        return OperatorInput(
            dx=_clamp(target.x - scene.gripper_x, cap),
            dy=_clamp(target.y - scene.gripper_y, cap),
            droll=_clamp(-err, rcap),
            clutch=False,
            timestamp_ms=timestamp_ms,
            seq=seq,
        )
    slot = next(s for s in env_config.slots if s.id == leg.to_slot)
    dx = slot.x - scene.gripper_x
    dy = slot.y - scene.gripper_y
    if math.hypot(dx, dy) <= 0.8 * env_config.grasp_radius:
        return OperatorInput(clutch=False, timestamp_ms=timestamp_ms, seq=seq)
    return OperatorInput(
        dx=_clamp(dx, cap),
        dy=_clamp(dy, cap),
        clutch=True,
        timestamp_ms=timestamp_ms,
        seq=seq,
    )
