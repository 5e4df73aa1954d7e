"""Scripted trial execution, logging, and deterministic replay.

A trial is one full transfer plan driven either fully manually (the
scripted operator does everything) or semi-autonomously (the coarse policy
approaches, the operator grasps, carries and places). Every tick is logged
as a self-contained key=value line; replaying a log re-simulates the trial
action by action, checks every recorded pose, and recomputes the summary
metrics, so any tampering surfaces as a mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .arbiter import (
    Arbiter,
    ArbiterConfig,
    ControlPhase,
    Event,
    OperatorInput,
    TrialPlan,
    default_trial_plan,
    initial_trial_scene,
    virtual_operator,
)
from .metrics import Sample, TrialMode, TrialRecord, completion_time, travel_length
from .sim_env import EnvConfig

__all__ = [
    "ReplayMismatchError",
    "TrialResult",
    "parse_kv_line",
    "replay_trial",
    "run_trial",
]

TRIAL_LOG_VERSION = 1


class ReplayMismatchError(ValueError):
    """A replayed trial diverged from its log."""


@dataclass
class TrialResult:
    record: TrialRecord
    events: list[Event] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)
    ticks: int = 0
    completed: bool = False

    @property
    def travel_mm(self) -> float:
        return travel_length(self.record)

    @property
    def duration_s(self) -> float:
        return completion_time(self.record)


def _fmt(value: float) -> str:
    return repr(float(value))


def parse_kv_line(line: str) -> tuple[str, dict[str, str]]:
    """Split 'kind key=value ...' into its tag and field map."""
    parts = line.strip().split()
    if not parts:
        raise ValueError("empty record")
    fields = {}
    for token in parts[1:]:
        key, _, value = token.partition("=")
        fields[key] = value
    return parts[0], fields


class _TrialDriver:
    """Shared tick loop for live runs and replays.

    The caller supplies the per-tick input (live: the virtual operator;
    replay: the logged input) and, for autonomous ticks, the agent already
    wired into the arbiter (replay wires a script of logged actions).
    """

    def __init__(self, mode: TrialMode, seed: int, env_config: EnvConfig,
                 agent, plan: TrialPlan, arb_config: ArbiterConfig) -> None:
        self.mode = mode
        self.env_config = env_config
        scene = initial_trial_scene(env_config, seed)
        start = (ControlPhase.MANUAL_PRECISION if mode is TrialMode.MANUAL
                 else ControlPhase.AUTO_COARSE)
        self.arb = Arbiter(scene, env_config, plan, agent, arb_config,
                           start_phase=start, reset_seed=seed + 1)
        self.record = TrialRecord(mode=mode)
        self.segment = 0 if start is ControlPhase.MANUAL_PRECISION else -1
        self.lines: list[str] = [
            f"trial version={TRIAL_LOG_VERSION} mode={mode.value} seed={seed} "
            f"legs={len(plan.legs)} tick_ms={_fmt(arb_config.tick_ms)}"
        ]

    def _pose_suffix(self) -> str:
        s = self.arb.scene
        return (f"x={_fmt(s.gripper_x)} y={_fmt(s.gripper_y)} "
                f"z={_fmt(s.gripper_z)} roll={_fmt(s.gripper_roll)}")

    def _absorb_events(self, events: list[Event]) -> None:
        for event in events:
            if (event.name == "phase_change"
                    and event.payload.get("to_phase") == ControlPhase.MANUAL_PRECISION.value):
                self.segment += 1
            if event.name == "leg_complete":
                self.record.leg_markers.append(event.tick)

    def wants_input(self) -> bool:
        if self.arb.phase is ControlPhase.MANUAL_PRECISION:
            return True
        return (self.mode is TrialMode.MANUAL
                and self.arb.phase is ControlPhase.AUTO_COARSE)

    def tick_with_input(self, inp: OperatorInput) -> None:
        arb = self.arb
        before = len(arb.events)
        arb.submit_input(inp)
        applied_at_submit = any(e.name == "override" for e in arb.events[before:])
        arb.tick()
        self._absorb_events(arb.events[before:])
        applied = applied_at_submit or arb.last_seq_applied == inp.seq
        if applied:
            self.record.samples.append(Sample(
                t_ms=arb.time_ms, x=arb.scene.gripper_x, y=arb.scene.gripper_y,
                z=arb.scene.gripper_z, segment=self.segment,
            ))
        clutch = "-" if inp.clutch is None else str(int(inp.clutch))
        self.lines.append(
            f"step kind=manual tick={arb.tick_count} seq={inp.seq} "
            f"dx={_fmt(inp.dx)} dy={_fmt(inp.dy)} dz={_fmt(inp.dz)} "
            f"droll={_fmt(inp.droll)} clutch={clutch} resume={int(inp.resume)} "
            f"applied={'submit' if applied_at_submit else 'tick'} "
            + self._pose_suffix()
        )

    def tick_autonomous(self) -> None:
        arb = self.arb
        before = len(arb.events)
        kind = "auto" if arb.phase is ControlPhase.AUTO_COARSE else "reset"
        arb.tick()
        self._absorb_events(arb.events[before:])
        if kind == "auto":
            self.lines.append(
                f"step kind=auto tick={arb.tick_count} "
                f"action={arb.last_auto_action} " + self._pose_suffix()
            )
        else:
            self.lines.append(
                f"step kind=reset tick={arb.tick_count} " + self._pose_suffix()
            )

    def tick_idle(self) -> None:
        """Manual-phase tick with no pending operator input (live sessions)."""
        arb = self.arb
        before = len(arb.events)
        arb.tick()
        self._absorb_events(arb.events[before:])
        self.lines.append(
            f"step kind=idle tick={arb.tick_count} " + self._pose_suffix()
        )

    def finish(self) -> TrialResult:
        arb = self.arb
        completed = arb.phase is ControlPhase.TRIAL_COMPLETE
        if completed:
            self.record.completion_ms = arb.time_ms
        m = travel_length(self.record) if self.record.samples else 0.0
        t = completion_time(self.record) if self.record.completed else 0.0
        self.lines.append(
            f"summary completed={int(completed)} legs={arb.completed_legs} "
            f"ticks={arb.tick_count} m_mm={_fmt(m)} t_s={_fmt(t)}"
        )
        return TrialResult(
            record=self.record,
            events=list(arb.events),
            log_lines=self.lines,
            ticks=arb.tick_count,
            completed=completed,
        )


def run_trial(
    mode: TrialMode,
    seed: int,
    env_config: EnvConfig | None = None,
    agent=None,
    plan: TrialPlan | None = None,
    arb_config: ArbiterConfig | None = None,
    max_ticks: int = 20_000,
) -> TrialResult:
    """Run one scripted trial with the virtual operator.

    Semi-autonomous mode needs a coarse policy in ``agent``; fully manual
    mode never queries it, because the operator's motion input takes the
    autonomous phase over the moment it arrives.
    """
    env_config = env_config or EnvConfig()
    plan = plan or default_trial_plan()
    arb_config = arb_config or ArbiterConfig()
    if mode is TrialMode.SEMI_AUTONOMOUS and agent is None:
        raise ValueError("semi-autonomous trials need a coarse policy")

    driver = _TrialDriver(mode, seed, env_config, agent, plan, arb_config)
    seq = 0
    while (driver.arb.phase is not ControlPhase.TRIAL_COMPLETE
           and driver.arb.tick_count < max_ticks):
        if driver.wants_input():
            seq += 1
            inp = virtual_operator(driver.arb.scene, driver.arb.current_leg,
                                   env_config, arb_config,
                                   timestamp_ms=driver.arb.time_ms, seq=seq)
            driver.tick_with_input(inp)
        else:
            driver.tick_autonomous()
    return driver.finish()


class _ScriptedAgent:
    """Feeds logged autonomous actions back into the arbiter."""

    def __init__(self) -> None:
        self.next_action: int | None = None

    def __call__(self, scene) -> int:
        if self.next_action is None:
            raise ReplayMismatchError("log requests no autonomous action here")
        action, self.next_action = self.next_action, None
        return action


def _expect_pose(fields: dict[str, str], driver: _TrialDriver, line_no: int) -> None:
    scene = driver.arb.scene
    got = {
        "x": scene.gripper_x, "y": scene.gripper_y,
        "z": scene.gripper_z, "roll": scene.gripper_roll,
    }
    for key, value in got.items():
        if float(fields[key]) != value:
            raise ReplayMismatchError(
                f"line {line_no}: replayed {key}={value!r} but log says {fields[key]}"
            )


def replay_trial(
    log_lines: list[str],
    env_config: EnvConfig | None = None,
    plan: TrialPlan | None = None,
    arb_config: ArbiterConfig | None = None,
) -> TrialResult:
    """Re-simulate a trial log and verify poses and summary metrics.

    Raises ReplayMismatchError on any divergence, including edited poses,
    inputs, or summary values.
    """
    env_config = env_config or EnvConfig()
    plan = plan or default_trial_plan()
    arb_config = arb_config or ArbiterConfig()

    kind, header = parse_kv_line(log_lines[0])
    if kind != "trial":
        raise ReplayMismatchError("log does not start with a trial header")
    if int(header.get("version", -1)) != TRIAL_LOG_VERSION:
        raise ReplayMismatchError(f"unsupported trial log version {header.get('version')}")
    mode = TrialMode(header["mode"])
    seed = int(header["seed"])
    if int(header["legs"]) != len(plan.legs):
        raise ReplayMismatchError("plan length differs from the logged trial")

    agent = _ScriptedAgent()
    driver = _TrialDriver(mode, seed, env_config, agent, plan, arb_config)

    summary: dict[str, str] | None = None
    for line_no, line in enumerate(log_lines[1:], start=2):
        kind, fields = parse_kv_line(line)
        if kind == "summary":
            summary = fields
            break
        if kind != "step":
            raise ReplayMismatchError(f"line {line_no}: unknown record {kind!r}")
        step_kind = fields["kind"]
        if step_kind == "auto":
            agent.next_action = int(fields["action"])
            driver.tick_autonomous()
        elif step_kind == "reset":
            driver.tick_autonomous()
        elif step_kind == "idle":
            driver.tick_idle()
        elif step_kind == "manual":
            inp = OperatorInput(
                dx=float(fields["dx"]), dy=float(fields["dy"]),
                dz=float(fields["dz"]), droll=float(fields["droll"]),
                clutch=None if fields["clutch"] == "-" else fields["clutch"] == "1",
                resume=fields["resume"] == "1",
                seq=int(fields["seq"]),
            )
            driver.tick_with_input(inp)
        else:
            raise ReplayMismatchError(f"line {line_no}: unknown step kind {step_kind!r}")
        _expect_pose(fields, driver, line_no)
        if int(fields["tick"]) != driver.arb.tick_count:
            raise ReplayMismatchError(f"line {line_no}: tick count diverged")

    if summary is None:
        raise ReplayMismatchError("log carries no summary record")
    result = driver.finish()
    recomputed_m = travel_length(result.record) if result.record.samples else 0.0
    recomputed_t = completion_time(result.record) if result.record.completed else 0.0
    if float(summary["m_mm"]) != recomputed_m:
        raise ReplayMismatchError(
            f"travel length mismatch: log {summary['m_mm']}, replay {recomputed_m!r}"
        )
    if float(summary["t_s"]) != recomputed_t:
        raise ReplayMismatchError(
            f"completion time mismatch: log {summary['t_s']}, replay {recomputed_t!r}"
        )
    if int(summary["completed"]) != int(result.completed):
        raise ReplayMismatchError("completion flag mismatch")
    return result
