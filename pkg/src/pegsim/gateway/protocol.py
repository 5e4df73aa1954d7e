"""Line-delimited JSON wire protocol between the session server and the
operator client.

One message per line. Field values are what matters; byte layout is not
part of the contract. Decoding rejects unknown type tags and malformed
records (with the character position where parsing failed) but ignores
unknown fields inside known messages, which is what lets the two ends
evolve independently.

Message types and their required fields:

hello   {"type": "hello", "version": 1}
state   {"type": "state", "tick", "t_ms", "phase", "gripper": {x, y, z,
         roll}, "jaws_closed", "pegs": [{id, x, y, orientation, side,
         slot}], "target", "held", "leg", "legs_total", "seq"}
input   {"type": "input", "seq", "dx", "dy", "dz", "droll", "clutch"
         (optional), "resume" (optional), "t_ms" (optional)}
event   {"type": "event", "tick", "name", "payload"}
reset   {"type": "reset", "seed" (optional), "mode" (optional)}
resume  {"type": "resume"}
error   {"type": "error", "message", "position" (optional)}
"""

from __future__ import annotations

import json

from ..arbiter import Arbiter, OperatorInput
from ..sim_env import SceneState

__all__ = [
    "PROTOCOL_VERSION",
    "ProtocolError",
    "decode",
    "encode",
    "error_message",
    "hello_message",
    "input_to_operator_input",
    "state_message",
]

PROTOCOL_VERSION = 1

_REQUIRED: dict[str, tuple[str, ...]] = {
    "hello": ("version",),
    "state": ("tick", "phase", "gripper", "pegs", "target", "held", "leg", "seq"),
    "input": ("seq",),
    "event": ("tick", "name"),
    "reset": (),
    "resume": (),
    "error": ("message",),
}


class ProtocolError(ValueError):
    def __init__(self, message: str, position: int | None = None) -> None:
        super().__init__(message if position is None
                         else f"{message} (at position {position})")
        self.position = position


def encode(msg: dict) -> str:
    """Serialize one message to a single self-delimiting text line."""
    tag = msg.get("type")
    if tag not in _REQUIRED:
        raise ProtocolError(f"unknown message type {tag!r}")
    return json.dumps(msg, sort_keys=True, separators=(",", ":")) + "\n"


def decode(line: str) -> dict:
    """Parse one line; unknown fields pass through, unknown types do not."""
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed record: {exc.msg}", position=exc.pos) from exc
    if not isinstance(msg, dict):
        raise ProtocolError("record is not an object")
    tag = msg.get("type")
    if tag not in _REQUIRED:
        raise ProtocolError(f"unknown message type {tag!r}")
    missing = [key for key in _REQUIRED[tag] if key not in msg]
    if missing:
        raise ProtocolError(f"{tag} message missing field(s): {', '.join(missing)}")
    return msg


def hello_message() -> dict:
    return {"type": "hello", "version": PROTOCOL_VERSION}


def error_message(message: str, position: int | None = None) -> dict:
    msg = {"type": "error", "message": message}
    if position is not None:
        msg["position"] = position
    return msg


def state_message(arb: Arbiter) -> dict:
    """Project the arbiter's scene into a state message."""
    scene: SceneState = arb.scene
    return {
        "type": "state",
        "tick": arb.tick_count,
        "t_ms": arb.time_ms,
        "phase": arb.phase.value,
        "gripper": {
            "x": scene.gripper_x,
            "y": scene.gripper_y,
            "z": scene.gripper_z,
            "roll": scene.gripper_roll,
        },
        "jaws_closed": scene.jaws_closed,
        "pegs": [
            {
                "id": peg.id,
                "x": peg.x,
                "y": peg.y,
                "orientation": peg.side_orientation,
                "side": peg.side_length,
                "slot": peg.slot,
            }
            for peg in scene.pegs
        ],
        "target": scene.target_index,
        "held": scene.held_peg is not None,
        "leg": arb.leg_index,
        "legs_total": len(arb.plan.legs),
        "completed_legs": arb.completed_legs,
        "seq": arb.last_seq_applied,
    }


def event_message(tick: int, name: str, payload: dict) -> dict:
    return {"type": "event", "tick": tick, "name": name, "payload": payload}


def input_to_operator_input(msg: dict) -> OperatorInput:
    """Build an operator input from a decoded input message."""
    clutch = msg.get("clutch")
    return OperatorInput(
        dx=float(msg.get("dx", 0.0)),
        dy=float(msg.get("dy", 0.0)),
        dz=float(msg.get("dz", 0.0)),
        droll=float(msg.get("droll", 0.0)),
        clutch=None if clutch is None else bool(clutch),
        resume=bool(msg.get("resume", False)),
        timestamp_ms=float(msg.get("t_ms", 0.0)),
        seq=int(msg["seq"]),
    )
