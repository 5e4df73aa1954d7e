"""Session server, wire protocol, and command-line interface."""

from .protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    decode,
    encode,
    hello_message,
    input_to_operator_input,
    state_message,
)
from .server import SessionServer

__all__ = [
    "PROTOCOL_VERSION",
    "ProtocolError",
    "SessionServer",
    "decode",
    "encode",
    "hello_message",
    "input_to_operator_input",
    "state_message",
]
