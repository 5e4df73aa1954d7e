"""Session server: one simulation, one operator connection, fixed tick rate.

The server speaks newline-delimited JSON over a plain TCP socket and, on
the same port, over WebSocket (the first bytes of a connection decide: an
HTTP GET upgrades to WebSocket, anything else is treated as raw JSON
lines). Network reads happen on a reader thread that feeds an ordered
queue; the simulation loop owns the arbiter and drains at most one input
per tick, so inputs apply in arrival order at the configured rate.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import queue
import socket
import struct
import threading
import time

from ..arbiter import ControlPhase, OperatorInput
from ..config import AppConfig
from ..metrics import TrialMode
from ..trials import _TrialDriver, default_trial_plan
from . import protocol

log = logging.getLogger(__name__)

__all__ = ["SessionServer"]

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class _Transport:
    """Line transport over raw TCP."""

    def __init__(self, sock: socket.socket, initial: bytes = b"") -> None:
        self.sock = sock
        self._buffer = bytearray(initial)

    def send_line(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8"))

    def recv_line(self, timeout: float | None = None) -> str | None:
        self.sock.settimeout(timeout)
        while b"\n" not in self._buffer:
            try:
                chunk = self.sock.recv(4096)
            except socket.timeout:
                return None
            if not chunk:
                raise ConnectionError("peer closed")
            self._buffer.extend(chunk)
        line, _, rest = bytes(self._buffer).partition(b"\n")
        self._buffer = bytearray(rest)
        return line.decode("utf-8")

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class _WebSocketTransport(_Transport):
    """Minimal RFC 6455 server-side transport; one JSON line per text frame."""

    def __init__(self, sock: socket.socket, request: bytes) -> None:
        super().__init__(sock)
        key = None
        for raw_line in request.split(b"\r\n"):
            if raw_line.lower().startswith(b"sec-websocket-key:"):
                key = raw_line.split(b":", 1)[1].strip().decode("ascii")
        if key is None:
            raise ConnectionError("websocket handshake without a key")
        accept = base64.b64encode(
            hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
        ).decode("ascii")
        sock.sendall(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\n"
            b"Connection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + accept.encode("ascii") + b"\r\n\r\n"
        )

    def _recv_exact(self, n: int) -> bytes:
        out = bytearray()
        while len(out) < n:
            chunk = self.sock.recv(n - len(out))
            if not chunk:
                raise ConnectionError("peer closed")
            out.extend(chunk)
        return bytes(out)

    def send_line(self, line: str) -> None:
        payload = line.rstrip("\n").encode("utf-8")
        header = bytearray([0x81])  # FIN + text
        n = len(payload)
        if n < 126:
            header.append(n)
        elif n < 1 << 16:
            header.append(126)
            header.extend(struct.pack(">H", n))
        else:
            header.append(127)
            header.extend(struct.pack(">Q", n))
        self.sock.sendall(bytes(header) + payload)

    def recv_line(self, timeout: float | None = None) -> str | None:
        self.sock.settimeout(timeout)
        while True:
            try:
                first = self._recv_exact(2)
            except socket.timeout:
                return None
            opcode = first[0] & 0x0F
            masked = first[1] & 0x80
            length = first[1] & 0x7F
            if length == 126:
                length = struct.unpack(">H", self._recv_exact(2))[0]
            elif length == 127:
                length = struct.unpack(">Q", self._recv_exact(8))[0]
            mask = self._recv_exact(4) if masked else b"\x00" * 4
            payload = bytearray(self._recv_exact(length))
            for i in range(length):
                payload[i] ^= mask[i % 4]
            if opcode == 0x8:
                raise ConnectionError("websocket close")
            if opcode == 0x9:  # ping -> pong
                self.sock.sendall(bytes([0x8A, len(payload)]) + bytes(payload))
                continue
            if opcode in (0x1, 0x2):
                return payload.decode("utf-8")


def _open_transport(sock: socket.socket) -> _Transport:
    sock.settimeout(5.0)
    peek = sock.recv(4, socket.MSG_PEEK)
    if peek.startswith(b"GET"):
        request = bytearray()
        while b"\r\n\r\n" not in request:
            chunk = sock.recv(4096)
            if not chunk:
                raise ConnectionError("peer closed during handshake")
            request.extend(chunk)
        return _WebSocketTransport(sock, bytes(request))
    return _Transport(sock)


class SessionServer:
    """Runs the arbiter tick loop for one operator connection at a time."""

    def __init__(
        self,
        config: AppConfig,
        agent,
        mode: TrialMode = TrialMode.SEMI_AUTONOMOUS,
        seed: int = 0,
        trial_log_path: str | None = None,
        realtime: bool = True,
    ) -> None:
        self.config = config
        self.agent = agent
        self.mode = mode
        self.seed = seed
        self.trial_log_path = trial_log_path
        self.realtime = realtime
        self._listener: socket.socket | None = None
        self._stop = threading.Event()
        self.port: int | None = None
        self.sessions_served = 0

    # -- lifecycle -------------------------------------------------------

    def bind(self) -> int:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.gateway.host, self.config.gateway.port))
        listener.listen(1)
        listener.settimeout(0.25)
        self._listener = listener
        self.port = listener.getsockname()[1]
        return self.port

    def stop(self) -> None:
        self._stop.set()

    def serve_forever(self, max_sessions: int | None = None) -> None:
        if self._listener is None:
            self.bind()
        assert self._listener is not None
        try:
            while not self._stop.is_set():
                try:
                    sock, addr = self._listener.accept()
                except socket.timeout:
                    continue
                log.info("session from %s", addr)
                try:
                    self._run_session(sock)
                except ConnectionError as exc:
                    log.info("session ended: %s", exc)
                finally:
                    self.sessions_served += 1
                if max_sessions is not None and self.sessions_served >= max_sessions:
                    return
        finally:
            self._listener.close()

    # -- one session -----------------------------------------------------

    def _write_trial_log(self, driver: _TrialDriver) -> None:
        result = driver.finish()
        if self.trial_log_path:
            with open(self.trial_log_path, "a", encoding="utf-8") as fh:
                for line in result.log_lines:
                    fh.write(line + "\n")

    def _new_driver(self, seed: int, mode: TrialMode) -> _TrialDriver:
        from ..arbiter import ArbiterConfig

        arb_cfg = self.config.arbiter
        if arb_cfg.tick_rate_hz != self.config.gateway.tick_rate_hz:
            arb_cfg = ArbiterConfig(
                deadband_mm=arb_cfg.deadband_mm,
                deadband_rad=arb_cfg.deadband_rad,
                cap_mm=arb_cfg.cap_mm,
                cap_rad=arb_cfg.cap_rad,
                coarse_budget=arb_cfg.coarse_budget,
                tick_rate_hz=self.config.gateway.tick_rate_hz,
            )
        return _TrialDriver(mode, seed, self.config.env, self.agent,
                            default_trial_plan(), arb_cfg)

    def _run_session(self, sock: socket.socket) -> None:
        # The client speaks first (an HTTP GET for websocket or its hello
        # line for raw TCP), which is also what lets the transport sniffing
        # see any bytes at all.
        transport = _open_transport(sock)
        first = transport.recv_line(timeout=5.0)
        if first is None:
            transport.close()
            return
        try:
            msg = protocol.decode(first)
            if msg["type"] != "hello" or msg["version"] != protocol.PROTOCOL_VERSION:
                raise protocol.ProtocolError(
                    f"protocol version mismatch: server speaks {protocol.PROTOCOL_VERSION}"
                )
        except protocol.ProtocolError as exc:
            transport.send_line(protocol.encode(protocol.error_message(str(exc))))
            transport.close()
            return
        transport.send_line(protocol.encode(protocol.hello_message()))

        inputs: queue.Queue = queue.Queue()
        disconnected = threading.Event()

        def reader() -> None:
            while not disconnected.is_set() and not self._stop.is_set():
                try:
                    line = transport.recv_line(timeout=0.2)
                except ConnectionError:
                    disconnected.set()
                    return
                if line is None:
                    continue
                try:
                    inputs.put(protocol.decode(line))
                except protocol.ProtocolError as exc:
                    try:
                        transport.send_line(protocol.encode(
                            protocol.error_message(str(exc), exc.position)))
                    except OSError:
                        disconnected.set()
                        return

        reader_thread = threading.Thread(target=reader, daemon=True)
        reader_thread.start()

        driver = self._new_driver(self.seed, self.mode)
        tick_period = 1.0 / self.config.gateway.tick_rate_hz
        next_tick = time.monotonic()
        try:
            transport.send_line(protocol.encode(protocol.state_message(driver.arb)))
            while not self._stop.is_set() and not disconnected.is_set():
                if self.realtime:
                    now = time.monotonic()
                    if now < next_tick:
                        time.sleep(next_tick - now)
                    next_tick += tick_period
                pending: OperatorInput | None = None
                while pending is None and not inputs.empty():
                    msg = inputs.get_nowait()
                    if msg["type"] == "input":
                        pending = protocol.input_to_operator_input(msg)
                    elif msg["type"] == "resume":
                        pending = OperatorInput(resume=True, seq=int(msg.get("seq", 0)))
                    elif msg["type"] == "reset":
                        self._write_trial_log(driver)
                        driver = self._new_driver(
                            int(msg.get("seed", self.seed)),
                            TrialMode(msg.get("mode", self.mode.value)),
                        )
                    elif msg["type"] == "hello":
                        pass
                    else:
                        transport.send_line(protocol.encode(protocol.error_message(
                            f"unexpected message type {msg['type']!r}")))

                before_events = len(driver.arb.events)
                phase = driver.arb.phase
                if phase is ControlPhase.TRIAL_COMPLETE:
                    driver.arb.tick()  # clock keeps running, nothing to log
                elif pending is not None:
                    # the arbiter decides: apply, override, queue, or drop
                    driver.tick_with_input(pending)
                elif phase is ControlPhase.MANUAL_PRECISION:
                    driver.tick_idle()
                else:
                    driver.tick_autonomous()

                for event in driver.arb.events[before_events:]:
                    transport.send_line(protocol.encode(
                        protocol.event_message(event.tick, event.name, event.payload)))
                transport.send_line(protocol.encode(protocol.state_message(driver.arb)))
        except (ConnectionError, OSError) as exc:
            log.info("connection lost: %s", exc)
        finally:
            disconnected.set()
            self._write_trial_log(driver)
            transport.close()
            reader_thread.join(timeout=1.0)
