"""Live teleoperation endpoint.

One listening port serves three client flavors: raw newline-delimited JSON
over TCP (the reference transport), a WebSocket upgrade at /ws carrying
the identical one-JSON-object-per-message schema, and plain HTTP GETs for
the operator-console static files.  Exactly one client holds the operator
role; everyone else observes.  All inbound messages funnel through one
queue into the simulation thread, which paces the physics to wall clock
and broadcasts telemetry; back-pressured observers lose telemetry but
never events or frames.
"""

from __future__ import annotations

import base64
import hashlib
import json
import queue
import socket
import struct
import threading
import time
from collections import deque
from importlib import resources
from pathlib import Path

from .errors import CodecError, InputError, ProtocolError
from .protocol import Message, decode, encode
from .session import SessionRuntime

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_TELEMETRY_BACKLOG = 20

COMMAND_TYPES = frozenset({
    "jog", "set_mode", "arc", "probe_rotate", "record",
    "workflow_event", "vas", "estop", "reset",
})


# -- websocket codec ---------------------------------------------------------

def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_text(payload: bytes, mask: bool = False) -> bytes:
    header = bytearray([0x81])
    n = len(payload)
    if n < 126:
        header.append(n | (0x80 if mask else 0))
    elif n < 1 << 16:
        header.append(126 | (0x80 if mask else 0))
        header += struct.pack(">H", n)
    else:
        header.append(127 | (0x80 if mask else 0))
        header += struct.pack(">Q", n)
    if mask:
        key = b"\x12\x34\x56\x78"
        header += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed")
        buf += chunk
    return buf


def ws_read_message(sock: socket.socket) -> str | None:
    """One text message; answers pings; None on close."""
    while True:
        head = _read_exact(sock, 2)
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        length = head[1] & 0x7F
        if length == 126:
            length = struct.unpack(">H", _read_exact(sock, 2))[0]
        elif length == 127:
            length = struct.unpack(">Q", _read_exact(sock, 8))[0]
        key = _read_exact(sock, 4) if masked else b""
        payload = _read_exact(sock, length) if length else b""
        if masked:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            return None
        if opcode == 0x9:  # ping -> pong
            sock.sendall(b"\x8a" + bytes([len(payload)]) + payload)
            continue
        if opcode in (0x1, 0x2):
            return payload.decode("utf-8")
        # ignore pong/continuation fragments from our simple clients


# -- client bookkeeping --------------------------------------------------------

class _Client:
    def __init__(self, cid: int, sock: socket.socket, kind: str):
        self.cid = cid
        self.sock = sock
        self.kind = kind  # "ndjson" | "ws"
        self.role = None  # assigned at hello
        self.last_seq = -1
        self.outbox: deque[bytes] = deque()
        self.telemetry_queued = 0
        self.lock = threading.Lock()
        self.wake = threading.Event()
        self.alive = True

    def enqueue(self, data: bytes, is_telemetry: bool) -> None:
        with self.lock:
            if not self.alive:
                return
            if is_telemetry:
                if self.telemetry_queued >= _TELEMETRY_BACKLOG:
                    return  # slow consumer: telemetry is droppable
                self.telemetry_queued += 1
            self.outbox.append((data, is_telemetry))
        self.wake.set()

    def writer_loop(self) -> None:
        while True:
            self.wake.wait(timeout=0.5)
            with self.lock:
                items = list(self.outbox)
                self.outbox.clear()
                self.telemetry_queued = 0
                self.wake.clear()
                alive = self.alive
            if not alive:
                return
            try:
                for data, _ in items:
                    if self.kind == "ws":
                        self.sock.sendall(ws_encode_text(data.rstrip(b"\n")))
                    else:
                        self.sock.sendall(data)
            except OSError:
                return

    def close(self) -> None:
        with self.lock:
            self.alive = False
        self.wake.set()
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class Broadcaster:
    """Fan-out sink handed to the session runtime."""

    def __init__(self, server: "Server"):
        self.server = server

    def send(self, msg: Message) -> None:
        data = encode(msg)
        is_telemetry = msg.type == "telemetry"
        for client in list(self.server.clients.values()):
            if client.role is None:
                continue
            client.enqueue(data, is_telemetry)


class Server:
    def __init__(self, cfg: dict, port: int = 0, host: str = "127.0.0.1",
                 out_dir=None, console_dir=None):
        self.cfg = cfg
        self.host = host
        self.console_dir = Path(console_dir) if console_dir else None
        self.clients: dict[int, _Client] = {}
        self.operator_cid: int | None = None
        self.inbound: queue.Queue = queue.Queue()
        self.runtime = SessionRuntime(cfg, out_dir=out_dir,
                                      broadcaster=Broadcaster(self))
        self._next_cid = 0
        self._running = threading.Event()
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self.port = self._listener.getsockname()[1]
        self._threads: list[threading.Thread] = []

    # -- lifecycle ----------------------------------------------------------------

    def start(self) -> None:
        self._running.set()
        self._listener.listen(16)
        for target in (self._accept_loop, self._sim_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> int:
        self._running.clear()
        try:
            self._listener.close()
        except OSError:
            pass
        for client in list(self.clients.values()):
            client.close()
        for t in self._threads:
            t.join(timeout=2.0)
        return self.runtime.finalize()

    def serve_forever(self) -> int:
        self.start()
        try:
            while self._running.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        return self.stop()

    # -- accepting -----------------------------------------------------------------

    def _accept_loop(self) -> None:
        while self._running.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._dispatch_conn, args=(sock,),
                             daemon=True).start()

    def _dispatch_conn(self, sock: socket.socket) -> None:
        try:
            head = sock.recv(4, socket.MSG_PEEK)
        except OSError:
            sock.close()
            return
        if head.startswith(b"GET "):
            self._handle_http(sock)
        else:
            self._register_client(sock, "ndjson")

    def _register_client(self, sock: socket.socket, kind: str) -> None:
        self._next_cid += 1
        client = _Client(self._next_cid, sock, kind)
        self.clients[client.cid] = client
        threading.Thread(target=client.writer_loop, daemon=True).start()
        threading.Thread(target=self._reader_loop, args=(client,),
                         daemon=True).start()

    def _reader_loop(self, client: _Client) -> None:
        try:
            if client.kind == "ws":
                while True:
                    text = ws_read_message(client.sock)
                    if text is None:
                        break
                    self.inbound.put((client.cid, text))
            else:
                buf = b""
                while True:
                    chunk = client.sock.recv(4096)
                    if not chunk:
                        break
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        if line.strip():
                            self.inbound.put((client.cid, line.decode("utf-8", "replace")))
        except (OSError, ConnectionError):
            pass
        finally:
            self.inbound.put((client.cid, None))

    # -- http / websocket ------------------------------------------------------------

    def _handle_http(self, sock: socket.socket) -> None:
        try:
            request = b""
            while b"\r\n\r\n" not in request:
                chunk = sock.recv(4096)
                if not chunk:
                    sock.close()
                    return
                request += chunk
            head = request.split(b"\r\n\r\n", 1)[0].decode("utf-8", "replace")
            lines = head.split("\r\n")
            path = lines[0].split(" ")[1]
            headers = {}
            for line in lines[1:]:
                if ":" in line:
                    k, v = line.split(":", 1)
                    headers[k.strip().lower()] = v.strip()
            if headers.get("upgrade", "").lower() == "websocket":
                key = headers.get("sec-websocket-key", "")
                sock.sendall(
                    b"HTTP/1.1 101 Switching Protocols\r\n"
                    b"Upgrade: websocket\r\nConnection: Upgrade\r\n"
                    b"Sec-WebSocket-Accept: " + ws_accept_key(key).encode() + b"\r\n\r\n"
                )
                self._register_client(sock, "ws")
                return
            self._serve_static(sock, path)
        except OSError:
            sock.close()

    def _serve_static(self, sock: socket.socket, path: str) -> None:
        body, ctype, status = b"not found", "text/plain", 404
        if path == "/schema.json":
            body = resources.files("luscan.data").joinpath(
                "protocol_schema.json").read_bytes()
            ctype, status = "application/json", 200
        elif path.startswith("/console") and self.console_dir:
            rel = path[len("/console"):].split("?")[0].lstrip("/") or "index.html"
            root = self.console_dir.resolve()
            target = (root / rel).resolve()
            if target.is_file() and (root == target.parent or root in target.parents):
                body = target.read_bytes()
                status = 200
                ctype = {
                    ".html": "text/html", ".js": "text/javascript",
                    ".css": "text/css", ".json": "application/json",
                    ".map": "application/json",
                }.get(target.suffix, "application/octet-stream")
        response = (
            f"HTTP/1.1 {status} {'OK' if status == 200 else 'Not Found'}\r\n"
            f"Content-Type: {ctype}\r\nContent-Length: {len(body)}\r\n"
            f"Connection: close\r\n\r\n"
        ).encode() + body
        try:
            sock.sendall(response)
        finally:
            sock.close()

    # -- simulation thread -------------------------------------------------------------

    def _sim_loop(self) -> None:
        dt = self.runtime.sim.dt_s
        next_wall = time.monotonic()
        while self._running.is_set():
            self.runtime.tick_recorder()
            self._drain_inbound()
            self.runtime.step_core()
            next_wall += dt
            now = time.monotonic()
            if next_wall - now > 0:
                time.sleep(next_wall - now)
            elif now - next_wall > 0.25:
                next_wall = now  # fell far behind: drop the backlog

    def _drain_inbound(self) -> None:
        while True:
            try:
                cid, raw = self.inbound.get_nowait()
            except queue.Empty:
                return
            client = self.clients.get(cid)
            if client is None:
                continue
            if raw is None:
                self._client_gone(client)
                continue
            msg = self._decode_or_reply(client, raw)
            if msg is None:
                continue
            if msg.seq <= client.last_seq:
                self._reply_error(client, "bad_seq",
                                  f"seq {msg.seq} not above {client.last_seq}")
                continue
            client.last_seq = msg.seq
            if client.role is None:
                self._handle_hello(client, msg)
                continue
            if msg.type == "hello":
                self._reply_error(client, "already_joined", "hello already done")
                continue
            if msg.type in COMMAND_TYPES and client.role != "operator":
                self._reply_error(client, "observer_role",
                                  "observers cannot send commands")
                continue
            if msg.type not in COMMAND_TYPES and msg.type != "event":
                self._reply_error(client, "rejected",
                                  f"{msg.type} is not accepted inbound")
                continue
            try:
                self.runtime.handle_message(msg)
            except (ProtocolError, InputError) as exc:
                self._reply_error(client, "rejected", str(exc))

    def _decode_or_reply(self, client: _Client, raw: str) -> Message | None:
        try:
            return decode(raw)
        except CodecError as exc:
            code = {"MalformedFrameError": "malformed",
                    "UnknownTypeError": "unknown_type",
                    "MissingFieldError": "missing_field"}.get(type(exc).__name__, "codec")
            self._reply_error(client, code, str(exc))
            return None

    def _handle_hello(self, client: _Client, msg: Message) -> None:
        if msg.type != "hello":
            self._reply_error(client, "hello_required",
                              "first message must be hello")
            return
        wanted = msg.payload.get("role", "observer")
        if wanted == "operator" and self.operator_cid is None:
            client.role = "operator"
            self.operator_cid = client.cid
        else:
            if wanted == "operator":
                self._reply_error(client, "role_taken",
                                  "an operator is already connected")
            client.role = "observer"
        self.runtime.handle_message(msg)
        self._reply(client, "event", {"kind": "role", "role": client.role,
                                      "world": self._world_info()})

    def _world_info(self) -> dict:
        cfg = self.cfg
        return {
            "torso": {
                "width_mm": cfg["torso"]["width_mm"],
                "depth_mm": cfg["torso"]["depth_mm"],
                "height_mm": cfg["torso"]["height_mm"],
                "center_mm": list(cfg["torso"]["center_mm"]),
            },
            "safety": {"warn_N": cfg["safety"]["warn_N"],
                       "estop_N": cfg["safety"]["estop_N"]},
            "le_mm": cfg["endeffector"]["le_mm"],
            "image": {"width_px": cfg["image"]["width_px"],
                      "height_px": cfg["image"]["height_px"]},
        }

    def _client_gone(self, client: _Client) -> None:
        client.close()
        self.clients.pop(client.cid, None)
        if client.cid == self.operator_cid:
            self.operator_cid = None
            self.runtime.operator_disconnected()

    def _reply(self, client: _Client, mtype: str, payload: dict) -> None:
        self.runtime._out_seq += 1
        msg = Message(type=mtype, seq=self.runtime._out_seq,
                      t_s=self.runtime.sim.state.t_s, payload=payload)
        client.enqueue(encode(msg), is_telemetry=False)

    def _reply_error(self, client: _Client, code: str, detail: str) -> None:
        self._reply(client, "error", {"code": code, "detail": detail})
