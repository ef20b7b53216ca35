"""Message framing for the teleoperation wire: one JSON object per line.

A message is a flat JSON object: the envelope fields (type, seq, t_s) plus
the type-specific payload fields at top level, serialized with sorted keys
and terminated by a single newline.  Decoding distinguishes malformed
JSON, unknown type, and missing/mis-typed envelope fields so a server can
report each without dropping the connection.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import (
    CodecError,
    MalformedFrameError,
    MissingFieldError,
    UnknownTypeError,
)

ENVELOPE_FIELDS = ("type", "seq", "t_s")

MESSAGE_TYPES = frozenset({
    "hello", "jog", "set_mode", "arc", "probe_rotate", "record",
    "workflow_event", "vas", "estop", "reset",
    "telemetry", "frame", "event", "error", "session_complete",
})


@dataclass(frozen=True)
class Message:
    type: str
    seq: int
    t_s: float
    payload: dict = field(default_factory=dict)


@functools.lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("luscan.data").joinpath("protocol_schema.json").read_text("utf-8")
    return json.loads(text)


def encode(msg: Message) -> bytes:
    if msg.type not in MESSAGE_TYPES:
        raise CodecError(f"cannot encode unknown message type {msg.type!r}")
    for key in msg.payload:
        if key in ENVELOPE_FIELDS:
            raise CodecError(f"payload field {key!r} collides with the envelope")
    flat = {"type": msg.type, "seq": msg.seq, "t_s": msg.t_s, **msg.payload}
    try:
        text = json.dumps(flat, sort_keys=True, separators=(",", ":"),
                          allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise CodecError(f"payload not serializable: {exc}") from exc
    if "\n" in text:
        raise CodecError("encoded frame must not contain embedded newlines")
    return text.encode("utf-8") + b"\n"


def decode(frame: bytes | str) -> Message:
    if isinstance(frame, bytes):
        try:
            frame = frame.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFrameError(f"frame is not UTF-8: {exc}") from exc
    try:
        obj = json.loads(frame)
    except json.JSONDecodeError as exc:
        raise MalformedFrameError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrameError("frame must be a JSON object")
    mtype = obj.get("type")
    if not isinstance(mtype, str):
        raise MissingFieldError("missing or non-string 'type' field")
    if mtype not in MESSAGE_TYPES:
        raise UnknownTypeError(f"unknown message type {mtype!r}")
    seq = obj.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise MissingFieldError("missing or non-integer 'seq' field")
    t_s = obj.get("t_s")
    if isinstance(t_s, bool) or not isinstance(t_s, (int, float)):
        raise MissingFieldError("missing or non-numeric 't_s' field")
    payload = {k: v for k, v in obj.items() if k not in ENVELOPE_FIELDS}
    return Message(type=mtype, seq=seq, t_s=float(t_s), payload=payload)


def _check_field(name: str, value, spec: dict) -> list[str]:
    kind = spec["kind"]
    problems = []
    if kind == "string":
        if not isinstance(value, str):
            problems.append(f"{name}: expected string")
        elif "enum" in spec and value not in spec["enum"]:
            problems.append(f"{name}: {value!r} not in {spec['enum']}")
    elif kind == "integer":
        if not isinstance(value, int) or isinstance(value, bool):
            problems.append(f"{name}: expected integer")
    elif kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append(f"{name}: expected number")
    elif kind == "boolean":
        if not isinstance(value, bool):
            problems.append(f"{name}: expected boolean")
    elif kind == "object":
        if not isinstance(value, dict):
            problems.append(f"{name}: expected object")
    elif kind == "string_array":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            problems.append(f"{name}: expected array of strings")
    elif kind == "number_array":
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            problems.append(f"{name}: expected array of numbers")
    if not problems and isinstance(value, (int, float)) and not isinstance(value, bool):
        if "min" in spec and value < spec["min"]:
            problems.append(f"{name}: {value} below {spec['min']}")
        if "max" in spec and value > spec["max"]:
            problems.append(f"{name}: {value} above {spec['max']}")
    return problems


def validate_message(msg: Message, schema: dict | None = None) -> list[str]:
    """Structural problems of a message against the shared schema (empty = valid)."""
    schema = schema or load_schema()
    spec = schema["types"].get(msg.type)
    if spec is None:
        return [f"type {msg.type!r} not in schema"]
    problems = []
    if msg.seq < 0:
        problems.append("seq must be >= 0")
    if msg.t_s < 0:
        problems.append("t_s must be >= 0")
    fields = spec["payload"]
    for name, fspec in fields.items():
        if name in msg.payload:
            problems.extend(_check_field(name, msg.payload[name], fspec))
        elif fspec.get("required"):
            problems.append(f"missing required field {name!r}")
    if msg.type != "event":
        for name in msg.payload:
            if name not in fields:
                problems.append(f"unexpected field {name!r} for {msg.type}")
    return problems
