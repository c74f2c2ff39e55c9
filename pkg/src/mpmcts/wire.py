"""Bit-exact wire format and the canonical text encoding.

A frame is a 4-byte big-endian length prefix followed by a canonical JSON
record: fixed field order (kind, src, dest, seq, key, path, reward,
child_stats, history, best_found), absent fields as explicit null, no
whitespace, reals as the shortest round-tripping decimal.  The same
canonical encoding serializes run configs and run reports, so there is one
parser to get wrong instead of three.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Optional

from mpmcts.history import HistoryRow, HistoryTable, SiblingStat
from mpmcts.tree import NodeKey, NodePath

MAX_FRAME_BYTES = 16 * 1024 * 1024
_HEADER = struct.Struct(">I")


class TransportFault(Exception):
    """Malformed frame, oversized frame, or a broken connection."""


class MessageKind(Enum):
    SELECT = "SELECT"
    BACKPROP = "BACKPROP"
    REPORT = "REPORT"
    STOP = "STOP"


@dataclass(frozen=True)
class Message:
    """The wire unit.

    SELECT walks down (no reward); BACKPROP walks up carrying exactly one
    reward; REPORT and STOP are run-control plumbing.  ``child_stats`` is a
    free-form diagnostic mapping (for REPORT it carries the worker's
    counters); ``history`` rides along in the depth-first variants; ``seq``
    is strictly increasing per sender.
    """

    kind: MessageKind
    src: int
    dest: int
    seq: int
    key: NodeKey = 0
    path: NodePath = ()
    reward: Optional[float] = None
    child_stats: Optional[Mapping[str, Any]] = None
    history: Optional[HistoryTable] = None
    best_found: Optional[tuple[float, str]] = None


def canonical_dumps(obj: Any) -> str:
    """Canonical JSON: insertion-ordered keys, no whitespace, shortest
    round-tripping decimals, NaN/Inf rejected."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def canonical_dump_bytes(obj: Any) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def _history_to_obj(table: HistoryTable) -> list:
    return [
        [
            row.parent_key,
            row.chosen_action,
            row.chosen_key,
            [[e.action, e.w, e.v, e.t] for e in row.entries],
        ]
        for row in table.rows
    ]


def _history_from_obj(obj: list) -> HistoryTable:
    rows = []
    for parent_key, chosen_action, chosen_key, entries in obj:
        rows.append(
            HistoryRow(
                parent_key,
                chosen_action,
                chosen_key,
                tuple(SiblingStat(a, w, v, t) for a, w, v, t in entries),
            )
        )
    return HistoryTable(tuple(rows))


def message_to_obj(msg: Message) -> dict:
    return {
        "kind": msg.kind.value,
        "src": msg.src,
        "dest": msg.dest,
        "seq": msg.seq,
        "key": msg.key,
        "path": list(msg.path),
        "reward": msg.reward,
        "child_stats": dict(msg.child_stats) if msg.child_stats is not None else None,
        "history": _history_to_obj(msg.history) if msg.history is not None else None,
        "best_found": list(msg.best_found) if msg.best_found is not None else None,
    }


def message_from_obj(obj: Mapping[str, Any]) -> Message:
    try:
        kind = MessageKind(obj["kind"])
    except (KeyError, ValueError):
        raise TransportFault(f"unknown message kind {obj.get('kind')!r}") from None
    best = obj.get("best_found")
    return Message(
        kind=kind,
        src=obj["src"],
        dest=obj["dest"],
        seq=obj["seq"],
        key=obj["key"],
        path=tuple(obj["path"]),
        reward=obj["reward"],
        child_stats=obj["child_stats"],
        history=_history_from_obj(obj["history"]) if obj["history"] is not None else None,
        best_found=(best[0], best[1]) if best is not None else None,
    )


def encode(msg: Message) -> bytes:
    body = canonical_dump_bytes(message_to_obj(msg))
    if len(body) > MAX_FRAME_BYTES:
        raise TransportFault(
            f"frame of {len(body)} bytes exceeds max {MAX_FRAME_BYTES}"
        )
    return _HEADER.pack(len(body)) + body


def decode(data: bytes) -> Message:
    if len(data) < _HEADER.size:
        raise TransportFault(f"short frame: {len(data)} bytes")
    (length,) = _HEADER.unpack_from(data)
    if length > MAX_FRAME_BYTES:
        raise TransportFault(f"frame length {length} exceeds max {MAX_FRAME_BYTES}")
    body = data[_HEADER.size :]
    if len(body) != length:
        raise TransportFault(
            f"frame length mismatch: header says {length}, got {len(body)}"
        )
    return _decode_body(body)


def _decode_body(body: bytes) -> Message:
    try:
        obj = json.loads(body)
    except ValueError as exc:
        raise TransportFault(f"undecodable frame body: {exc}") from exc
    return message_from_obj(obj)


class FrameDecoder:
    """Incremental deframer for a byte stream of length-prefixed frames."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message]:
        self._buf.extend(data)
        out: list[Message] = []
        while True:
            if len(self._buf) < _HEADER.size:
                return out
            (length,) = _HEADER.unpack_from(self._buf)
            if length > MAX_FRAME_BYTES:
                raise TransportFault(
                    f"frame length {length} at offset 0 of buffered stream "
                    f"exceeds max {MAX_FRAME_BYTES}"
                )
            end = _HEADER.size + length
            if len(self._buf) < end:
                return out
            body = bytes(self._buf[_HEADER.size : end])
            del self._buf[:end]
            out.append(_decode_body(body))
