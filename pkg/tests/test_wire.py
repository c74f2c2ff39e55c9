from __future__ import annotations

import json
import struct

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpmcts.history import EMPTY_HISTORY, HistoryRow, HistoryTable, SiblingStat, history_append
from mpmcts.wire import (
    MAX_FRAME_BYTES,
    FrameDecoder,
    Message,
    MessageKind,
    TransportFault,
    canonical_dumps,
    decode,
    encode,
)


def make_history(rows=3):
    table = EMPTY_HISTORY
    for depth in range(rows):
        table = history_append(
            table,
            HistoryRow(
                parent_key=depth * 11,
                chosen_action=depth % 3,
                chosen_key=depth * 11 + 1,
                entries=(
                    SiblingStat(0, -0.25, depth, 1),
                    SiblingStat(1, 0.5, depth + 2, 0),
                ),
            ),
        )
    return table


class TestRoundTrip:
    def test_stop(self):
        msg = Message(kind=MessageKind.STOP, src=0, dest=3, seq=1)
        assert decode(encode(msg)) == msg

    def test_backprop_boundary_reward(self):
        msg = Message(
            kind=MessageKind.BACKPROP,
            src=2,
            dest=0,
            seq=9,
            key=0xDEADBEEF,
            path=(1, 0, 2),
            reward=-1.0,
        )
        decoded = decode(encode(msg))
        assert decoded.reward == -1.0
        assert decoded == msg

    def test_history_payload(self):
        msg = Message(
            kind=MessageKind.SELECT,
            src=1,
            dest=2,
            seq=4,
            key=123,
            path=(0, 1),
            history=make_history(3),
            child_stats={"w": 0.5, "v": 3, "t": 1},
        )
        decoded = decode(encode(msg))
        assert decoded == msg
        assert decoded.history.rows == msg.history.rows

    def test_report_with_best(self):
        msg = Message(
            kind=MessageKind.REPORT,
            src=3,
            dest=0,
            seq=2,
            best_found=(0.75, "a.b\nc"),
        )
        assert decode(encode(msg)) == msg

    def test_field_order_is_fixed(self):
        msg = Message(kind=MessageKind.STOP, src=0, dest=1, seq=1)
        body = encode(msg)[4:].decode()
        keys = list(json.loads(body))
        assert keys == [
            "kind", "src", "dest", "seq", "key", "path",
            "reward", "child_stats", "history", "best_found",
        ]
        assert '"reward":null' in body  # absent fields are explicit nulls


class TestFaults:
    def test_unknown_kind(self):
        frame = encode(Message(kind=MessageKind.STOP, src=0, dest=1, seq=1))
        tampered = frame.replace(b'"STOP"', b'"BOOM"')
        tampered = struct.pack(">I", len(tampered) - 4) + tampered[4:]
        with pytest.raises(TransportFault):
            decode(tampered)

    def test_oversize_length_prefix(self):
        frame = struct.pack(">I", MAX_FRAME_BYTES + 1) + b"x"
        with pytest.raises(TransportFault):
            decode(frame)

    def test_length_mismatch(self):
        frame = struct.pack(">I", 10) + b"short"
        with pytest.raises(TransportFault):
            decode(frame)

    def test_garbage_body(self):
        body = b"not json"
        with pytest.raises(TransportFault):
            decode(struct.pack(">I", len(body)) + body)


class TestFrameDecoder:
    def test_incremental_feed(self):
        msg = Message(kind=MessageKind.STOP, src=0, dest=1, seq=1)
        frame = encode(msg)
        decoder = FrameDecoder()
        assert decoder.feed(frame[:3]) == []
        assert decoder.feed(frame[3:7]) == []
        assert decoder.feed(frame[7:]) == [msg]

    def test_multiple_frames_one_chunk(self):
        msgs = [
            Message(kind=MessageKind.STOP, src=0, dest=1, seq=i) for i in (1, 2, 3)
        ]
        blob = b"".join(encode(m) for m in msgs)
        assert FrameDecoder().feed(blob) == msgs

    def test_oversize_stream_faults(self):
        decoder = FrameDecoder()
        with pytest.raises(TransportFault):
            decoder.feed(struct.pack(">I", MAX_FRAME_BYTES + 1))


# property: decode . encode == id over generated messages

paths = st.lists(st.integers(0, 63), max_size=6).map(tuple)
rewards = st.one_of(st.none(), st.floats(-1, 1, allow_nan=False))
sibling = st.tuples(
    st.integers(0, 7), st.floats(-8, 8, allow_nan=False), st.integers(0, 99), st.integers(0, 9)
)
history_rows = st.lists(
    st.tuples(st.integers(0, 2**64 - 1), st.integers(0, 7), st.integers(0, 2**64 - 1),
              st.lists(sibling, min_size=1, max_size=5)),
    max_size=4,
)


def build_history(rows):
    table = HistoryTable(
        tuple(
            HistoryRow(pk, ca, ck, tuple(SiblingStat(*e) for e in entries))
            for pk, ca, ck, entries in rows
        )
    )
    return table


messages = st.builds(
    Message,
    kind=st.sampled_from(list(MessageKind)),
    src=st.integers(0, 15),
    dest=st.integers(0, 15),
    seq=st.integers(1, 2**31),
    key=st.integers(0, 2**64 - 1),
    path=paths,
    reward=rewards,
    child_stats=st.one_of(
        st.none(),
        st.dictionaries(st.text("abcdfgh", min_size=1, max_size=4),
                        st.one_of(st.integers(-9, 9), st.floats(-2, 2, allow_nan=False)),
                        max_size=3),
    ),
    history=st.one_of(st.none(), history_rows.map(build_history)),
    best_found=st.one_of(
        st.none(),
        st.tuples(st.floats(-1, 1, allow_nan=False), st.text(max_size=12)),
    ),
)


@given(messages)
def test_codec_totality(msg):
    assert decode(encode(msg)) == msg


def test_canonical_shortest_decimals():
    assert canonical_dumps({"x": 0.1}) == '{"x":0.1}'
    assert canonical_dumps({"x": 1 / 3}) == '{"x":0.3333333333333333}'
    value = 0.1 + 0.2
    assert json.loads(canonical_dumps({"x": value}))["x"] == value


def test_canonical_rejects_nan():
    with pytest.raises(ValueError):
        canonical_dumps({"x": float("nan")})
