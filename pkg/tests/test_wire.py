import struct

import pytest
from hypothesis import given, settings, strategies as st

from amtgraph.errors import DecodeError
from amtgraph.transport.wire import (
    HEADER_SIZE,
    WIRE_VERSION,
    Envelope,
    ack_payload,
    decode,
    decode_one,
    encode,
    parse_ack,
)

envelopes = st.builds(
    Envelope,
    src=st.integers(0, 2**32 - 1),
    dst=st.integers(0, 2**32 - 1),
    tag=st.integers(0, 255),
    request_id=st.integers(0, 2**64 - 1),
    payload=st.binary(max_size=512),
)


def test_empty_frame_size():
    frame = encode(Envelope(0, 1, 0x01, 0, b""))
    assert len(frame) == HEADER_SIZE == 28
    assert struct.unpack_from("<I", frame)[0] == len(frame) - 4
    assert frame[4] == WIRE_VERSION


@settings(max_examples=1000, deadline=None)
@given(envelopes)
def test_round_trip(env):
    assert decode_one(encode(env)) == env


@settings(max_examples=50, deadline=None)
@given(st.lists(envelopes, min_size=1, max_size=8))
def test_stream_decode(envs):
    buf = b"".join(map(encode, envs))
    off, out = 0, []
    while off < len(buf):
        env, off = decode(buf, off)
        out.append(env)
    assert out == envs


def test_length_prefix_exceeds_data():
    frame = encode(Envelope(0, 1, 2, 3, b"abcdef"))
    with pytest.raises(DecodeError) as ei:
        decode(frame[:-2])
    assert ei.value.offset == 0
    assert "byte" in str(ei.value)


def test_truncated_prefix():
    with pytest.raises(DecodeError):
        decode(b"\x01\x00")


def test_bad_version_and_reserved():
    frame = bytearray(encode(Envelope(0, 1, 2, 3, b"x")))
    bad = bytes(frame[:4]) + bytes([9]) + bytes(frame[5:])
    with pytest.raises(DecodeError, match="version"):
        decode(bad)
    frame[6] = 1
    with pytest.raises(DecodeError):
        decode(bytes(frame))


def test_offset_reported_for_second_frame():
    good = encode(Envelope(0, 1, 2, 3, b""))
    with pytest.raises(DecodeError) as ei:
        decode(good + good[:10], len(good))
    assert ei.value.offset == len(good)


def test_trailing_bytes_rejected_by_decode_one():
    good = encode(Envelope(0, 1, 2, 3, b""))
    with pytest.raises(DecodeError):
        decode_one(good + b"\x00")


def test_ack_payload_round_trip():
    assert parse_ack(ack_payload(7)) == (7, None, b"")
    assert parse_ack(ack_payload(8, result=b"\x01")) == (8, None, b"\x01")
    req, err, _ = parse_ack(ack_payload(9, error=ValueError("boom")))
    assert req == 9 and "boom" in err
