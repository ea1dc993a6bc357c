"""Envelope and its little-endian wire frame.

Frame layout::

    u32 frame_length   bytes following this field
    u8  version        = 1
    u8  tag
    u16 reserved       = 0
    u32 src
    u32 dst
    u64 request_id
    u32 payload_len
    ...  payload
"""
from __future__ import annotations

import struct
from typing import NamedTuple

from ..errors import DecodeError

WIRE_VERSION = 1
ACK = 0xFF

_LEN = struct.Struct("<I")
_HEAD = struct.Struct("<BBHIIQI")
HEADER_SIZE = _LEN.size + _HEAD.size  # 28
MAX_PAYLOAD = (1 << 32) - 1 - _HEAD.size


class Envelope(NamedTuple):
    src: int
    dst: int
    tag: int
    request_id: int
    payload: bytes = b""


def encode(env: Envelope) -> bytes:
    n = len(env.payload)
    if n > MAX_PAYLOAD:
        raise ValueError(f"payload of {n} bytes does not fit a frame")
    return b"".join(
        (
            _LEN.pack(_HEAD.size + n),
            _HEAD.pack(WIRE_VERSION, env.tag, 0, env.src, env.dst, env.request_id, n),
            env.payload,
        )
    )


def decode(data, offset=0):
    """Decode one frame starting at ``offset``; returns ``(envelope, next_offset)``."""
    view = memoryview(data)
    end = len(view)
    if end - offset < _LEN.size:
        raise DecodeError("truncated length prefix", offset)
    (flen,) = _LEN.unpack_from(view, offset)
    body = offset + _LEN.size
    if flen < _HEAD.size:
        raise DecodeError(f"frame length {flen} shorter than header", offset)
    if body + flen > end:
        raise DecodeError(f"frame length {flen} exceeds remaining {end - body} bytes", offset)
    version, tag, reserved, src, dst, req, plen = _HEAD.unpack_from(view, body)
    if version != WIRE_VERSION:
        raise DecodeError(f"unknown version {version}", body)
    if reserved != 0:
        raise DecodeError(f"reserved field is {reserved}, expected 0", body + 2)
    if plen != flen - _HEAD.size:
        raise DecodeError(f"payload_len {plen} disagrees with frame length {flen}", body + 20)
    start = body + _HEAD.size
    payload = bytes(view[start : start + plen])
    return Envelope(src, dst, tag, req, payload), start + plen


def decode_one(data) -> Envelope:
    env, used = decode(data)
    if used != len(data):
        raise DecodeError(f"{len(data) - used} trailing bytes after frame", used)
    return env


_ACK_HEAD = struct.Struct("<QB")
ACK_OK = 0
ACK_ERROR = 1


def ack_payload(request_id, error=None, result=b""):
    """ACK payload: u64 acked request_id | u8 status | result or UTF-8 error text."""
    if error is not None:
        return _ACK_HEAD.pack(request_id, ACK_ERROR) + str(error).encode("utf-8", "replace")
    return _ACK_HEAD.pack(request_id, ACK_OK) + result


def parse_ack(payload):
    req, status = _ACK_HEAD.unpack_from(payload)
    rest = payload[_ACK_HEAD.size :]
    if status == ACK_ERROR:
        return req, rest.decode("utf-8", "replace"), b""
    return req, None, rest
