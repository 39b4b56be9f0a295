"""Protocol messages and their binary wire format.

Every message is ``tag(1) || j(4, big-endian) || segment*`` where each
segment is ``length(4, big-endian) || bytes``.  Segment order is fixed per
tag:

==========  ====  ======================================
message     tag   segments
==========  ====  ======================================
trigger     0x01  X labels, ct, sync blob (may be empty)
action      0x02  Y labels, ct, s~, h~
bundle      0x03  F, C labels, s~, h~
==========  ====  ======================================

Label segments are raw concatenated 16-byte labels.  ``F`` is the serialized
garbled circuit (16-byte header plus 32 bytes per AND gate).  The framed TCP
transport prefixes each message with its own 4-byte big-endian length.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence, Union

from ..circuit import LABEL_BYTES, Circuit, CircuitError
from ..garble import GarbledCircuit

TAG_TRIGGER = 0x01
TAG_ACTION = 0x02
TAG_BUNDLE = 0x03
HMAC_BYTES = 32
MAX_J = 0xFFFFFFFF


class WireError(ValueError):
    """Malformed or truncated message bytes."""


@dataclass(frozen=True)
class GarbledBundle:
    j: int
    F: GarbledCircuit
    C: tuple[bytes, ...]
    s_tilde: bytes
    h_tilde: bytes

    def size(self) -> int:
        """Serialized size of the garbled material (F, C and the blob)."""
        return len(self.F) + LABEL_BYTES * len(self.C) + len(self.s_tilde) + len(self.h_tilde)


@dataclass(frozen=True)
class TriggerMsg:
    j: int
    X: tuple[bytes, ...]
    ct: bytes
    sync: bytes = b""


@dataclass(frozen=True)
class ActionMsg:
    j: int
    Y: tuple[bytes, ...]
    ct: bytes
    s_tilde: bytes
    h_tilde: bytes


Message = Union[GarbledBundle, TriggerMsg, ActionMsg]


def _labels(seq: Sequence[bytes]) -> bytes:
    for lab in seq:
        if len(lab) != LABEL_BYTES:
            raise WireError("labels must be 16 bytes")
    return b"".join(seq)


def _split_labels(raw: bytes) -> tuple[bytes, ...]:
    if len(raw) % LABEL_BYTES:
        raise WireError("label segment is not a multiple of 16 bytes")
    return tuple(raw[i:i + LABEL_BYTES] for i in range(0, len(raw), LABEL_BYTES))


def _frame(tag: int, j: int, segments: Sequence[bytes]) -> bytes:
    if not 0 <= j <= MAX_J:
        raise WireError("circuit id out of range")
    parts = [struct.pack(">BI", tag, j)]
    for seg in segments:
        parts.append(struct.pack(">I", len(seg)))
        parts.append(seg)
    return b"".join(parts)


def _unframe(data: bytes) -> tuple[int, int, list[bytes]]:
    if len(data) < 5:
        raise WireError("message shorter than its header")
    tag, j = struct.unpack_from(">BI", data)
    pos = 5
    segs = []
    while pos < len(data):
        if pos + 4 > len(data):
            raise WireError("truncated segment length")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + n > len(data):
            raise WireError("truncated segment")
        segs.append(data[pos:pos + n])
        pos += n
    return tag, j, segs


def encode_message(msg: Message) -> bytes:
    if isinstance(msg, TriggerMsg):
        return _frame(TAG_TRIGGER, msg.j, [_labels(msg.X), msg.ct, msg.sync])
    if isinstance(msg, ActionMsg):
        return _frame(TAG_ACTION, msg.j, [_labels(msg.Y), msg.ct, msg.s_tilde, msg.h_tilde])
    if isinstance(msg, GarbledBundle):
        return _frame(TAG_BUNDLE, msg.j, [msg.F.to_bytes(), _labels(msg.C), msg.s_tilde, msg.h_tilde])
    raise TypeError(f"not a protocol message: {type(msg).__name__}")


def message_tag(data: bytes) -> int:
    if not data:
        raise WireError("empty message")
    return data[0]


def decode_message(data: bytes, circuit: Circuit | None = None) -> Message:
    """Parse one message.  Bundles need the rule's public ``circuit``."""
    tag, j, segs = _unframe(bytes(data))
    expected = {TAG_TRIGGER: 3, TAG_ACTION: 4, TAG_BUNDLE: 4}.get(tag)
    if expected is None:
        raise WireError(f"unknown message tag 0x{tag:02x}")
    if len(segs) != expected:
        raise WireError(f"expected {expected} segments, got {len(segs)}")
    if tag == TAG_TRIGGER:
        return TriggerMsg(j, _split_labels(segs[0]), segs[1], segs[2])
    if len(segs[3]) != HMAC_BYTES:
        raise WireError("h~ must be 32 bytes")
    if tag == TAG_ACTION:
        return ActionMsg(j, _split_labels(segs[0]), segs[1], segs[2], segs[3])
    if circuit is None:
        raise WireError("decoding a bundle needs the rule's circuit")
    try:
        F = GarbledCircuit.from_bytes(segs[0], circuit)
    except CircuitError as exc:
        raise WireError(str(exc)) from exc
    C = _split_labels(segs[1])
    if len(C) != circuit.n_const_bits:
        raise WireError("constant label count does not match circuit")
    return GarbledBundle(j, F, C, segs[2], segs[3])


def frame(msg_bytes: bytes) -> bytes:
    """Length-prefix one message for a stream transport."""
    return struct.pack(">I", len(msg_bytes)) + msg_bytes
