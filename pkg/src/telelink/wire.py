"""Bit-exact packet encoding, fragmentation and reassembly for the dual-link transport.

Datagram layout: a fixed 24-byte big-endian header followed by the payload.

    offset  size  field
    ------  ----  -----
    0       2     magic (0x4E41)
    2       1     version (currently 1)
    3       1     flags (bit 0: duplicate copy, bit 1: last fragment)
    4       2     topic_id
    6       2     frag_index
    8       2     frag_count (>= 1)
    10      4     seq (wrapping u32, one sequence space per topic)
    14      8     send_time_ns
    22      2     payload_len

There is deliberately no retransmission, no FEC and no handshake state: loss
tolerance comes from duplicating whole messages across radio links (see
``telelink.transport``) and any receiver can decode any packet in isolation.
The authoritative layout description with golden vectors lives in
``docs/wire.md``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

MAGIC = 0x4E41
VERSION = 1
HEADER_SIZE = 24
MTU_PAYLOAD = 1400
MAX_MESSAGE_BYTES = 1 << 22
MAX_FRAG_COUNT = 0xFFFF
SEQ_MOD = 1 << 32

FLAG_DUPLICATE_COPY = 0x01
FLAG_LAST_FRAGMENT = 0x02

DEFAULT_FRAGMENT_EXPIRY_NS = 500_000_000  # 500 ms

_HEADER_STRUCT = struct.Struct(">HBBHHHIQH")
assert _HEADER_STRUCT.size == HEADER_SIZE


class WireError(Exception):
    """Base class for all wire-level failures."""


class PayloadTooLarge(WireError):
    pass


class BadMagic(WireError):
    pass


class BadVersion(WireError):
    pass


class Truncated(WireError):
    pass


class BadHeader(WireError):
    """Structurally invalid header fields (e.g. frag_index >= frag_count)."""


class TooManyFragments(WireError):
    pass


class InconsistentFragCount(WireError):
    pass


@dataclass(frozen=True)
class PacketHeader:
    topic_id: int
    seq: int
    frag_index: int = 0
    frag_count: int = 1
    send_time_ns: int = 0
    payload_len: int = 0
    flags: int = 0

    def is_duplicate_copy(self) -> bool:
        return bool(self.flags & FLAG_DUPLICATE_COPY)

    def is_last_fragment(self) -> bool:
        return bool(self.flags & FLAG_LAST_FRAGMENT)


@dataclass(frozen=True)
class Message:
    """An application-level message, possibly spanning several packets."""

    topic_id: int
    seq: int
    send_time_ns: int
    payload: bytes


def encode_packet(header: PacketHeader, payload: bytes, mtu_payload: int = MTU_PAYLOAD) -> bytes:
    """Serialize one packet; deterministic for identical inputs."""
    if len(payload) > mtu_payload:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds MTU payload {mtu_payload}")
    if len(payload) != header.payload_len:
        raise ValueError(f"header.payload_len={header.payload_len} does not match payload of {len(payload)} bytes")
    if not 1 <= header.frag_count <= MAX_FRAG_COUNT or not 0 <= header.frag_index < header.frag_count:
        raise BadHeader(f"invalid fragment fields {header.frag_index}/{header.frag_count}")
    return _HEADER_STRUCT.pack(
        MAGIC,
        VERSION,
        header.flags,
        header.topic_id,
        header.frag_index,
        header.frag_count,
        header.seq % SEQ_MOD,
        header.send_time_ns,
        header.payload_len,
    ) + payload


def decode_packet(raw: bytes) -> tuple[PacketHeader, bytes]:
    """Parse one datagram.  Total over arbitrary input: returns or raises a WireError.

    Consumes exactly ``HEADER_SIZE + payload_len`` bytes; trailing bytes beyond
    the declared payload are ignored (datagram framing preserves boundaries).
    """
    if len(raw) < HEADER_SIZE:
        raise Truncated(f"{len(raw)} bytes is below the {HEADER_SIZE}-byte header")
    magic, version, flags, topic_id, frag_index, frag_count, seq, send_time_ns, payload_len = (
        _HEADER_STRUCT.unpack_from(raw)
    )
    if magic != MAGIC:
        raise BadMagic(f"magic 0x{magic:04X}, expected 0x{MAGIC:04X}")
    if version != VERSION:
        raise BadVersion(f"version {version}, expected {VERSION}")
    if frag_count < 1 or frag_index >= frag_count:
        raise BadHeader(f"invalid fragment fields {frag_index}/{frag_count}")
    if len(raw) < HEADER_SIZE + payload_len:
        raise Truncated(f"declared payload of {payload_len} bytes, only {len(raw) - HEADER_SIZE} present")
    header = PacketHeader(
        topic_id=topic_id,
        seq=seq,
        frag_index=frag_index,
        frag_count=frag_count,
        send_time_ns=send_time_ns,
        payload_len=payload_len,
        flags=flags,
    )
    return header, bytes(raw[HEADER_SIZE:HEADER_SIZE + payload_len])


def fragment_message(msg: Message, mtu_payload: int = MTU_PAYLOAD) -> list[tuple[PacketHeader, bytes]]:
    """Split a message into ordered fragments of at most ``mtu_payload`` bytes.

    Empty messages still produce exactly one (empty) fragment so that
    heartbeat-style topics stay visible on the wire.
    """
    if mtu_payload < 1:
        raise ValueError("mtu_payload must be positive")
    payload = msg.payload
    if len(payload) > MAX_MESSAGE_BYTES:
        raise PayloadTooLarge(f"message of {len(payload)} bytes exceeds the {MAX_MESSAGE_BYTES}-byte ceiling")
    frag_count = max(1, -(-len(payload) // mtu_payload))
    if frag_count > MAX_FRAG_COUNT:
        raise TooManyFragments(f"{frag_count} fragments exceed the {MAX_FRAG_COUNT} limit")
    fragments = []
    for index in range(frag_count):
        chunk = payload[index * mtu_payload:(index + 1) * mtu_payload]
        flags = FLAG_LAST_FRAGMENT if index == frag_count - 1 else 0
        header = PacketHeader(
            topic_id=msg.topic_id,
            seq=msg.seq % SEQ_MOD,
            frag_index=index,
            frag_count=frag_count,
            send_time_ns=msg.send_time_ns,
            payload_len=len(chunk),
            flags=flags,
        )
        fragments.append((header, chunk))
    return fragments


class _Pending:
    __slots__ = ("frag_count", "send_time_ns", "parts", "created_ns")

    def __init__(self, frag_count: int, send_time_ns: int, created_ns: int):
        self.frag_count = frag_count
        self.send_time_ns = send_time_ns
        self.parts: dict[int, bytes] = {}
        self.created_ns = created_ns


class FragmentStore:
    """Single-owner reassembly state for one receiver.

    Incomplete fragment sets are discarded once they are older than
    ``expiry_ns``; duplicate fragments are idempotent.
    """

    def __init__(self, expiry_ns: int = DEFAULT_FRAGMENT_EXPIRY_NS):
        self.expiry_ns = expiry_ns
        self._pending: dict[tuple[int, int], _Pending] = {}

    def __len__(self) -> int:
        return len(self._pending)

    def offer(self, header: PacketHeader, payload: bytes, now_ns: int) -> Message | None:
        """Add one fragment; returns the Message exactly when the set completes."""
        if header.frag_count == 1:
            return Message(header.topic_id, header.seq, header.send_time_ns, payload)
        key = (header.topic_id, header.seq)
        pending = self._pending.get(key)
        if pending is None:
            pending = _Pending(header.frag_count, header.send_time_ns, now_ns)
            self._pending[key] = pending
        elif pending.frag_count != header.frag_count:
            raise InconsistentFragCount(
                f"topic {header.topic_id} seq {header.seq}: "
                f"frag_count {header.frag_count} disagrees with {pending.frag_count}"
            )
        pending.parts.setdefault(header.frag_index, payload)
        if len(pending.parts) == pending.frag_count:
            del self._pending[key]
            body = b"".join(pending.parts[i] for i in range(pending.frag_count))
            return Message(header.topic_id, header.seq, pending.send_time_ns, body)
        return None

    def expire(self, now_ns: int) -> int:
        """Drop incomplete sets older than the expiry; returns how many were dropped."""
        stale = [key for key, p in self._pending.items() if now_ns - p.created_ns > self.expiry_ns]
        for key in stale:
            del self._pending[key]
        return len(stale)


def reassemble(store: FragmentStore, header: PacketHeader, payload: bytes, now_ns: int) -> Message | None:
    """Feed one decoded packet into ``store``; see FragmentStore.offer."""
    return store.offer(header, payload, now_ns)
