"""Connectionless sender/receiver pair over the dual radio links.

Messages are fragmented once and every fragment is emitted once per link in
the topic's link set; copies on the second link carry identical sequence
numbers plus the duplicate-copy flag (telemetry attribution only; dedup
relies solely on (topic, seq)).  The receiver delivers each (topic, seq) at
most once, suppresses stale commands in latest-only mode with wrap-aware
sequence comparison, and needs no handshake state: the first packet after
start-up or after an arbitrary outage is immediately deliverable.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from . import wire
from .config import DeliveryMode, Link, TopicTable, ordered_links

SEQ_HALF_RANGE = 1 << 31
DEFAULT_DEDUP_WINDOW = 1024


class UnknownTopic(KeyError):
    pass


def seq_newer(a: int, b: int) -> bool:
    """True iff sequence a is newer than b over the wrapping 32-bit space."""
    return a != b and (a - b) % wire.SEQ_MOD < SEQ_HALF_RANGE


@dataclass(frozen=True)
class Emission:
    """One encoded datagram bound for one link."""

    link: Link
    header: wire.PacketHeader
    raw: bytes


class Sender:
    """Per-topic sequence numbering and per-link duplication."""

    def __init__(self, table: TopicTable, mtu_payload: int = wire.MTU_PAYLOAD, telemetry=None):
        self._table = table
        self.mtu_payload = mtu_payload
        self.telemetry = telemetry
        self._next_seq: dict[int, int] = {}

    @property
    def table(self) -> TopicTable:
        return self._table

    def set_table(self, table: TopicTable) -> None:
        """Atomically replace the routing table (sequence state persists)."""
        self._table = table

    def send(self, topic_id: int, payload: bytes, now_ns: int) -> list[Emission]:
        spec = self._table.by_id.get(topic_id)
        if spec is None:
            raise UnknownTopic(topic_id)
        seq = self._next_seq.get(topic_id, 0)
        self._next_seq[topic_id] = (seq + 1) % wire.SEQ_MOD
        msg = wire.Message(topic_id=topic_id, seq=seq, send_time_ns=now_ns, payload=payload)
        emissions = []
        links = ordered_links(spec.links)
        for header, chunk in wire.fragment_message(msg, self.mtu_payload):
            for copy_index, link in enumerate(links):
                flags = header.flags | (wire.FLAG_DUPLICATE_COPY if copy_index > 0 else 0)
                out = wire.PacketHeader(
                    topic_id=header.topic_id,
                    seq=header.seq,
                    frag_index=header.frag_index,
                    frag_count=header.frag_count,
                    send_time_ns=header.send_time_ns,
                    payload_len=header.payload_len,
                    flags=flags,
                )
                emissions.append(Emission(link=link, header=out, raw=wire.encode_packet(out, chunk, self.mtu_payload)))
                if self.telemetry is not None:
                    self.telemetry.record_sent(link, out, now_ns)
        return emissions


@dataclass
class _TopicRxState:
    store: wire.FragmentStore
    last_delivered_seq: int | None = None
    last_delivered_ns: int | None = None
    seen: set[int] = field(default_factory=set)
    seen_order: deque = field(default_factory=deque)


class Receiver:
    """Decodes, reassembles, deduplicates and order-filters incoming datagrams.

    Wire-level errors are counted, never raised: a receiver on a lossy radio
    link treats garbage as weather, not as failure.
    """

    def __init__(
        self,
        table: TopicTable,
        fragment_expiry_ns: int = wire.DEFAULT_FRAGMENT_EXPIRY_NS,
        dedup_window: int = DEFAULT_DEDUP_WINDOW,
        telemetry=None,
    ):
        self._table = table
        self.fragment_expiry_ns = fragment_expiry_ns
        self.dedup_window = dedup_window
        self.telemetry = telemetry
        self._topics: dict[int, _TopicRxState] = {}
        self.decode_errors = 0
        self.unknown_topic_drops = 0
        self.duplicates_suppressed = 0
        self.stale_dropped = 0
        self.delivered: dict[int, int] = {}

    @property
    def table(self) -> TopicTable:
        return self._table

    def set_table(self, table: TopicTable) -> None:
        self._table = table

    def _state(self, topic_id: int) -> _TopicRxState:
        state = self._topics.get(topic_id)
        if state is None:
            state = _TopicRxState(store=wire.FragmentStore(self.fragment_expiry_ns))
            self._topics[topic_id] = state
        return state

    def receive(self, link: Link, raw: bytes, now_ns: int) -> wire.Message | None:
        try:
            header, payload = wire.decode_packet(raw)
        except wire.WireError:
            self.decode_errors += 1
            return None
        if self.telemetry is not None:
            self.telemetry.record_received(link, header, now_ns)
        spec = self._table.by_id.get(header.topic_id)
        if spec is None:
            self.unknown_topic_drops += 1
            return None
        state = self._state(header.topic_id)
        state.store.expire(now_ns)
        try:
            msg = state.store.offer(header, payload, now_ns)
        except wire.WireError:
            self.decode_errors += 1
            return None
        if msg is None:
            return None
        return self._deliver(spec.delivery_mode, state, msg, now_ns)

    def _deliver(self, mode: DeliveryMode, state: _TopicRxState, msg: wire.Message, now_ns: int):
        if mode is DeliveryMode.LATEST_ONLY:
            last = state.last_delivered_seq
            if last is not None and not seq_newer(msg.seq, last):
                if msg.seq == last:
                    self.duplicates_suppressed += 1
                else:
                    self.stale_dropped += 1
                return None
            state.last_delivered_seq = msg.seq
        else:
            if msg.seq in state.seen:
                self.duplicates_suppressed += 1
                return None
            state.seen.add(msg.seq)
            state.seen_order.append(msg.seq)
            if len(state.seen_order) > self.dedup_window:
                state.seen.discard(state.seen_order.popleft())
        state.last_delivered_ns = now_ns
        self.delivered[msg.topic_id] = self.delivered.get(msg.topic_id, 0) + 1
        return msg

    def command_gap_seconds(self, topic_id: int, now_ns: int) -> float:
        """Seconds since the last delivered message; +inf if none ever arrived."""
        if topic_id not in self._table.by_id:
            raise UnknownTopic(topic_id)
        state = self._topics.get(topic_id)
        if state is None or state.last_delivered_ns is None:
            return float("inf")
        return (now_ns - state.last_delivered_ns) / 1e9

    def last_delivered_seq(self, topic_id: int) -> int | None:
        state = self._topics.get(topic_id)
        return state.last_delivered_seq if state else None
