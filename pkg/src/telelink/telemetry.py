"""Live per-flow and per-link statistics for the network overview panel.

Rates use a 1 s sliding window of ten 100 ms buckets (matching the 1 Hz
monitoring cadence while smoothing burstiness); loss is estimated purely
from receiver-side sequence gaps so no control channel is needed.  Writers
perform O(1) counter updates on the transport hot path; snapshots are
consistent point-in-time copies and serialize to the dashboard feed schema
(docs/feed-schema.md).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from . import wire
from .config import Direction, Link, TopicTable, ordered_links
from .transport import seq_newer

BUCKET_NS = 100_000_000  # 100 ms
WINDOW_BUCKETS = 10


class PacketDirection(str, Enum):
    SENT = "sent"
    RECEIVED = "received"


@dataclass
class FlowStats:
    """Counters for one (topic, link) flow, measured at the receiving side."""

    topic_id: int
    link: Link
    sent: int = 0
    received: int = 0
    est_dropped: int = 0
    duplicates: int = 0
    reordered: int = 0
    last_seq: int | None = None
    _buckets: dict[int, list[int]] = field(default_factory=dict, repr=False)

    def record_sent(self) -> None:
        self.sent += 1

    def record_received(self, header: wire.PacketHeader, now_ns: int) -> None:
        self.received += 1
        bucket = self._buckets.setdefault(now_ns // BUCKET_NS, [0, 0])
        bucket[0] += 1
        bucket[1] += header.payload_len * 8
        if len(self._buckets) > WINDOW_BUCKETS + 2:
            self._prune(now_ns)
        if self.last_seq is None:
            self.last_seq = header.seq
            return
        if seq_newer(header.seq, self.last_seq):
            gap = (header.seq - self.last_seq) % wire.SEQ_MOD - 1
            self.est_dropped += gap
            self.last_seq = header.seq
        elif header.is_duplicate_copy():
            self.duplicates += 1
        else:
            self.reordered += 1

    def _prune(self, now_ns: int) -> None:
        floor = now_ns // BUCKET_NS - WINDOW_BUCKETS
        for key in [k for k in self._buckets if k < floor]:
            del self._buckets[key]

    def window_rates(self, now_ns: int) -> tuple[float, float]:
        """(packets/s, payload Mbit/s) over the last ten *complete* buckets."""
        current = now_ns // BUCKET_NS
        packets = bits = 0
        for key, (count, b) in self._buckets.items():
            if current - WINDOW_BUCKETS <= key < current:
                packets += count
                bits += b
        return packets / 1.0, bits / 1e6


@dataclass
class LinkState:
    link: Link
    signal_strength: float = 1.0
    up: bool = True


class TelemetryHub:
    """Aggregates flow and link statistics; one hub watches both directions."""

    def __init__(self, table: TopicTable, signal_fn=None):
        self._table = table
        self._signal_fn = signal_fn  # (link, now_ns) -> (signal in [0,1], up flag)
        self._flows: dict[tuple[int, Link], FlowStats] = {}

    @property
    def table(self) -> TopicTable:
        return self._table

    def set_table(self, table: TopicTable) -> None:
        self._table = table

    def flow(self, topic_id: int, link: Link) -> FlowStats:
        key = (topic_id, link)
        stats = self._flows.get(key)
        if stats is None:
            stats = FlowStats(topic_id=topic_id, link=link)
            self._flows[key] = stats
        return stats

    def record_packet(self, direction: PacketDirection, link: Link, header: wire.PacketHeader, now_ns: int) -> None:
        if direction is PacketDirection.SENT:
            self.record_sent(link, header, now_ns)
        else:
            self.record_received(link, header, now_ns)

    def record_sent(self, link: Link, header: wire.PacketHeader, now_ns: int) -> None:
        self.flow(header.topic_id, link).record_sent()

    def record_received(self, link: Link, header: wire.PacketHeader, now_ns: int) -> None:
        self.flow(header.topic_id, link).record_received(header, now_ns)

    def link_state(self, link: Link, now_ns: int) -> LinkState:
        if self._signal_fn is None:
            return LinkState(link=link)
        signal, up = self._signal_fn(link, now_ns)
        return LinkState(link=link, signal_strength=signal, up=up)

    def snapshot(self, now_ns: int) -> dict:
        """Point-in-time network overview, JSON-ready and internally consistent:
        per-link totals equal the sum of their flows."""
        flows = []
        link_mbits = {link: 0.0 for link in Link}
        totals = {d.value: {l.value: 0.0 for l in Link} for d in Direction}
        for topic in self._table.topics:
            for link in ordered_links(topic.links):
                stats = self.flow(topic.topic_id, link)
                pps, mbits = stats.window_rates(now_ns)
                flows.append(
                    {
                        "topic_id": topic.topic_id,
                        "name": topic.name,
                        "direction": topic.direction.value,
                        "group": topic.group,
                        "link": link.value,
                        "packets_per_s": pps,
                        "mbits_per_s": mbits,
                        "sent": stats.sent,
                        "received": stats.received,
                        "est_dropped": stats.est_dropped,
                        "duplicates": stats.duplicates,
                        "last_seq": stats.last_seq,
                    }
                )
                link_mbits[link] += mbits
                totals[topic.direction.value][link.value] += mbits
        links = []
        for link in ordered_links(Link):
            state = self.link_state(link, now_ns)
            links.append(
                {
                    "link": link.value,
                    "signal_strength": state.signal_strength,
                    "up": state.up,
                    "mbits_per_s": link_mbits[link],
                }
            )
        routing = {
            group: [link.value for link in ordered_links(self._table.group_links(group))]
            for group in sorted(self._table.groups)
        }
        return {
            "t_s": now_ns / 1e9,
            "links": links,
            "flows": flows,
            "totals": totals,
            "routing": routing,
        }
