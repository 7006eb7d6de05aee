"""Deterministic discrete-event simulation of the two radio links.

Everything runs on an integer-nanosecond virtual clock with a single seeded
RNG, so a scenario replays to byte-identical event logs: reproducibility is
the point of the harness.  Per-link impairments cover independent random
loss, base latency, timed jitter/loss bursts, outages and a token-bucket
bandwidth cap with 100 ms burst depth whose overflow shows up as congestion
drops.  Loss processes on the two bands are independent (a correlation knob
exists, default 0), which is the stated modeling assumption behind the
redundancy arithmetic 1 - p1*p2.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass
from decimal import Decimal

from . import wire
from .config import Direction, Link, TopicTable, ordered_links
from .sources import NS_PER_S, TrafficSource, make_generator
from .telemetry import TelemetryHub
from .transport import Emission, Receiver, Sender

# Event priorities at equal timestamps: safety directives preempt everything,
# then other control directives, then traffic, then periodic observers.
PRIO_ESTOP = 0
PRIO_DIRECTIVE = 1
PRIO_TRAFFIC = 2
PRIO_PERIODIC = 3


def _s_to_ns(seconds) -> int:
    return int(round(Decimal(str(seconds)) * NS_PER_S))


@dataclass(frozen=True)
class JitterBurst:
    start_s: float
    duration_s: float
    added_latency_ms: float = 0.0
    burst_loss_prob: float = 0.0


@dataclass(frozen=True)
class Outage:
    start_s: float
    duration_s: float


@dataclass
class LinkProfile:
    """Impairment model for one radio link."""

    link: Link
    base_latency_ms: float = 2.0
    loss_prob: float = 0.0
    bandwidth_cap_mbits: Decimal | None = None
    jitter_bursts: tuple[JitterBurst, ...] = ()
    outages: tuple[Outage, ...] = ()
    signal_model: tuple[tuple[float, float], ...] = ((0.0, 1.0),)  # (t_s, level) steps
    loss_correlation: float = 0.0  # reserved knob; 0 = fully independent links

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be within [0, 1]")
        for burst in self.jitter_bursts:
            if not 0.0 <= burst.burst_loss_prob <= 1.0:
                raise ValueError("burst loss probability must be within [0, 1]")
            if burst.duration_s < 0 or burst.start_s < 0:
                raise ValueError("burst intervals must be nonnegative")
        for outage in self.outages:
            if outage.duration_s < 0 or outage.start_s < 0:
                raise ValueError("outage intervals must be nonnegative")

    def in_outage(self, t_ns: int) -> bool:
        for outage in self.outages:
            start = _s_to_ns(outage.start_s)
            if start <= t_ns < start + _s_to_ns(outage.duration_s):
                return True
        return False

    def active_burst(self, t_ns: int) -> JitterBurst | None:
        for burst in self.jitter_bursts:
            start = _s_to_ns(burst.start_s)
            if start <= t_ns < start + _s_to_ns(burst.duration_s):
                return burst
        return None

    def latency_ns(self, t_ns: int) -> int:
        latency_ms = self.base_latency_ms
        burst = self.active_burst(t_ns)
        if burst is not None:
            latency_ms += burst.added_latency_ms
        return int(round(latency_ms * 1e6))

    def loss_at(self, t_ns: int) -> float:
        burst = self.active_burst(t_ns)
        if burst is None:
            return self.loss_prob
        return 1.0 - (1.0 - self.loss_prob) * (1.0 - burst.burst_loss_prob)

    def signal(self, t_ns: int) -> float:
        if self.in_outage(t_ns):
            return 0.0
        level = 1.0
        t_s = t_ns / NS_PER_S
        for start, value in self.signal_model:
            if t_s >= start:
                level = value
        return level


class TokenBucket:
    """Average-rate limiter with a fixed burst depth, in integer bit-nanoseconds."""

    def __init__(self, rate_bits_per_s: int, depth_ns: int = 100_000_000):
        self.rate = rate_bits_per_s
        self.capacity = rate_bits_per_s * depth_ns
        self.level = self.capacity
        self.last_ns = 0

    def try_consume(self, bits: int, now_ns: int) -> bool:
        self.level = min(self.capacity, self.level + (now_ns - self.last_ns) * self.rate)
        self.last_ns = now_ns
        need = bits * NS_PER_S
        if self.level >= need:
            self.level -= need
            return True
        return False


@dataclass
class LinkCounters:
    sent: int = 0
    delivered: int = 0
    dropped_loss: int = 0
    dropped_congestion: int = 0
    payload_bits_sent: int = 0
    payload_bits_delivered: int = 0


@dataclass
class TopicCounters:
    messages_sent: int = 0
    messages_delivered: int = 0
    latency_ns_min: int | None = None
    latency_ns_max: int | None = None
    latency_ns_total: int = 0

    def note_latency(self, latency_ns: int) -> None:
        if self.latency_ns_min is None or latency_ns < self.latency_ns_min:
            self.latency_ns_min = latency_ns
        if self.latency_ns_max is None or latency_ns > self.latency_ns_max:
            self.latency_ns_max = latency_ns
        self.latency_ns_total += latency_ns


@dataclass(frozen=True)
class Delivery:
    t_ns: int
    link: Link
    message: wire.Message


class LinkSim:
    """Event-driven harness wiring sources, sender, links and receivers together.

    Single-threaded per instance; run several instances in parallel if needed.
    """

    def __init__(
        self,
        table: TopicTable,
        profiles: dict[Link, LinkProfile] | None = None,
        seed: int = 0,
        mtu_payload: int = wire.MTU_PAYLOAD,
        auto_sources: bool = True,
    ):
        self.table = table
        self.profiles = profiles or {link: LinkProfile(link=link) for link in Link}
        for link in Link:
            self.profiles.setdefault(link, LinkProfile(link=link))
        self.seed = seed
        self.rng = random.Random(seed)
        self.mtu_payload = mtu_payload
        self.now_ns = 0
        self._heap: list = []
        self._eseq = itertools.count()
        self.telemetry = TelemetryHub(table, signal_fn=self.link_signal)
        self.sender = Sender(table, mtu_payload=mtu_payload, telemetry=self.telemetry)
        self.receivers: dict[Direction, Receiver] = {
            direction: Receiver(table, telemetry=self.telemetry) for direction in Direction
        }
        self.sources: dict[int, TrafficSource] = {}
        if auto_sources:
            for spec in table.topics:
                self.sources[spec.topic_id] = make_generator(spec, seed=seed)
        self._buckets: dict[tuple[Link, Direction], TokenBucket] = {}
        for link in ordered_links(Link):
            cap = self.profiles[link].bandwidth_cap_mbits
            if cap is not None:
                for direction in Direction:
                    self._buckets[(link, direction)] = TokenBucket(int(Decimal(cap) * 10**6))
        self.link_counters: dict[tuple[int, Link], LinkCounters] = {}
        self.topic_counters: dict[int, TopicCounters] = {}
        self.deliveries: list[Delivery] = []
        self.on_delivery: list = []  # callbacks (Delivery) -> None
        self._sources_armed = False

    # -- plumbing ---------------------------------------------------------------

    def link_signal(self, link: Link, now_ns: int) -> tuple[float, bool]:
        profile = self.profiles[link]
        return profile.signal(now_ns), not profile.in_outage(now_ns)

    def schedule(self, t_ns: int, prio: int, fn, *args) -> None:
        if t_ns < self.now_ns:
            t_ns = self.now_ns
        heapq.heappush(self._heap, (t_ns, prio, next(self._eseq), fn, args))

    def schedule_every(self, period_ns: int, prio: int, fn, start_ns: int = 0) -> None:
        """fn(now_ns) re-armed every period until the simulation stops pulling."""
        def wrapper(now_ns, _period=period_ns):
            fn(now_ns)
            self.schedule(now_ns + _period, prio, wrapper)
        self.schedule(start_ns, prio, wrapper)

    def _counters(self, topic_id: int, link: Link) -> LinkCounters:
        key = (topic_id, link)
        counters = self.link_counters.get(key)
        if counters is None:
            counters = LinkCounters()
            self.link_counters[key] = counters
        return counters

    def _topic(self, topic_id: int) -> TopicCounters:
        counters = self.topic_counters.get(topic_id)
        if counters is None:
            counters = TopicCounters()
            self.topic_counters[topic_id] = counters
        return counters

    # -- traffic ------------------------------------------------------------------

    def arm_sources(self) -> None:
        """Schedule the first emission of every configured source."""
        if self._sources_armed:
            return
        self._sources_armed = True
        for topic_id in sorted(self.sources):
            self._schedule_source(topic_id)

    def _schedule_source(self, topic_id: int) -> None:
        source = self.sources[topic_id]
        t_ns = source.next_time_ns()

        def emit(now_ns, topic_id=topic_id):
            src = self.sources[topic_id]
            _, payload = src.pop()
            self.send_message(topic_id, payload, now_ns)
            self.schedule(src.next_time_ns(), PRIO_TRAFFIC, emit)

        self.schedule(t_ns, PRIO_TRAFFIC, emit)

    def send_message(self, topic_id: int, payload: bytes, now_ns: int) -> None:
        """Push one application message through fragmentation and both links."""
        self._topic(topic_id).messages_sent += 1
        for emission in self.sender.send(topic_id, payload, now_ns):
            self._offer_to_link(emission, now_ns)

    def _offer_to_link(self, emission: Emission, now_ns: int) -> None:
        profile = self.profiles[emission.link]
        counters = self._counters(emission.header.topic_id, emission.link)
        counters.sent += 1
        counters.payload_bits_sent += emission.header.payload_len * 8
        if profile.in_outage(now_ns):
            counters.dropped_loss += 1
            return
        loss = profile.loss_at(now_ns)
        if loss > 0.0 and self.rng.random() < loss:
            counters.dropped_loss += 1
            return
        direction = self.table.by_id[emission.header.topic_id].direction
        bucket = self._buckets.get((emission.link, direction))
        if bucket is not None and not bucket.try_consume(len(emission.raw) * 8, now_ns):
            counters.dropped_congestion += 1
            return
        arrive_ns = now_ns + profile.latency_ns(now_ns)
        self.schedule(arrive_ns, PRIO_TRAFFIC, self._deliver_packet, emission)

    def _deliver_packet(self, now_ns: int, emission: Emission) -> None:
        spec = self.table.by_id.get(emission.header.topic_id)
        if spec is None:
            return
        counters = self._counters(emission.header.topic_id, emission.link)
        counters.delivered += 1
        counters.payload_bits_delivered += emission.header.payload_len * 8
        receiver = self.receivers[spec.direction]
        message = receiver.receive(emission.link, emission.raw, now_ns)
        if message is None:
            return
        topic = self._topic(message.topic_id)
        topic.messages_delivered += 1
        topic.note_latency(now_ns - message.send_time_ns)
        delivery = Delivery(t_ns=now_ns, link=emission.link, message=message)
        self.deliveries.append(delivery)
        for callback in self.on_delivery:
            callback(delivery)

    # -- table edits -------------------------------------------------------------------

    def set_table(self, table: TopicTable) -> None:
        """Atomic routing swap: sender, receivers and telemetry all move together."""
        self.table = table
        self.sender.set_table(table)
        for receiver in self.receivers.values():
            receiver.set_table(table)
        self.telemetry.set_table(table)

    def reset_receiver(self, direction: Direction) -> None:
        """Model killing and recreating a receiver endpoint mid-stream."""
        self.receivers[direction] = Receiver(self.table, telemetry=self.telemetry)

    # -- clock -----------------------------------------------------------------------------

    def step(self, dt_ns: int) -> list[Delivery]:
        """Advance the virtual clock, processing events in timestamp order."""
        if dt_ns <= 0:
            raise ValueError("dt_ns must be positive")
        target = self.now_ns + dt_ns
        first_new = len(self.deliveries)
        while self._heap and self._heap[0][0] <= target:
            t_ns, _prio, _eseq, fn, args = heapq.heappop(self._heap)
            self.now_ns = t_ns
            fn(t_ns, *args)
        self.now_ns = target
        return self.deliveries[first_new:]

    def run_until(self, t_ns: int) -> None:
        if t_ns > self.now_ns:
            self.step(t_ns - self.now_ns)

    def in_flight(self) -> dict[tuple[int, Link], int]:
        """Packets queued for delivery but not yet arrived (conservation term)."""
        counts: dict[tuple[int, Link], int] = {}
        for _t, _prio, _eseq, fn, args in self._heap:
            if fn == self._deliver_packet and args:
                emission = args[0]
                key = (emission.header.topic_id, emission.link)
                counts[key] = counts.get(key, 0) + 1
        return counts
