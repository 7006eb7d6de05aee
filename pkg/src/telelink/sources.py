"""Synthetic traffic generators for the configured flow mix.

Encoded media is out of scope, so video-like flows are modeled as constant
bitrate at their configured frame rate and audio as a paced packet stream
whose rate is sample_rate / buffer_samples; buffering 512 samples of
48 kHz audio yields 93.75 packets/s, while a low-latency 64-sample buffer
pushes 750 packets/s.  Sources are exact-rational schedulers: emission k
happens at floor(k / rate) nanoseconds, so long-run rate and bitrate match
the configured values with no drift and runs are reproducible by seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .config import TopicSpec

NS_PER_S = 1_000_000_000
_SEQ_PREFIX_BYTES = 8


class ZeroRate(ValueError):
    pass


@dataclass(frozen=True)
class AudioConfig:
    sample_rate_hz: int = 48000
    buffer_samples: int = 512
    bytes_per_sample_frame: int = 4  # stereo 16-bit

    def packet_interval_s(self) -> Fraction:
        return Fraction(self.buffer_samples, self.sample_rate_hz)


def audio_packet_rate(cfg: AudioConfig) -> float:
    """Packets per second: one packet per filled buffer."""
    if cfg.sample_rate_hz <= 0 or cfg.buffer_samples <= 0:
        raise ValueError("audio config fields must be positive")
    return cfg.sample_rate_hz / cfg.buffer_samples


def payload_bytes_per_message(spec: TopicSpec) -> int:
    """Nominal bitrate divided by message rate, rounded to whole bytes."""
    bits_per_message = Fraction(spec.nominal_mbits) * 10**6 / spec.rate.hz
    return int(round(bits_per_message / 8))


class TrafficSource:
    """Deterministic (emit_time_ns, payload) stream for one topic.

    Payloads carry the message index in the first bytes plus a seeded filler
    pattern, so content is verifiable without shipping real media.
    """

    def __init__(self, spec: TopicSpec, seed: int = 0):
        if spec.rate.hz <= 0:
            raise ZeroRate(f"topic {spec.name} has zero message rate")
        self.spec = spec
        self.rate_hz = spec.rate.hz
        self.payload_size = payload_bytes_per_message(spec)
        self._index = 0
        rng = random.Random((seed << 16) ^ spec.topic_id)
        filler = bytes(rng.randrange(256) for _ in range(256))
        reps = max(1, -(-(self.payload_size) // 256))
        self._filler = (filler * reps)[: max(0, self.payload_size - _SEQ_PREFIX_BYTES)]

    def emit_time_ns(self, index: int) -> int:
        return index * NS_PER_S * self.rate_hz.denominator // self.rate_hz.numerator

    def next_time_ns(self) -> int:
        return self.emit_time_ns(self._index)

    def payload_for(self, index: int) -> bytes:
        if self.payload_size < _SEQ_PREFIX_BYTES:
            return index.to_bytes(_SEQ_PREFIX_BYTES, "big")[-self.payload_size:] if self.payload_size else b""
        return index.to_bytes(_SEQ_PREFIX_BYTES, "big") + self._filler

    def pop(self) -> tuple[int, bytes]:
        """Consume and return the next (emit_time_ns, payload) event."""
        event = (self.emit_time_ns(self._index), self.payload_for(self._index))
        self._index += 1
        return event

    def events_until(self, t_end_ns: int):
        """Yield every remaining event with emit time strictly below t_end_ns."""
        while self.next_time_ns() < t_end_ns:
            yield self.pop()


def make_generator(spec: TopicSpec, seed: int = 0) -> TrafficSource:
    return TrafficSource(spec, seed=seed)
