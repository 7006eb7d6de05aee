"""Topic/routing table: parsing, validation and per-link bandwidth budgets.

The table is a line-based UTF-8 config (``#`` starts a comment):

    topic <id> <name> dir=<down|up> mbits=<D.D> group=<name> \
        links=<5g[,2g4]> mode=<latest|dedup> rate=<Hz|audio:<sr>/<buf>>

Bitrates are carried as decimals so that per-link budget totals add up
exactly at 0.1 Mbit/s granularity (no binary-float drift).  Link routing is
owned by *groups*: every topic belongs to exactly one group and a group's
topics always share one link set, so live rerouting toggles whole groups
atomically.  Tables are immutable values; edits return a new table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from fractions import Fraction


class Link(str, Enum):
    GHZ5 = "5g"
    GHZ24 = "2g4"


class Direction(str, Enum):
    DOWN = "down"  # avatar -> operator station
    UP = "up"      # operator station -> avatar


class DeliveryMode(str, Enum):
    LATEST_ONLY = "latest"
    DEDUP_ANY_ORDER = "dedup"


ALL_LINKS = frozenset(Link)


def ordered_links(links) -> list[Link]:
    """Stable link ordering for iteration (set order is not reproducible across runs)."""
    return sorted(links, key=lambda link: link.value)


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class ConfigSyntaxError(ConfigError):
    pass


class DuplicateTopicId(ConfigError):
    pass


class EmptyLinkSet(ConfigError):
    pass


class UnknownLinkName(ConfigError):
    pass


class UnknownGroup(ConfigError):
    pass


@dataclass(frozen=True)
class RateSpec:
    """Message rate, either fixed or derived from audio buffering arithmetic."""

    hz: Fraction
    audio: tuple[int, int] | None = None  # (sample_rate_hz, buffer_samples) when derived

    @classmethod
    def fixed(cls, hz) -> "RateSpec":
        return cls(hz=Fraction(Decimal(str(hz))))

    @classmethod
    def from_audio(cls, sample_rate_hz: int, buffer_samples: int) -> "RateSpec":
        return cls(hz=Fraction(sample_rate_hz, buffer_samples), audio=(sample_rate_hz, buffer_samples))


@dataclass(frozen=True)
class TopicSpec:
    name: str
    topic_id: int
    direction: Direction
    nominal_mbits: Decimal
    group: str
    links: frozenset[Link]
    delivery_mode: DeliveryMode
    rate: RateSpec


@dataclass(frozen=True)
class TopicTable:
    topics: tuple[TopicSpec, ...]
    by_id: dict[int, TopicSpec] = field(compare=False, repr=False, default_factory=dict)
    groups: dict[str, frozenset[int]] = field(compare=False, repr=False, default_factory=dict)

    @classmethod
    def build(cls, topics, line_of: dict[int, int] | None = None) -> "TopicTable":
        """Validate topics (unique ids, nonempty links, uniform group link sets)."""
        line_of = line_of or {}
        by_id: dict[int, TopicSpec] = {}
        groups: dict[str, set[int]] = {}
        group_links: dict[str, frozenset[Link]] = {}
        for spec in topics:
            if spec.topic_id in by_id:
                raise DuplicateTopicId(f"topic id {spec.topic_id} already used", line_of.get(spec.topic_id))
            if not spec.links:
                raise EmptyLinkSet(f"topic {spec.name} has no links", line_of.get(spec.topic_id))
            by_id[spec.topic_id] = spec
            groups.setdefault(spec.group, set()).add(spec.topic_id)
            known = group_links.setdefault(spec.group, spec.links)
            if known != spec.links:
                raise ConfigError(
                    f"group {spec.group!r} mixes link sets; groups reroute as a unit",
                    line_of.get(spec.topic_id),
                )
        table = cls(topics=tuple(topics))
        object.__setattr__(table, "by_id", by_id)
        object.__setattr__(table, "groups", {g: frozenset(ids) for g, ids in groups.items()})
        return table

    def group_links(self, group: str) -> frozenset[Link]:
        if group not in self.groups:
            raise UnknownGroup(f"unknown group {group!r}")
        any_id = next(iter(self.groups[group]))
        return self.by_id[any_id].links

    def topic_by_name(self, name: str) -> TopicSpec | None:
        for spec in self.topics:
            if spec.name == name:
                return spec
        return None


def parse_link_set(token: str, line: int | None = None) -> frozenset[Link]:
    names = [part for part in token.split(",") if part]
    if not names:
        raise EmptyLinkSet("links= must name at least one of 5g, 2g4", line)
    links = set()
    for name in names:
        try:
            links.add(Link(name))
        except ValueError:
            raise UnknownLinkName(f"unknown link name {name!r} (expected 5g or 2g4)", line) from None
    return frozenset(links)


def _parse_rate(token: str, line: int) -> RateSpec:
    if token.startswith("audio:"):
        body = token[len("audio:"):]
        try:
            sr_text, buf_text = body.split("/")
            sr, buf = int(sr_text), int(buf_text)
        except ValueError:
            raise ConfigSyntaxError(f"bad audio rate {token!r}, expected audio:<sr>/<buf>", line) from None
        if sr <= 0 or buf <= 0:
            raise ConfigSyntaxError(f"audio rate parameters must be positive in {token!r}", line)
        return RateSpec.from_audio(sr, buf)
    try:
        hz = Decimal(token)
    except InvalidOperation:
        raise ConfigSyntaxError(f"bad rate {token!r}", line) from None
    if hz <= 0:
        raise ConfigSyntaxError(f"rate must be positive, got {token!r}", line)
    return RateSpec(hz=Fraction(hz))


_TOPIC_KEYS = ("dir", "mbits", "group", "links", "mode", "rate")


def parse_topic_line(line_text: str, line: int) -> TopicSpec:
    tokens = line_text.split()
    if tokens[0] != "topic" or len(tokens) < 3:
        raise ConfigSyntaxError(f"expected 'topic <id> <name> key=value...', got {line_text!r}", line)
    try:
        topic_id = int(tokens[1])
    except ValueError:
        raise ConfigSyntaxError(f"topic id {tokens[1]!r} is not an integer", line) from None
    if not 0 <= topic_id <= 0xFFFF:
        raise ConfigSyntaxError(f"topic id {topic_id} out of 16-bit range", line)
    name = tokens[2]
    kv = {}
    for token in tokens[3:]:
        if "=" not in token:
            raise ConfigSyntaxError(f"expected key=value, got {token!r}", line)
        key, value = token.split("=", 1)
        if key not in _TOPIC_KEYS:
            raise ConfigSyntaxError(f"unknown key {key!r}", line)
        if key in kv:
            raise ConfigSyntaxError(f"duplicate key {key!r}", line)
        kv[key] = value
    missing = [key for key in _TOPIC_KEYS if key not in kv]
    if missing:
        raise ConfigSyntaxError(f"missing {', '.join(missing)}", line)
    try:
        direction = Direction(kv["dir"])
    except ValueError:
        raise ConfigSyntaxError(f"dir must be down or up, got {kv['dir']!r}", line) from None
    try:
        mbits = Decimal(kv["mbits"])
    except InvalidOperation:
        raise ConfigSyntaxError(f"bad mbits {kv['mbits']!r}", line) from None
    if mbits < 0:
        raise ConfigSyntaxError("mbits must be nonnegative", line)
    try:
        mode = DeliveryMode(kv["mode"])
    except ValueError:
        raise ConfigSyntaxError(f"mode must be latest or dedup, got {kv['mode']!r}", line) from None
    return TopicSpec(
        name=name,
        topic_id=topic_id,
        direction=direction,
        nominal_mbits=mbits,
        group=kv["group"],
        links=parse_link_set(kv["links"], line),
        delivery_mode=mode,
        rate=_parse_rate(kv["rate"], line),
    )


def parse_topic_table(text: str) -> TopicTable:
    """Parse and validate a full table; every error carries its line number."""
    topics: list[TopicSpec] = []
    line_of: dict[int, int] = {}
    for line, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        spec = parse_topic_line(stripped, line)
        topics.append(spec)
        line_of.setdefault(spec.topic_id, line)
        # duplicate ids keep the *second* line for the error message
        if sum(1 for t in topics if t.topic_id == spec.topic_id) > 1:
            line_of[spec.topic_id] = line
    return TopicTable.build(topics, line_of)


def _format_rate(rate: RateSpec) -> str:
    if rate.audio is not None:
        return f"audio:{rate.audio[0]}/{rate.audio[1]}"
    hz = rate.hz
    if hz.denominator == 1:
        return str(hz.numerator)
    return str(Decimal(hz.numerator) / Decimal(hz.denominator))


def format_topic_table(table: TopicTable) -> str:
    """Inverse of parse_topic_table: parse(format(table)) == table."""
    lines = []
    for t in table.topics:
        links = ",".join(link.value for link in ordered_links(t.links))
        lines.append(
            f"topic {t.topic_id} {t.name} dir={t.direction.value} mbits={t.nominal_mbits} "
            f"group={t.group} links={links} mode={t.delivery_mode.value} rate={_format_rate(t.rate)}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def aggregate_bandwidth(table: TopicTable) -> dict[tuple[Direction, Link], Decimal]:
    """Sum of nominal bitrates per (direction, link); decimal-exact.

    A topic routed over both links contributes its full bitrate to each
    carrier, which is exactly what the radio has to haul.
    """
    totals = {(d, l): Decimal("0") for d in Direction for l in Link}
    for t in table.topics:
        for link in t.links:
            totals[(t.direction, link)] += t.nominal_mbits
    return totals


def set_group_links(table: TopicTable, group: str, links) -> TopicTable:
    """Return a new table with every topic of ``group`` moved to ``links``.

    The replacement is atomic: readers hold either the old or the new table,
    never a half-edited group.
    """
    links = frozenset(links)
    if not links:
        raise EmptyLinkSet(f"group {group!r} cannot be routed over zero links")
    if group not in table.groups:
        raise UnknownGroup(f"unknown group {group!r}")
    member_ids = table.groups[group]
    topics = tuple(
        TopicSpec(
            name=t.name,
            topic_id=t.topic_id,
            direction=t.direction,
            nominal_mbits=t.nominal_mbits,
            group=t.group,
            links=links if t.topic_id in member_ids else t.links,
            delivery_mode=t.delivery_mode,
            rate=t.rate,
        )
        for t in table.topics
    )
    return TopicTable.build(topics)
