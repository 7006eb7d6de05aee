"""Scenario files: scripted runs of the simulator with self-describing expectations.

A scenario is a line-based file in the same grammar family as the topic
config.  It names a topic table (by path or inline ``topic`` lines), shapes
both links, schedules faults and safety events, and states ``expect`` clauses
that make acceptance runs executable by CI without bespoke test code:

    duration 25
    seed 7
    topics ../configs/finals.cfg
    link 5g latency_ms=2
    burst 5g start=3 dur=0.3 loss=1.0
    outage all start=40 dur=5
    process arm_driver
    fault crash arm_driver at=2
    fault syshang at=30
    estop at=12
    estop_release at=14
    estop_signal_loss from=50 to=52
    collision left force=0.9 at=8
    force left 0.5 from=8 to=10
    route hand_camera links=5g at=6
    reset_receiver down at=41
    expect counts.arm_command_gap_disables == 0
    expect measured_mbits.down.5g ~= 28.1 tol=0.02

Reports are emitted as JSON and CSV with stable field names (docs/metrics.md)
plus a human-readable transition log.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .config import (
    Direction,
    Link,
    TopicTable,
    ordered_links,
    parse_link_set,
    parse_topic_table,
    set_group_links,
)
from .linksim import (
    PRIO_DIRECTIVE,
    PRIO_ESTOP,
    PRIO_PERIODIC,
    JitterBurst,
    LinkProfile,
    LinkSim,
    Outage,
)
from .safety import ArmId, SafetyController
from .sources import NS_PER_S
from .supervisor import Supervisor, SystemWatchdog
from .sysmon import (
    CheckRegistry,
    Side,
    make_command_gap_check,
    make_estop_check,
    make_group_rate_check,
    make_link_up_check,
    make_supervisor_check,
)

SAFETY_TICK_NS = 10_000_000        # 10 ms
SUPERVISOR_TICK_NS = 100_000_000   # 100 ms
WATCHDOG_TICK_NS = 250_000_000     # 250 ms
SYSMON_TICK_NS = 1_000_000_000     # 1 s
PET_INTERVAL_NS = 1_000_000_000    # 1 s
ESTOP_HB_NS = 100_000_000          # 100 ms
PROC_HB_NS = 500_000_000           # 500 ms

EXPECT_OPS = ("==", "!=", "<=", ">=", "<", ">", "~=")


class ScenarioInvalid(Exception):
    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        super().__init__(reason if line is None else f"line {line}: {reason}")


@dataclass(frozen=True)
class Directive:
    kind: str
    at_ns: int
    args: tuple


@dataclass(frozen=True)
class Expect:
    key: str
    op: str
    value: float
    tol: float | None = None

    def text(self) -> str:
        base = f"{self.key} {self.op} {self.value:g}"
        return base if self.tol is None else f"{base} tol={self.tol:g}"


@dataclass
class Scenario:
    name: str
    duration_s: Decimal
    seed: int
    table: TopicTable
    profiles: dict[Link, LinkProfile]
    directives: list[Directive] = field(default_factory=list)
    expects: list[Expect] = field(default_factory=list)
    processes: list[dict] = field(default_factory=list)
    arm_topic: str = "arm_control"
    safety_params: dict = field(default_factory=dict)
    watchdog_params: dict = field(default_factory=dict)

    def duration_ns(self) -> int:
        return int(self.duration_s * NS_PER_S)


def _num(token: str, line: int, what: str) -> Decimal:
    try:
        return Decimal(token)
    except InvalidOperation:
        raise ScenarioInvalid(f"bad {what} {token!r}", line) from None


def _at_ns(kv: dict, line: int, key: str = "at") -> int:
    if key not in kv:
        raise ScenarioInvalid(f"missing {key}=<seconds>", line)
    return int(_num(kv[key], line, key) * NS_PER_S)


def _kv(tokens: list[str], line: int) -> dict:
    out = {}
    for token in tokens:
        if "=" not in token:
            raise ScenarioInvalid(f"expected key=value, got {token!r}", line)
        key, value = token.split("=", 1)
        out[key] = value
    return out


def parse_scenario(text: str, base_dir: Path | None = None, name: str = "scenario") -> Scenario:
    base_dir = base_dir or Path.cwd()
    duration = Decimal(10)
    seed = 0
    table: TopicTable | None = None
    inline_topics: list[str] = []
    profile_kv: dict[Link, dict] = {}
    bursts: dict[Link, list[JitterBurst]] = {link: [] for link in Link}
    outages: dict[Link, list[Outage]] = {link: [] for link in Link}
    signals: dict[Link, list[tuple[float, float]]] = {link: [] for link in Link}
    directives: list[Directive] = []
    expects: list[Expect] = []
    processes: list[dict] = []
    arm_topic = "arm_control"
    safety_params: dict = {}
    watchdog_params: dict = {}
    scenario_name = name

    def links_for(token: str, line: int) -> list[Link]:
        if token == "all":
            return ordered_links(Link)
        try:
            return [Link(token)]
        except ValueError:
            raise ScenarioInvalid(f"unknown link {token!r} (expected 5g, 2g4 or all)", line) from None

    for line, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        tokens = stripped.split()
        word = tokens[0]
        if word == "name":
            scenario_name = " ".join(tokens[1:]) or scenario_name
        elif word == "duration":
            duration = _num(tokens[1], line, "duration")
            if duration <= 0:
                raise ScenarioInvalid("duration must be positive", line)
        elif word == "seed":
            seed = int(tokens[1])
        elif word == "topics":
            path = (base_dir / tokens[1]).resolve()
            if not path.exists():
                raise ScenarioInvalid(f"topic table {tokens[1]!r} not found", line)
            table = parse_topic_table(path.read_text())
        elif word == "topic":
            inline_topics.append(stripped)
        elif word == "link":
            link = links_for(tokens[1], line)[0]
            kv = _kv(tokens[2:], line)
            profile_kv[link] = kv
            if "signal" in kv:
                signals[link].append((0.0, float(kv.pop("signal"))))
        elif word == "burst":
            for link in links_for(tokens[1], line):
                kv = _kv(tokens[2:], line)
                bursts[link].append(
                    JitterBurst(
                        start_s=float(_num(kv.get("start", "0"), line, "start")),
                        duration_s=float(_num(kv.get("dur", "0"), line, "dur")),
                        added_latency_ms=float(_num(kv.get("latency_ms", "0"), line, "latency_ms")),
                        burst_loss_prob=float(_num(kv.get("loss", "0"), line, "loss")),
                    )
                )
        elif word == "outage":
            for link in links_for(tokens[1], line):
                kv = _kv(tokens[2:], line)
                outages[link].append(
                    Outage(
                        start_s=float(_num(kv.get("start", "0"), line, "start")),
                        duration_s=float(_num(kv.get("dur", "0"), line, "dur")),
                    )
                )
        elif word == "signal":
            for link in links_for(tokens[1], line):
                kv = _kv(tokens[2:], line)
                signals[link].append((float(_num(kv.get("at", "0"), line, "at")), float(kv.get("level", "1"))))
        elif word == "process":
            kv = _kv(tokens[2:], line)
            entry = {"name": tokens[1]}
            for key, target in (("respawn_ms", "respawn_delay_ms"), ("timeout_ms", "heartbeat_timeout_ms"), ("start_ms", "start_duration_ms")):
                if key in kv:
                    entry[target] = int(kv[key])
            processes.append(entry)
        elif word == "fault":
            fault = tokens[1]
            if fault == "syshang":
                kv = _kv(tokens[2:], line)
                directives.append(Directive("syshang", _at_ns(kv, line), ()))
            elif fault in ("crash", "hang"):
                target = tokens[2]
                kv = _kv(tokens[3:], line)
                directives.append(Directive(fault, _at_ns(kv, line), (target,)))
            else:
                raise ScenarioInvalid(f"unknown fault {fault!r}", line)
        elif word == "estop":
            kv = _kv(tokens[1:], line)
            directives.append(Directive("estop", _at_ns(kv, line), ()))
        elif word == "estop_release":
            kv = _kv(tokens[1:], line)
            directives.append(Directive("estop_release", _at_ns(kv, line), ()))
        elif word == "estop_signal_loss":
            kv = _kv(tokens[1:], line)
            start = _at_ns(kv, line, "from")
            end = _at_ns(kv, line, "to")
            directives.append(Directive("estop_signal_loss", start, (end,)))
        elif word == "collision":
            arm = _arm(tokens[1], line)
            kv = _kv(tokens[2:], line)
            force = float(_num(kv.get("force", "0"), line, "force"))
            directives.append(Directive("collision", _at_ns(kv, line), (arm, force)))
        elif word == "force":
            arm = _arm(tokens[1], line)
            force = float(_num(tokens[2], line, "force"))
            kv = _kv(tokens[3:], line)
            directives.append(Directive("force", _at_ns(kv, line, "from"), (arm, force, _at_ns(kv, line, "to"))))
        elif word == "route":
            group = tokens[1]
            kv = _kv(tokens[2:], line)
            if "links" not in kv:
                raise ScenarioInvalid("route needs links=<5g[,2g4]>", line)
            links = parse_link_set(kv["links"], line)
            directives.append(Directive("route", _at_ns(kv, line), (group, links)))
        elif word == "reset_receiver":
            try:
                direction = Direction(tokens[1])
            except (IndexError, ValueError):
                raise ScenarioInvalid("reset_receiver needs a direction (down|up)", line) from None
            kv = _kv(tokens[2:], line)
            directives.append(Directive("reset_receiver", _at_ns(kv, line), (direction,)))
        elif word == "arm_topic":
            arm_topic = tokens[1]
        elif word == "safety":
            kv = _kv(tokens[1:], line)
            for key in kv:
                if key not in ("gap_threshold_s", "force_threshold", "collision_threshold", "restart_s", "fade_s", "estop_timeout_ms"):
                    raise ScenarioInvalid(f"unknown safety parameter {key!r}", line)
            safety_params.update({k: float(v) for k, v in kv.items()})
        elif word == "watchdog":
            kv = _kv(tokens[1:], line)
            for key in kv:
                if key not in ("expiry_ms", "boot_s", "pet_ms"):
                    raise ScenarioInvalid(f"unknown watchdog parameter {key!r}", line)
            watchdog_params.update({k: float(v) for k, v in kv.items()})
        elif word == "expect":
            expects.append(_parse_expect(tokens[1:], line))
        else:
            raise ScenarioInvalid(f"unknown directive {word!r}", line)

    if inline_topics:
        if table is not None:
            raise ScenarioInvalid("use either a topics file or inline topic lines, not both")
        table = parse_topic_table("\n".join(inline_topics))
    if table is None:
        raise ScenarioInvalid("scenario names no topics (topics <path> or inline topic lines)")

    profiles: dict[Link, LinkProfile] = {}
    for link in ordered_links(Link):
        kv = profile_kv.get(link, {})
        known = {"latency_ms", "loss", "cap_mbits"}
        unknown = set(kv) - known
        if unknown:
            raise ScenarioInvalid(f"unknown link parameter(s) {sorted(unknown)} for {link.value}")
        cap = kv.get("cap_mbits")
        profiles[link] = LinkProfile(
            link=link,
            base_latency_ms=float(kv.get("latency_ms", "2" if link is Link.GHZ5 else "3")),
            loss_prob=float(kv.get("loss", "0")),
            bandwidth_cap_mbits=None if cap in (None, "none") else Decimal(cap),
            jitter_bursts=tuple(bursts[link]),
            outages=tuple(outages[link]),
            signal_model=tuple(signals[link]) or ((0.0, 1.0),),
        )

    declared = {p["name"] for p in processes}
    for directive in directives:
        if directive.kind in ("crash", "hang") and directive.args[0] not in declared:
            raise ScenarioInvalid(f"fault targets undeclared process {directive.args[0]!r}")
        if directive.kind == "route" and directive.args[0] not in table.groups:
            raise ScenarioInvalid(f"route targets unknown group {directive.args[0]!r}")

    return Scenario(
        name=scenario_name,
        duration_s=duration,
        seed=seed,
        table=table,
        profiles=profiles,
        directives=sorted(directives, key=lambda d: (d.at_ns, d.kind)),
        expects=expects,
        processes=processes,
        arm_topic=arm_topic,
        safety_params=safety_params,
        watchdog_params=watchdog_params,
    )


def _arm(token: str, line: int) -> ArmId:
    try:
        return ArmId(token)
    except ValueError:
        raise ScenarioInvalid(f"unknown arm {token!r} (expected left or right)", line) from None


def _parse_expect(tokens: list[str], line: int) -> Expect:
    if len(tokens) < 3:
        raise ScenarioInvalid("expect needs: <key> <op> <value>", line)
    key, op = tokens[0], tokens[1]
    if op not in EXPECT_OPS:
        raise ScenarioInvalid(f"unknown operator {op!r}", line)
    value = float(_num(tokens[2], line, "expect value"))
    tol = None
    for token in tokens[3:]:
        if token.startswith("tol="):
            tol = float(token[4:])
        else:
            raise ScenarioInvalid(f"unexpected token {token!r} in expect", line)
    if op == "~=" and tol is None:
        tol = 0.02
    return Expect(key=key, op=op, value=value, tol=tol)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioInvalid(f"scenario file {path} not found")
    return parse_scenario(path.read_text(), base_dir=path.parent, name=path.stem)


# --- execution -----------------------------------------------------------------


class _UplinkGap:
    """Always reads the sim's *current* uplink receiver, which scenario
    directives may kill and recreate mid-run."""

    def __init__(self, sim):
        self._sim = sim

    def command_gap_seconds(self, topic_id: int, now_ns: int) -> float:
        return self._sim.receivers[Direction.UP].command_gap_seconds(topic_id, now_ns)


class ScenarioRun:
    """One wired-up execution: simulator plus supervision, safety and sysmon."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.sim = LinkSim(scenario.table, dict(scenario.profiles), seed=self.seed)
        wd = SystemWatchdog(
            pet_interval_ms=int(scenario.watchdog_params.get("pet_ms", 1000)),
            expiry_ms=int(scenario.watchdog_params.get("expiry_ms", 10000)),
            boot_duration_s=float(scenario.watchdog_params.get("boot_s", 45.0)),
        )
        self.supervisor = Supervisor(watchdog=wd)
        for proc in scenario.processes:
            self.supervisor.register(**proc)
        sp = scenario.safety_params
        self.safety = SafetyController(
            gap_threshold_s=sp.get("gap_threshold_s", 0.1),
            force_threshold=sp.get("force_threshold", 0.2),
            collision_threshold=sp.get("collision_threshold", 0.8),
            restart_duration_s=sp.get("restart_s", 3.0),
            fade_duration_s=sp.get("fade_s", 2.0),
        )
        if "estop_timeout_ms" in sp:
            self.safety.estop.heartbeat_timeout_ms = int(sp["estop_timeout_ms"])
        self.system_hung = False
        self._estop_loss_windows: list[tuple[int, int]] = []
        self._force_windows: dict[ArmId, list[tuple[int, int, float]]] = {arm: [] for arm in ArmId}
        arm_spec = scenario.table.topic_by_name(scenario.arm_topic)
        self.arm_topic_id = arm_spec.topic_id if arm_spec else None
        # inline checks keep scenario runs independent of wall-clock scheduling
        self.registry = CheckRegistry(concurrent=False)
        self.last_check_results = []
        self._fault_marks: list[dict] = []
        self._register_checks()
        self._schedule_periodics()
        self._schedule_directives()
        self.sim.arm_sources()

    # -- wiring ------------------------------------------------------------------

    def _register_checks(self) -> None:
        for link in ordered_links(Link):
            self.registry.register_check(f"wifi_{link.value}_up", Side.AVATAR, make_link_up_check(self.sim.link_signal, link))
        for group in sorted(self.scenario.table.groups):
            self.registry.register_check(f"rate_{group}", Side.OPERATOR_STATION, make_group_rate_check(self.sim.telemetry, group))
        if self.arm_topic_id is not None:
            self.registry.register_check(
                "arm_command_gap",
                Side.AVATAR,
                make_command_gap_check(_UplinkGap(self.sim), self.arm_topic_id, self.safety.gap_threshold_s),
            )
        if self.supervisor.processes:
            self.registry.register_check("supervisor_all_running", Side.AVATAR, make_supervisor_check(self.supervisor))
        self.registry.register_check("estop_disengaged", Side.OPERATOR_STATION, make_estop_check(self.safety))

    def _schedule_periodics(self) -> None:
        sim = self.sim
        sim.schedule_every(SAFETY_TICK_NS, PRIO_PERIODIC, self._safety_tick)
        sim.schedule_every(SUPERVISOR_TICK_NS, PRIO_PERIODIC, self._supervisor_tick)
        sim.schedule_every(WATCHDOG_TICK_NS, PRIO_PERIODIC, self._watchdog_tick)
        sim.schedule_every(PET_INTERVAL_NS, PRIO_PERIODIC, self._pet_tick)
        sim.schedule_every(ESTOP_HB_NS, PRIO_PERIODIC, self._estop_hb_tick)
        sim.schedule_every(PROC_HB_NS, PRIO_PERIODIC, self._proc_hb_tick)
        sim.schedule_every(SYSMON_TICK_NS, PRIO_PERIODIC, self._sysmon_tick, start_ns=SYSMON_TICK_NS)

    def _schedule_directives(self) -> None:
        for directive in self.scenario.directives:
            prio = PRIO_ESTOP if directive.kind.startswith("estop") else PRIO_DIRECTIVE
            self.sim.schedule(directive.at_ns, prio, self._apply_directive, directive)

    # -- directive handlers ----------------------------------------------------------

    def _apply_directive(self, now_ns: int, directive: Directive) -> None:
        kind, args = directive.kind, directive.args
        if kind == "estop":
            self.safety.estop_engage(now_ns)
        elif kind == "estop_release":
            self.safety.estop_release(now_ns)
        elif kind == "estop_signal_loss":
            self._estop_loss_windows.append((directive.at_ns, args[0]))
        elif kind == "collision":
            self.safety.collision_event(args[0], args[1], now_ns)
        elif kind == "force":
            arm, force, until_ns = args
            self._force_windows[arm].append((directive.at_ns, until_ns, force))
        elif kind == "crash":
            self.supervisor.inject_crash(args[0], now_ns)
            self._fault_marks.append({"kind": "crash", "target": args[0], "at_ns": now_ns})
        elif kind == "hang":
            self.supervisor.inject_hang(args[0], now_ns)
            self._fault_marks.append({"kind": "hang", "target": args[0], "at_ns": now_ns})
        elif kind == "syshang":
            self.system_hung = True
            self._fault_marks.append({"kind": "syshang", "target": "system", "at_ns": now_ns})
        elif kind == "route":
            self.sim.set_table(set_group_links(self.sim.table, args[0], args[1]))
        elif kind == "reset_receiver":
            self.sim.reset_receiver(args[0])

    # -- periodic handlers ---------------------------------------------------------------

    def _current_force(self, arm: ArmId, now_ns: int) -> float:
        force = 0.0
        for start, end, value in self._force_windows[arm]:
            if start <= now_ns < end:
                force = value
        return force

    def _safety_tick(self, now_ns: int) -> None:
        for arm in ArmId:
            self.safety.set_external_force(arm, self._current_force(arm, now_ns))
        gaps = None
        if self.arm_topic_id is not None:
            gap = self.sim.receivers[Direction.UP].command_gap_seconds(self.arm_topic_id, now_ns)
            gaps = {ArmId.LEFT: gap, ArmId.RIGHT: gap}
        self.safety.tick(now_ns, gaps)

    def _supervisor_tick(self, now_ns: int) -> None:
        if self.system_hung:
            return  # the supervisor is part of the hung system
        self.supervisor.supervise_tick(now_ns)

    def _watchdog_tick(self, now_ns: int) -> None:
        reset = self.supervisor.system_watchdog_tick(now_ns)
        if reset is not None:
            self.system_hung = False  # the reset is what un-wedges the machine

    def _pet_tick(self, now_ns: int) -> None:
        if self.system_hung or self.supervisor.watchdog.reset_in_progress:
            return
        self.supervisor.watchdog.pet(now_ns)

    def _estop_hb_tick(self, now_ns: int) -> None:
        for start, end in self._estop_loss_windows:
            if start <= now_ns < end:
                return
        self.safety.estop_heartbeat(now_ns)

    def _proc_hb_tick(self, now_ns: int) -> None:
        if self.system_hung:
            return
        for name, proc in self.supervisor.processes.items():
            if proc.state.value == "running" and not self.supervisor.is_silenced(name):
                self.supervisor.heartbeat(name, now_ns)

    def _sysmon_tick(self, now_ns: int) -> None:
        self.last_check_results = self.registry.tick(now_ns)

    # -- execution ------------------------------------------------------------------------

    def run(self) -> dict:
        self.sim.run_until(self.scenario.duration_ns())
        return self.build_report()

    # -- reporting -------------------------------------------------------------------------

    def build_report(self) -> dict:
        scenario = self.scenario
        sim = self.sim
        duration_s = float(scenario.duration_s)
        in_flight = sim.in_flight()

        flows = []
        conservation_ok = True
        measured = {d.value: {l.value: 0.0 for l in Link} for d in Direction}
        for spec in scenario.table.topics:
            for link in ordered_links(Link):
                counters = sim.link_counters.get((spec.topic_id, link))
                if counters is None:
                    continue
                flight = in_flight.get((spec.topic_id, link), 0)
                if counters.sent != counters.delivered + counters.dropped_loss + counters.dropped_congestion + flight:
                    conservation_ok = False
                mbits = counters.payload_bits_delivered / duration_s / 1e6
                measured[spec.direction.value][link.value] += mbits
                flows.append(
                    {
                        "topic_id": spec.topic_id,
                        "name": spec.name,
                        "direction": spec.direction.value,
                        "link": link.value,
                        "sent": counters.sent,
                        "delivered": counters.delivered,
                        "dropped_loss": counters.dropped_loss,
                        "dropped_congestion": counters.dropped_congestion,
                        "in_flight": flight,
                        "mbits_measured": mbits,
                    }
                )

        topics = {}
        for spec in scenario.table.topics:
            counters = sim.topic_counters.get(spec.topic_id)
            sent = counters.messages_sent if counters else 0
            delivered = counters.messages_delivered if counters else 0
            latency = None
            if counters and counters.latency_ns_min is not None:
                latency = {
                    "min_ms": counters.latency_ns_min / 1e6,
                    "mean_ms": counters.latency_ns_total / max(1, delivered) / 1e6,
                    "max_ms": counters.latency_ns_max / 1e6,
                }
            topics[spec.name] = {
                "topic_id": spec.topic_id,
                "direction": spec.direction.value,
                "links": [link.value for link in ordered_links(spec.links)],
                "messages_sent": sent,
                "messages_delivered": delivered,
                "delivered_fraction": (delivered / sent) if sent else None,
                "message_rate_hz": delivered / duration_s,
                "latency": latency,
            }

        transitions = [t.as_dict() for t in self.safety.transitions] + [
            t.as_dict() for t in self.supervisor.transitions
        ]
        transitions.sort(key=lambda t: (t["t_s"], t["component"], t["to"]))

        counts = {
            "arm_command_gap_disables": sum(
                1
                for t in transitions
                if t["component"].startswith("arm_") and t["to"] == "soft_stop" and t["cause"] == "command_gap"
            ),
            "arm_disables": sum(
                1 for t in transitions if t["component"].startswith("arm_") and t["to"] in ("soft_stop", "hard_stop")
            ),
            "arm_recoveries": sum(
                1 for t in transitions if t["component"].startswith("arm_") and t["to"] == "operational"
            ),
            "command_gap_events": len(self.safety.command_gap_events),
            "system_resets": self.supervisor.watchdog.reset_count,
            "transitions_total": len(transitions),
        }

        recovery_events = []
        for mark in self._fault_marks:
            recovered_ns = None
            if mark["kind"] in ("crash", "hang"):
                for t in self.supervisor.transitions:
                    if t.component == mark["target"] and t.to_state == "running" and t.t_ns > mark["at_ns"]:
                        recovered_ns = t.t_ns
                        break
            else:
                for t in self.supervisor.transitions:
                    if t.component == "system" and t.to_state == "running" and t.t_ns > mark["at_ns"]:
                        recovered_ns = t.t_ns
                        break
            recovery_events.append(
                {
                    "kind": mark["kind"],
                    "target": mark["target"],
                    "at_s": mark["at_ns"] / 1e9,
                    "recovered_at_s": recovered_ns / 1e9 if recovered_ns is not None else None,
                    "duration_s": (recovered_ns - mark["at_ns"]) / 1e9 if recovered_ns is not None else None,
                }
            )
        durations = [e["duration_s"] for e in recovery_events if e["duration_s"] is not None]

        report = {
            "scenario": scenario.name,
            "seed": self.seed,
            "duration_s": duration_s,
            "measured_mbits": measured,
            "flows": flows,
            "topics": topics,
            "counts": counts,
            "command_gaps": self.safety.command_gap_events,
            "transitions": transitions,
            "recovery": {
                "events": recovery_events,
                "max_duration_s": max(durations) if durations else None,
                "all_recovered": all(e["duration_s"] is not None for e in recovery_events),
            },
            "checks_final": [
                {"name": r.name, "side": r.side.value, "status": r.status.value, "message": r.message}
                for r in self.last_check_results
            ],
            "conservation_ok": conservation_ok,
            "safety_final": self.safety.snapshot(sim.now_ns),
        }
        report["expects"] = [evaluate_expect(e, report) for e in scenario.expects]
        report["expects_ok"] = all(e["ok"] for e in report["expects"])
        return report


ALIASES = {
    "arm_command_gap_disables": "counts.arm_command_gap_disables",
    "arm_disables": "counts.arm_disables",
    "arm_recoveries": "counts.arm_recoveries",
    "command_gap_events": "counts.command_gap_events",
    "system_resets": "counts.system_resets",
    "recovery_max_s": "recovery.max_duration_s",
}


def resolve_metric(key: str, report: dict):
    path = ALIASES.get(key, key)
    node = report
    for part in path.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(f"unknown metric {key!r}")
    return node


def evaluate_expect(expect: Expect, report: dict) -> dict:
    try:
        actual = resolve_metric(expect.key, report)
    except KeyError as exc:
        return {"expr": expect.text(), "ok": False, "actual": None, "error": str(exc)}
    ok: bool
    if actual is None:
        ok = False
    elif expect.op == "==":
        ok = float(actual) == expect.value
    elif expect.op == "!=":
        ok = float(actual) != expect.value
    elif expect.op == "<":
        ok = float(actual) < expect.value
    elif expect.op == "<=":
        ok = float(actual) <= expect.value
    elif expect.op == ">":
        ok = float(actual) > expect.value
    elif expect.op == ">=":
        ok = float(actual) >= expect.value
    else:  # ~=
        tol = expect.tol if expect.tol is not None else 0.02
        ok = abs(float(actual) - expect.value) <= tol * abs(expect.value)
    return {"expr": expect.text(), "ok": ok, "actual": actual}


def run_scenario(scenario: Scenario, seed: int | None = None) -> dict:
    """Execute a scenario and return its metrics report."""
    return ScenarioRun(scenario, seed=seed).run()


# --- report serialization ---------------------------------------------------------


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


CSV_COLUMNS = (
    "scenario",
    "topic_id",
    "name",
    "direction",
    "link",
    "sent",
    "delivered",
    "dropped_loss",
    "dropped_congestion",
    "in_flight",
    "mbits_measured",
)


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for flow in report["flows"]:
        writer.writerow(
            [
                report["scenario"],
                flow["topic_id"],
                flow["name"],
                flow["direction"],
                flow["link"],
                flow["sent"],
                flow["delivered"],
                flow["dropped_loss"],
                flow["dropped_congestion"],
                flow["in_flight"],
                f"{flow['mbits_measured']:.6f}",
            ]
        )
    return buf.getvalue()


def transitions_log(report: dict) -> str:
    lines = [
        f"t={t['t_s']:.3f} {t['component']} {t['from']}->{t['to']} cause={t['cause']}"
        for t in report["transitions"]
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def write_report(report: dict, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics.json": out / "metrics.json",
        "metrics.csv": out / "metrics.csv",
        "transitions.log": out / "transitions.log",
    }
    paths["metrics.json"].write_text(report_json(report))
    paths["metrics.csv"].write_text(report_csv(report))
    paths["transitions.log"].write_text(transitions_log(report))
    return paths
