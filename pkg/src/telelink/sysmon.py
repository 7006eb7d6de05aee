"""1 Hz health-check framework: registered checks, statuses and the go/no-go gate.

Every check is a named predicate evaluated once per tick with a hard
per-check timeout, so one stuck probe can never stall the whole tick.  The
policy grew from operations practice: whenever an undetected misconfiguration
spoils a run, a dedicated check for that condition is added.  The aggregate
verdict is Go only when every check is Ok; warnings block by default because
runs cannot be manually rescued once started (overridable per deployment).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum


class CheckStatus(str, Enum):
    OK = "ok"
    WARN = "warn"
    ERROR = "error"
    STALE = "stale"


class Side(str, Enum):
    OPERATOR_STATION = "operator_station"
    AVATAR = "avatar"


class Verdict(str, Enum):
    GO = "go"
    NO_GO = "no_go"


class DuplicateName(ValueError):
    pass


@dataclass(frozen=True)
class CheckResult:
    name: str
    side: Side
    status: CheckStatus
    message: str
    updated_at_ns: int


class CheckRegistry:
    """Ordered set of named checks, evaluated concurrently per tick.

    A check function takes the current time in nanoseconds and returns
    (CheckStatus, message).  Exceptions become Error results with the captured
    message; checks that outlive the timeout report Stale.  Registry mutation
    happens only between ticks.

    ``concurrent=False`` evaluates checks inline instead, for simulator runs
    where wall-clock scheduling must not influence results; exception capture
    is identical, only the timeout guard is skipped.
    """

    def __init__(self, timeout_s: float = 0.5, concurrent: bool = True):
        self.timeout_s = timeout_s
        self.concurrent = concurrent
        self._checks: dict[str, tuple[Side, object]] = {}

    def __len__(self) -> int:
        return len(self._checks)

    def names(self) -> list[str]:
        return list(self._checks)

    def register_check(self, name: str, side: Side, fn) -> None:
        if name in self._checks:
            raise DuplicateName(name)
        self._checks[name] = (side, fn)

    def tick(self, now_ns: int) -> list[CheckResult]:
        """Evaluate every check once; total wall time stays under the timeout."""
        results: dict[str, tuple[CheckStatus, str]] = {}

        def run(name, fn):
            try:
                status, message = fn(now_ns)
                results[name] = (CheckStatus(status), str(message))
            except Exception as exc:  # noqa: BLE001 - a crashing check must not kill the tick
                results[name] = (CheckStatus.ERROR, f"check crashed: {exc!r}")

        if self.concurrent:
            threads = []
            for name, (_, fn) in self._checks.items():
                thread = threading.Thread(target=run, args=(name, fn), daemon=True)
                thread.start()
                threads.append(thread)
            deadline = threading.Event()
            timer = threading.Timer(self.timeout_s, deadline.set)
            timer.start()
            for thread in threads:
                while thread.is_alive() and not deadline.is_set():
                    thread.join(timeout=0.01)
            timer.cancel()
        else:
            for name, (_, fn) in self._checks.items():
                run(name, fn)
        out = []
        for name, (side, _) in self._checks.items():
            status, message = results.get(name, (CheckStatus.STALE, f"no result within {self.timeout_s:.1f} s"))
            out.append(CheckResult(name=name, side=side, status=status, message=message, updated_at_ns=now_ns))
        return out


def aggregate(results, warn_is_nogo: bool = True) -> Verdict:
    """Go iff every check passed.  An empty result list is vacuously Go."""
    for result in results:
        if result.status is CheckStatus.OK:
            continue
        if result.status is CheckStatus.WARN and not warn_is_nogo:
            continue
        return Verdict.NO_GO
    return Verdict.GO


def format_check_table(results) -> str:
    """Aligned text table, one line per check, for the CLI."""
    if not results:
        return "(no checks registered)"
    name_w = max(len(r.name) for r in results)
    side_w = max(len(r.side.value) for r in results)
    lines = []
    for r in results:
        marker = " " if r.status is CheckStatus.OK else "!"
        lines.append(f"{marker} {r.name:<{name_w}}  {r.side.value:<{side_w}}  {r.status.value:<5}  {r.message}")
    return "\n".join(lines)


# --- built-in check library -------------------------------------------------
#
# Factories close over the live objects they probe; all of them are pure reads.

def make_link_up_check(signal_fn, link):
    def check(now_ns):
        signal, up = signal_fn(link, now_ns)
        if not up:
            return CheckStatus.ERROR, f"{link.value} link down"
        if signal < 0.2:
            return CheckStatus.WARN, f"{link.value} signal weak ({signal:.2f})"
        return CheckStatus.OK, f"{link.value} up, signal {signal:.2f}"
    return check


def make_group_rate_check(hub, group: str, min_fraction: float = 0.5, mtu_payload: int | None = None):
    from .sources import payload_bytes_per_message
    from .wire import MTU_PAYLOAD

    mtu = mtu_payload or MTU_PAYLOAD

    def check(now_ns):
        table = hub.table
        if group not in table.groups:
            return CheckStatus.ERROR, f"group {group!r} not configured"
        worst = None
        for topic_id in sorted(table.groups[group]):
            spec = table.by_id[topic_id]
            fragments = max(1, -(-payload_bytes_per_message(spec) // mtu))
            expected = float(spec.rate.hz) * fragments
            for link in sorted(spec.links, key=lambda l: l.value):
                pps, _ = hub.flow(topic_id, link).window_rates(now_ns)
                ratio = pps / expected if expected else 1.0
                if worst is None or ratio < worst[0]:
                    worst = (ratio, spec.name, link, pps, expected)
        if worst is None:
            return CheckStatus.ERROR, f"group {group!r} has no topics"
        ratio, name, link, pps, expected = worst
        if ratio < min_fraction:
            return CheckStatus.ERROR, f"{name}@{link.value}: {pps:.0f}/{expected:.0f} pkt/s"
        return CheckStatus.OK, f"{name}@{link.value}: {pps:.0f}/{expected:.0f} pkt/s"
    return check


def make_command_gap_check(receiver, topic_id: int, max_gap_s: float = 0.1):
    def check(now_ns):
        gap = receiver.command_gap_seconds(topic_id, now_ns)
        if gap == float("inf"):
            return CheckStatus.WARN, "no command received yet"
        if gap > max_gap_s:
            return CheckStatus.ERROR, f"command gap {gap * 1000:.0f} ms"
        return CheckStatus.OK, f"command gap {gap * 1000:.1f} ms"
    return check


def make_supervisor_check(supervisor):
    def check(now_ns):
        down = supervisor.not_running()
        if down:
            return CheckStatus.ERROR, "not running: " + ", ".join(down)
        return CheckStatus.OK, f"all {len(supervisor.processes)} processes running"
    return check


def make_estop_check(safety):
    def check(now_ns):
        if safety.is_engaged(now_ns):
            return CheckStatus.ERROR, "e-stop engaged"
        return CheckStatus.OK, "e-stop disengaged"
    return check
