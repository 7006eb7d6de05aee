"""Paced execution of one scenario with command application between ticks.

The session owns a ScenarioRun and advances it in fixed simulated ticks,
sleeping tick/speed wall seconds in between.  Control commands never mutate
the simulation mid-tick: handlers enqueue them and the loop (or an idle-mode
drain) applies them at the next boundary, resolving a future with the
ack/error outcome.  Everything runs on one event loop, so no locks.
"""

from __future__ import annotations

import asyncio

from ..config import ConfigError, parse_link_set, set_group_links
from ..scenario import Scenario, ScenarioRun
from ..supervisor import UnknownProcess
from . import models

TICK_NS = 100_000_000  # 100 ms simulated per step
FEED_PERIOD_NS = 1_000_000_000  # full-state feed once per simulated second


class SimSession:
    def __init__(self, scenario: Scenario, speed: float = 1.0, seed: int | None = None):
        if speed <= 0:
            raise ValueError("speed must be positive")
        self.scenario = scenario
        self.speed = speed
        self.run = ScenarioRun(scenario, seed=seed)
        self.running = False
        self._pending: list[tuple[models.ControlCommand, asyncio.Future]] = []
        self._subscribers: list[asyncio.Queue] = []
        self._next_feed_ns = FEED_PERIOD_NS
        self._feed_seq = 0

    # -- state access ------------------------------------------------------------

    @property
    def sim(self):
        return self.run.sim

    def now_ns(self) -> int:
        return self.sim.now_ns

    def overview(self) -> dict:
        return self.sim.telemetry.snapshot(self.sim.now_ns)

    def checks(self) -> dict:
        results = self.run.last_check_results
        return {
            "t_s": self.sim.now_ns / 1e9,
            "results": [
                {"name": r.name, "side": r.side.value, "status": r.status.value, "message": r.message}
                for r in results
            ],
        }

    def safety(self) -> dict:
        return self.run.safety.snapshot(self.sim.now_ns)

    def info(self) -> models.ScenarioInfo:
        return models.ScenarioInfo(
            scenario=self.scenario.name,
            seed=self.run.seed,
            duration_s=float(self.scenario.duration_s),
            speed=self.speed,
            sim_time_s=self.sim.now_ns / 1e9,
            running=self.running,
        )

    # -- commands ---------------------------------------------------------------------

    async def submit(self, command: models.ControlCommand) -> models.CommandOutcome:
        """Queue a command for the next tick boundary and await its outcome."""
        future: asyncio.Future = asyncio.get_running_loop().create_future()
        self._pending.append((command, future))
        if not self.running:
            self._drain_commands()
        return await future

    def _drain_commands(self) -> None:
        pending, self._pending = self._pending, []
        for command, future in pending:
            if not future.done():
                future.set_result(self._apply(command))

    def _apply(self, command: models.ControlCommand) -> models.CommandOutcome:
        now_ns = self.sim.now_ns
        try:
            if command.kind == "set_group_links":
                links = parse_link_set(",".join(command.links))
                self.sim.set_table(set_group_links(self.sim.table, command.group, links))
                detail = f"group {command.group} now on {','.join(sorted(command.links))}"
            elif command.kind == "estop_engage":
                self.run.safety.estop_engage(now_ns)
                detail = "e-stop engaged"
            elif command.kind == "estop_release":
                self.run.safety.estop_release(now_ns)
                detail = "e-stop released"
            elif command.kind == "inject_fault":
                detail = self._inject_fault(command, now_ns)
            else:  # pragma: no cover - pydantic discriminator forbids this
                raise ValueError(f"unknown command kind {command.kind!r}")
        except (ConfigError, UnknownProcess, ValueError) as exc:
            return models.CommandOutcome(kind="error", command_id=command.command_id, detail=str(exc))
        return models.CommandOutcome(kind="ack", command_id=command.command_id, detail=detail)

    def _inject_fault(self, command: models.InjectFault, now_ns: int) -> str:
        if command.fault == "syshang":
            self.run.system_hung = True
            return "system hang injected"
        if not command.target:
            raise ValueError(f"{command.fault} fault needs a target process")
        if command.fault == "crash":
            self.run.supervisor.inject_crash(command.target, now_ns)
        else:
            self.run.supervisor.inject_hang(command.target, now_ns)
        return f"{command.fault} injected into {command.target}"

    # -- feed -------------------------------------------------------------------------

    def subscribe(self) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue(maxsize=16)
        self._subscribers.append(queue)
        return queue

    def unsubscribe(self, queue: asyncio.Queue) -> None:
        if queue in self._subscribers:
            self._subscribers.remove(queue)

    def feed_triple(self) -> list[models.FeedMessage]:
        """One full-state snapshot set; the reconnect contract of the panel."""
        msgs = []
        for kind, payload in (("overview", self.overview()), ("checks", self.checks()), ("safety", self.safety())):
            self._feed_seq += 1
            msgs.append(
                models.FeedMessage(kind=kind, seq=self._feed_seq, server_time_ns=self.sim.now_ns, payload=payload)
            )
        return msgs

    def _broadcast(self) -> None:
        if not self._subscribers:
            return
        triple = self.feed_triple()
        for queue in list(self._subscribers):
            for msg in triple:
                if queue.full():
                    try:
                        queue.get_nowait()  # drop oldest; feed is full-state anyway
                    except asyncio.QueueEmpty:
                        pass
                queue.put_nowait(msg)

    # -- pacing --------------------------------------------------------------------------

    def step_once(self) -> None:
        """Apply queued commands, then advance one simulated tick."""
        self._drain_commands()
        self.sim.step(TICK_NS)
        if self.sim.now_ns >= self._next_feed_ns:
            self._next_feed_ns += FEED_PERIOD_NS
            self._broadcast()

    async def run_paced(self) -> None:
        self.running = True
        duration_ns = self.scenario.duration_ns()
        try:
            while self.sim.now_ns < duration_ns:
                self.step_once()
                await asyncio.sleep(TICK_NS / 1e9 / self.speed)
        finally:
            self.running = False
            self._drain_commands()
