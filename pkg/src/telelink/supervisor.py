"""Three-layer auto-recovery ladder: respawn, stuck-process watchdog, system reset.

Layer 1 restarts any process that exits.  Layer 2 force-exits processes that
stop producing heartbeats, handing them back to layer 1.  Layer 3 models an
external hardware watchdog that resets the whole computer when the petting
software itself dies; after the modeled reboot everything auto-starts and
operation resumes.  The per-layer budgets (respawn 1 s, heartbeat timeout
2 s, watchdog expiry 10 s, boot 45 s) compose so each layer triggers strictly
before the next and a full reset returns to operational in 55 s, inside the
one-minute budget.

Processes are modeled entities here; a deployment backend can map the same
state machine onto real child processes.  The supervisor is the single owner
of all process state and every transition lands in an append-only log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000


class ProcState(str, Enum):
    RUNNING = "running"
    CRASHED = "crashed"
    HUNG = "hung"
    RESTARTING = "restarting"


class UnknownProcess(KeyError):
    pass


@dataclass(frozen=True)
class Transition:
    t_ns: int
    component: str
    from_state: str
    to_state: str
    cause: str

    def as_dict(self) -> dict:
        return {
            "t_s": self.t_ns / 1e9,
            "component": self.component,
            "from": self.from_state,
            "to": self.to_state,
            "cause": self.cause,
        }


@dataclass
class ManagedProcess:
    name: str
    state: ProcState = ProcState.RUNNING
    restart_count: int = 0
    last_heartbeat_ns: int = 0
    respawn_delay_ms: int = 1000
    heartbeat_timeout_ms: int = 2000
    start_duration_ms: int = 2000
    respawn_at_ns: int | None = field(default=None, repr=False)
    running_at_ns: int | None = field(default=None, repr=False)


@dataclass
class SystemReset:
    t_ns: int
    operational_at_ns: int


class SystemWatchdog:
    """External reset device: fires when the software stops petting it."""

    def __init__(
        self,
        pet_interval_ms: int = 1000,
        expiry_ms: int = 10000,
        boot_duration_s: float = 45.0,
        armed: bool = True,
    ):
        if expiry_ms <= pet_interval_ms:
            raise ValueError("watchdog expiry must exceed the pet interval")
        self.pet_interval_ms = pet_interval_ms
        self.expiry_ms = expiry_ms
        self.boot_duration_s = boot_duration_s
        self.armed = armed
        self.reset_in_progress = False
        self.last_pet_ns = 0
        self.boot_done_ns: int | None = None
        self.reset_count = 0

    def pet(self, now_ns: int) -> None:
        self.last_pet_ns = now_ns

    def expired(self, now_ns: int) -> bool:
        return self.armed and not self.reset_in_progress and (
            now_ns - self.last_pet_ns > self.expiry_ms * NS_PER_MS
        )


class Supervisor:
    """Owns all managed-process state; interaction happens via heartbeats and faults."""

    def __init__(self, watchdog: SystemWatchdog | None = None):
        self.processes: dict[str, ManagedProcess] = {}
        self.watchdog = watchdog or SystemWatchdog()
        self.transitions: list[Transition] = []
        self._silenced: set[str] = set()  # injected hangs: heartbeats suppressed

    def register(self, name: str, **kwargs) -> ManagedProcess:
        if name in self.processes:
            raise ValueError(f"process {name!r} already registered")
        proc = ManagedProcess(name=name, **kwargs)
        self.processes[name] = proc
        return proc

    def _proc(self, name: str) -> ManagedProcess:
        proc = self.processes.get(name)
        if proc is None:
            raise UnknownProcess(name)
        return proc

    def _log(self, now_ns: int, proc: ManagedProcess, to_state: ProcState, cause: str) -> Transition:
        tr = Transition(now_ns, proc.name, proc.state.value, to_state.value, cause)
        self.transitions.append(tr)
        proc.state = to_state
        return tr

    # -- liveness and fault inputs -------------------------------------------

    def heartbeat(self, name: str, now_ns: int) -> None:
        proc = self._proc(name)
        if proc.state is not ProcState.RUNNING:
            # a crashed/restarting process has no live pid to speak for
            raise UnknownProcess(f"{name} is {proc.state.value}")
        proc.last_heartbeat_ns = now_ns

    def is_silenced(self, name: str) -> bool:
        return name in self._silenced

    def inject_crash(self, name: str, now_ns: int) -> None:
        proc = self._proc(name)
        if proc.state is not ProcState.RUNNING:
            return
        self._log(now_ns, proc, ProcState.CRASHED, "injected_crash")
        proc.respawn_at_ns = now_ns + proc.respawn_delay_ms * NS_PER_MS

    def inject_hang(self, name: str, now_ns: int) -> None:
        """The process keeps its pid but stops producing output."""
        self._proc(name)
        self._silenced.add(name)

    # -- periodic work ---------------------------------------------------------

    def supervise_tick(self, now_ns: int) -> list[Transition]:
        """Advance every process through the recovery machine; returns new transitions."""
        new: list[Transition] = []
        for proc in self.processes.values():
            if proc.state is ProcState.RUNNING:
                silent_ns = now_ns - proc.last_heartbeat_ns
                if silent_ns > proc.heartbeat_timeout_ms * NS_PER_MS:
                    new.append(self._log(now_ns, proc, ProcState.HUNG, "heartbeat_timeout"))
                    new.append(self._log(now_ns, proc, ProcState.CRASHED, "forced_exit"))
                    proc.respawn_at_ns = now_ns + proc.respawn_delay_ms * NS_PER_MS
                    self._silenced.discard(proc.name)
            if proc.state is ProcState.CRASHED and proc.respawn_at_ns is not None and now_ns >= proc.respawn_at_ns:
                new.append(self._log(now_ns, proc, ProcState.RESTARTING, "respawn"))
                proc.respawn_at_ns = None
                proc.running_at_ns = now_ns + proc.start_duration_ms * NS_PER_MS
            if proc.state is ProcState.RESTARTING and proc.running_at_ns is not None and now_ns >= proc.running_at_ns:
                new.append(self._log(now_ns, proc, ProcState.RUNNING, "started"))
                proc.running_at_ns = None
                proc.restart_count += 1
                proc.last_heartbeat_ns = now_ns
                self._silenced.discard(proc.name)
        return new

    def system_watchdog_tick(self, now_ns: int) -> SystemReset | None:
        """Fire the hardware reset if the pet deadline passed; model the reboot."""
        wd = self.watchdog
        if wd.reset_in_progress:
            if wd.boot_done_ns is not None and now_ns >= wd.boot_done_ns:
                wd.reset_in_progress = False
                wd.boot_done_ns = None
                wd.last_pet_ns = now_ns
                self.transitions.append(Transition(now_ns, "system", "resetting", "running", "boot_complete"))
            return None
        if not wd.expired(now_ns):
            return None
        wd.reset_count += 1
        wd.reset_in_progress = True
        boot_ns = int(wd.boot_duration_s * NS_PER_S)
        wd.boot_done_ns = now_ns + boot_ns
        self.transitions.append(Transition(now_ns, "system", "running", "resetting", "watchdog_expiry"))
        for proc in self.processes.values():
            if proc.state is not ProcState.RESTARTING:
                self._log(now_ns, proc, ProcState.RESTARTING, "system_reset")
            proc.respawn_at_ns = None
            proc.running_at_ns = now_ns + boot_ns
        self._silenced.clear()
        return SystemReset(t_ns=now_ns, operational_at_ns=now_ns + boot_ns)

    # -- queries -----------------------------------------------------------------

    def all_running(self) -> bool:
        return all(p.state is ProcState.RUNNING for p in self.processes.values())

    def not_running(self) -> list[str]:
        return [p.name for p in self.processes.values() if p.state is not ProcState.RUNNING]
