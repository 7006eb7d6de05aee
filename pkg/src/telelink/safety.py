"""Wireless E-stop semantics and the arm disable / auto-recovery state machine.

Engaging the E-stop does two things at once: the base command output is
forced to zero (the platform coasts to a stop and can be pushed by hand) and
every arm holds its current joint positions.  Loss of the E-stop radio
heartbeat is treated as engaged (fail-safe).

Arms that stopped themselves (command gap, collision force) are recovered by
an autonomous observer, but only while the manual E-stop is not engaged and
no external force presses on the arm; recovery runs through a fixed restart
phase and then softly fades the held pose to the live operator pose before
normal mirroring resumes.  Thresholds are in normalized force units: what is
contractual is their ordering and blocking semantics, not their magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

NS_PER_S = 1_000_000_000

JOINTS = 7
Pose = tuple[float, ...]
ZERO_POSE: Pose = (0.0,) * JOINTS


class ArmId(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class ArmMode(str, Enum):
    OPERATIONAL = "operational"
    SOFT_STOP = "soft_stop"
    HARD_STOP = "hard_stop"
    RESTARTING = "restarting"
    FADING = "fading"


class Cause(str, Enum):
    COMMAND_GAP = "command_gap"
    COLLISION = "collision"
    ESTOP = "estop"
    ESTOP_SIGNAL_LOSS = "estop_signal_loss"
    AUTO_RECOVERY = "auto_recovery"
    RESTART_COMPLETE = "restart_complete"
    FADE_COMPLETE = "fade_complete"
    MANUAL = "manual"


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
class EStopState:
    engaged: bool = False
    last_estop_heartbeat_ns: int = 0
    heartbeat_timeout_ms: int = 500

    def signal_lost(self, now_ns: int) -> bool:
        return now_ns - self.last_estop_heartbeat_ns > self.heartbeat_timeout_ms * 1_000_000

    def effective_engaged(self, now_ns: int) -> bool:
        """Manually engaged, or fail-safe engaged because the radio went quiet."""
        return self.engaged or self.signal_lost(now_ns)


def lerp_pose(a: Pose, b: Pose, t: float) -> Pose:
    return tuple(ai + (bi - ai) * t for ai, bi in zip(a, b))


@dataclass
class ArmState:
    arm: ArmId
    mode: ArmMode = ArmMode.OPERATIONAL
    external_force: float = 0.0
    fade_progress: float = 0.0
    operator_pose: Pose = ZERO_POSE
    arm_pose: Pose = ZERO_POSE
    stop_pose: Pose = ZERO_POSE
    restart_done_ns: int | None = field(default=None, repr=False)
    fade_start_ns: int | None = field(default=None, repr=False)
    gap_alarm_active: bool = field(default=False, repr=False)


class SafetyController:
    """Single owner of E-stop and arm state, advanced by the simulation tick.

    E-stop events preempt: callers process them before any other event of the
    same tick.
    """

    def __init__(
        self,
        gap_threshold_s: float = 0.1,
        force_threshold: float = 0.2,
        collision_threshold: float = 0.8,
        restart_duration_s: float = 3.0,
        fade_duration_s: float = 2.0,
        estop: EStopState | None = None,
    ):
        self.gap_threshold_s = gap_threshold_s
        self.force_threshold = force_threshold
        self.collision_threshold = collision_threshold
        self.restart_duration_s = restart_duration_s
        self.fade_duration_s = fade_duration_s
        self.estop = estop or EStopState()
        self.arms: dict[ArmId, ArmState] = {arm: ArmState(arm=arm) for arm in ArmId}
        self.base_output_zeroed = False
        self.holds: tuple[str, ...] = ()
        self.transitions: list[Transition] = []
        self.command_gap_events: list[dict] = []
        self._signal_loss_logged = False

    # -- transitions --------------------------------------------------------------

    def _log(self, now_ns: int, component: str, from_state: str, to_state: str, cause: Cause) -> Transition:
        tr = Transition(now_ns, component, from_state, to_state, cause.value)
        self.transitions.append(tr)
        return tr

    def _stop_arm(self, arm: ArmState, now_ns: int, cause: Cause, to: ArmMode = ArmMode.SOFT_STOP) -> Transition:
        tr = self._log(now_ns, f"arm_{arm.arm.value}", arm.mode.value, to.value, cause)
        arm.mode = to
        arm.stop_pose = arm.arm_pose  # hold the current joint positions
        arm.fade_progress = 0.0
        arm.restart_done_ns = None
        arm.fade_start_ns = None
        return tr

    # -- e-stop ---------------------------------------------------------------------

    def is_engaged(self, now_ns: int) -> bool:
        return self.estop.effective_engaged(now_ns)

    def estop_heartbeat(self, now_ns: int) -> None:
        self.estop.last_estop_heartbeat_ns = now_ns
        self._signal_loss_logged = False

    def estop_engage(self, now_ns: int, cause: Cause = Cause.ESTOP) -> list[Transition]:
        """Depower the base and hold every arm.  Engaging twice is a no-op."""
        events: list[Transition] = []
        if not self.base_output_zeroed:
            events.append(self._log(now_ns, "base", "powered", "coast", cause))
            self.base_output_zeroed = True
            self.holds = ("hands", "neck")
        if not self.estop.engaged and cause is Cause.ESTOP:
            self.estop.engaged = True
            events.append(self._log(now_ns, "estop", "released", "engaged", cause))
        for arm in self.arms.values():
            if arm.mode in (ArmMode.OPERATIONAL, ArmMode.RESTARTING, ArmMode.FADING):
                events.append(self._stop_arm(arm, now_ns, cause))
        return events

    def estop_release(self, now_ns: int) -> list[Transition]:
        """Components become eligible for recovery; nothing auto-resumes here."""
        events: list[Transition] = []
        if self.estop.engaged:
            self.estop.engaged = False
            events.append(self._log(now_ns, "estop", "engaged", "released", Cause.MANUAL))
        if not self.is_engaged(now_ns) and self.base_output_zeroed:
            self.base_output_zeroed = False
            self.holds = ()
            events.append(self._log(now_ns, "base", "coast", "powered", Cause.MANUAL))
        return events

    # -- stop triggers -----------------------------------------------------------------

    def arm_command_watchdog(self, arm_id: ArmId, gap_s: float, now_ns: int) -> Transition | None:
        """Arms disable themselves when operator commands stop arriving."""
        arm = self.arms[arm_id]
        if gap_s <= self.gap_threshold_s:
            arm.gap_alarm_active = False
            return None
        if gap_s == float("inf"):
            return None  # stream never started; nothing to lose yet
        if not arm.gap_alarm_active:
            arm.gap_alarm_active = True
            self.command_gap_events.append({"arm": arm_id.value, "t_s": now_ns / 1e9, "gap_s": gap_s})
        if arm.mode is ArmMode.OPERATIONAL:
            return self._stop_arm(arm, now_ns, Cause.COMMAND_GAP)
        return None

    def collision_event(self, arm_id: ArmId, force: float, now_ns: int) -> Transition | None:
        """An external impact; strong enough and the arm's own safety stops it."""
        if force < 0:
            raise ValueError("force must be nonnegative")
        arm = self.arms[arm_id]
        arm.external_force = force
        if force < self.collision_threshold:
            return None
        if arm.mode in (ArmMode.OPERATIONAL, ArmMode.FADING, ArmMode.RESTARTING):
            return self._stop_arm(arm, now_ns, Cause.COLLISION)
        return None

    def hard_stop_event(self, arm_id: ArmId, now_ns: int, cause: Cause = Cause.COLLISION) -> Transition | None:
        """The arm's own safety engaged the hardware brakes (motors off)."""
        arm = self.arms[arm_id]
        if arm.mode is ArmMode.HARD_STOP:
            return None
        return self._stop_arm(arm, now_ns, cause, to=ArmMode.HARD_STOP)

    def set_external_force(self, arm_id: ArmId, force: float) -> None:
        self.arms[arm_id].external_force = force

    def set_operator_pose(self, arm_id: ArmId, pose: Pose) -> None:
        arm = self.arms[arm_id]
        arm.operator_pose = pose
        if arm.mode is ArmMode.OPERATIONAL:
            arm.arm_pose = pose

    # -- recovery ---------------------------------------------------------------------

    def recovery_observer_tick(self, arm_id: ArmId, now_ns: int) -> Transition | None:
        """Restart stopped arms whenever the manual E-stop allows it.

        Recovery is withheld while external force presses on the arm; once the
        force drops the restart begins, then the pose fades softly to the
        operator pose.
        """
        arm = self.arms[arm_id]
        if arm.mode in (ArmMode.SOFT_STOP, ArmMode.HARD_STOP):
            if self.is_engaged(now_ns):
                return None
            if arm.external_force >= self.force_threshold:
                return None
            tr = self._log(now_ns, f"arm_{arm.arm.value}", arm.mode.value, ArmMode.RESTARTING.value, Cause.AUTO_RECOVERY)
            arm.mode = ArmMode.RESTARTING
            arm.restart_done_ns = now_ns + int(self.restart_duration_s * NS_PER_S)
            return tr
        if arm.mode is ArmMode.RESTARTING:
            if arm.restart_done_ns is not None and now_ns >= arm.restart_done_ns:
                tr = self._log(now_ns, f"arm_{arm.arm.value}", arm.mode.value, ArmMode.FADING.value, Cause.RESTART_COMPLETE)
                arm.mode = ArmMode.FADING
                arm.restart_done_ns = None
                arm.fade_start_ns = now_ns
                arm.fade_progress = 0.0
            return None
        if arm.mode is ArmMode.FADING:
            elapsed = (now_ns - (arm.fade_start_ns or now_ns)) / NS_PER_S
            arm.fade_progress = min(1.0, elapsed / self.fade_duration_s)
            arm.arm_pose = lerp_pose(arm.stop_pose, arm.operator_pose, arm.fade_progress)
            if arm.fade_progress >= 1.0:
                tr = self._log(now_ns, f"arm_{arm.arm.value}", arm.mode.value, ArmMode.OPERATIONAL.value, Cause.FADE_COMPLETE)
                arm.mode = ArmMode.OPERATIONAL
                arm.fade_start_ns = None
                return tr
        return None

    # -- periodic ------------------------------------------------------------------------

    def tick(self, now_ns: int, gaps: dict[ArmId, float] | None = None) -> list[Transition]:
        """One safety evaluation: fail-safe E-stop first, then stops, then recovery."""
        before = len(self.transitions)
        if self.estop.signal_lost(now_ns) and not self.estop.engaged and not self._signal_loss_logged:
            self._signal_loss_logged = True
            self.estop_engage(now_ns, cause=Cause.ESTOP_SIGNAL_LOSS)
        if self.is_engaged(now_ns) and not self.base_output_zeroed:
            self.estop_engage(now_ns)
        if not self.is_engaged(now_ns) and self.base_output_zeroed:
            # signal returned without a latched manual stop: base power is allowed back
            self.base_output_zeroed = False
            self.holds = ()
            self._log(now_ns, "base", "coast", "powered", Cause.MANUAL)
        if gaps:
            for arm_id, gap_s in gaps.items():
                self.arm_command_watchdog(arm_id, gap_s, now_ns)
        for arm_id in self.arms:
            self.recovery_observer_tick(arm_id, now_ns)
        return self.transitions[before:]

    # -- queries ----------------------------------------------------------------------------

    def snapshot(self, now_ns: int) -> dict:
        return {
            "t_s": now_ns / 1e9,
            "estop": {
                "engaged": self.estop.engaged,
                "effective_engaged": self.is_engaged(now_ns),
                "signal_lost": self.estop.signal_lost(now_ns),
            },
            "base_output_zeroed": self.base_output_zeroed,
            "holds": list(self.holds),
            "arms": [
                {
                    "arm": arm.arm.value,
                    "mode": arm.mode.value,
                    "external_force": arm.external_force,
                    "fade_progress": arm.fade_progress,
                }
                for arm in self.arms.values()
            ],
        }
