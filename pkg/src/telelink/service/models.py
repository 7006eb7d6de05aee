"""Request/response schemas for the control endpoint and the websocket feed.

The wire shapes are versioned in docs/feed-schema.md; the panel relies on
full-state messages (never diffs) so a reconnecting client is whole again
after the first overview/checks/safety triple.
"""

from __future__ import annotations

from typing import Annotated, Literal, Union

from pydantic import BaseModel, Field


class SetGroupLinks(BaseModel):
    kind: Literal["set_group_links"]
    command_id: str
    group: str
    links: list[str]


class EStopEngage(BaseModel):
    kind: Literal["estop_engage"]
    command_id: str


class EStopRelease(BaseModel):
    kind: Literal["estop_release"]
    command_id: str


class InjectFault(BaseModel):
    kind: Literal["inject_fault"]
    command_id: str
    fault: Literal["crash", "hang", "syshang"]
    target: str | None = None


ControlCommand = Annotated[
    Union[SetGroupLinks, EStopEngage, EStopRelease, InjectFault],
    Field(discriminator="kind"),
]


class ControlEnvelope(BaseModel):
    command: ControlCommand


class CommandOutcome(BaseModel):
    kind: Literal["ack", "error"]
    command_id: str
    detail: str = ""


class FeedMessage(BaseModel):
    kind: Literal["overview", "checks", "safety", "ack", "error"]
    seq: int
    server_time_ns: int
    payload: dict


class ScenarioInfo(BaseModel):
    scenario: str
    seed: int
    duration_s: float
    speed: float
    sim_time_s: float
    running: bool
