"""FastAPI application: REST snapshots, a control endpoint and the websocket feed.

GET  /overview, /checks, /safety, /scenario: point-in-time JSON snapshots
POST /control                               : one ControlCommand, acked or errored
WS   /feed                                  : full-state triples at 1 Hz plus
                                              command acks on the same socket

Dashboard assets (when built) are served from the static directory at /.
"""

from __future__ import annotations

import asyncio
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import TypeAdapter, ValidationError

from . import models
from .session import SimSession

_COMMAND_ADAPTER: TypeAdapter = TypeAdapter(models.ControlCommand)


def create_app(session: SimSession, static_dir: Path | None = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(session.run_paced())
        try:
            yield
        finally:
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass

    app = FastAPI(title="telelink", lifespan=lifespan)

    @app.get("/scenario", response_model=models.ScenarioInfo)
    def scenario_info():
        return session.info()

    @app.get("/overview")
    def overview() -> dict:
        return session.overview()

    @app.get("/checks")
    def checks() -> dict:
        return session.checks()

    @app.get("/safety")
    def safety() -> dict:
        return session.safety()

    @app.post("/control", response_model=models.CommandOutcome)
    async def control(envelope: models.ControlEnvelope):
        return await session.submit(envelope.command)

    @app.websocket("/feed")
    async def feed(ws: WebSocket):
        await ws.accept()
        queue = session.subscribe()
        try:
            for msg in session.feed_triple():  # immediate full state on connect
                await ws.send_text(msg.model_dump_json())

            async def pump_feed():
                while True:
                    msg = await queue.get()
                    await ws.send_text(msg.model_dump_json())

            async def pump_commands():
                while True:
                    text = await ws.receive_text()
                    try:
                        command = _COMMAND_ADAPTER.validate_json(text)
                    except ValidationError as exc:
                        out = models.FeedMessage(
                            kind="error",
                            seq=0,
                            server_time_ns=session.now_ns(),
                            payload={"command_id": "", "detail": f"bad command: {exc.errors()[0]['msg']}"},
                        )
                        await ws.send_text(out.model_dump_json())
                        continue
                    outcome = await session.submit(command)
                    out = models.FeedMessage(
                        kind=outcome.kind,
                        seq=0,
                        server_time_ns=session.now_ns(),
                        payload={"command_id": outcome.command_id, "detail": outcome.detail},
                    )
                    await ws.send_text(out.model_dump_json())

            feeder = asyncio.create_task(pump_feed())
            try:
                await pump_commands()
            finally:
                feeder.cancel()
        except WebSocketDisconnect:
            pass
        finally:
            session.unsubscribe(queue)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app
