"""HTTP facade over a running hub.

Stateless token auth (bearer header or `?token=`), JSON bodies, and two
streaming endpoints: `/events` as server-sent events and `/stream/{camera}`
as chunked FRAME-prefixed pixel payloads, mirroring the TCP wire format.
"""

from __future__ import annotations

import queue
import re
import threading
from pathlib import Path

from fastapi import Depends, FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    AuthRequired,
    BadOp,
    Denied,
    HubError,
    UnknownCamera,
    UnknownTarget,
)
from .grammar import CHANNELS
from .hub import Hub
from .model import render_state
from .protocol import INGRESS_VERBS, ingress_fields

_STATUS = {
    "EAUTH": 401,
    "EDENIED": 403,
    "ETARGET": 404,
    "EBUSY": 409,
    "ESTATE": 409,
    "EREJECTED": 409,
    "ELINK": 502,
    "EUNAVAILABLE": 503,
    "ESLOW": 503,
}

_TOPICS = ("state", "alert", "stream-meta")
_IMAGE_NAME = re.compile(r"^[A-Za-z0-9._:-]+\.pgm$")


class AuthBody(BaseModel):
    token: str


class CommandBody(BaseModel):
    text: str
    channel: str = "web"


class ClickBody(BaseModel):
    x: int
    y: int
    w: int
    h: int


class ExecBody(BaseModel):
    line: str


class PowerBody(BaseModel):
    action: str


def create_app(hub: Hub, tokens: dict[str, str] | None = None,
               panel_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="homehub", docs_url=None, redoc_url=None)
    token_map = dict(tokens if tokens is not None else hub.config.tokens)

    def principal_of(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            token = header[7:].strip()
        else:
            token = request.query_params.get("token", "")
        principal = token_map.get(token)
        if principal is None:
            raise AuthRequired("invalid or missing token")
        return principal

    @app.exception_handler(HubError)
    async def hub_error(_request: Request, err: HubError) -> JSONResponse:
        return JSONResponse(status_code=_STATUS.get(err.code, 400),
                            content={"error": err.code,
                                     "message": err.message})

    @app.post("/auth")
    def auth(body: AuthBody) -> dict:
        principal = token_map.get(body.token)
        if principal is None:
            raise AuthRequired("invalid token")
        return {"principal": principal}

    @app.get("/devices")
    def devices(_principal: str = Depends(principal_of)) -> dict:
        listing = [{"id": d.id, "kind": d.kind.value, "room": d.room,
                    "label": d.label, "state": render_state(d.state)}
                   for d in hub.registry.snapshot()]
        out = {"devices": listing}
        if hub.security is not None:
            out["security"] = hub.security.phase
        return out

    @app.post("/command")
    def command(body: CommandBody,
                principal: str = Depends(principal_of)) -> dict:
        if body.channel not in CHANNELS:
            raise BadOp(f"unknown channel {body.channel!r}")
        # wire lines pass through verbatim; grammar text is everything else
        verb, _, rest = body.text.partition(" ")
        if verb in INGRESS_VERBS:
            if principal != "owner":
                raise Denied(f"{verb} is owner-only")
            return {"fields": ingress_fields(hub, verb, rest, owner_key="http")}
        text = rest if verb == "CMD" else body.text
        bound = hub.bind_text(text, body.channel, principal)
        if (bound.action in ("start-scanning", "stop-scanning")
                and principal != "owner"):
            raise Denied("security control is owner-only")
        return {"fields": hub.execute(bound)}

    @app.get("/events")
    def events(request: Request, topics: str = "state,alert,stream-meta",
               replay: int = 0, limit: int | None = None,
               _principal: str = Depends(principal_of)) -> StreamingResponse:
        wanted = tuple(t for t in topics.split(",") if t)
        for t in wanted:
            if t not in _TOPICS:
                raise BadOp(f"unknown topic {t!r}")

        def pump():
            inbox: queue.Queue = queue.Queue(maxsize=1000)

            def on_event(ev):
                if ev.topic in wanted:
                    try:
                        inbox.put_nowait(ev)
                    except queue.Full:
                        pass   # http watcher lagging: drop, log is canonical

            hub.subscribe(on_event)
            try:
                sent = 0
                last_seq = 0
                if replay > 0:
                    past = [ev for ev in hub.log.tail_events(-1)
                            if ev.topic in wanted]
                    for ev in past[-replay:]:
                        yield _sse(ev)
                        last_seq = ev.seq
                        sent += 1
                        if limit is not None and sent >= limit:
                            return
                while limit is None or sent < limit:
                    try:
                        ev = inbox.get(timeout=15)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    if ev.seq <= last_seq:
                        continue
                    yield _sse(ev)
                    last_seq = ev.seq
                    sent += 1
            finally:
                hub.unsubscribe(on_event)

        return StreamingResponse(pump(), media_type="text/event-stream")

    @app.get("/stream/{camera_id}")
    def stream(camera_id: str, frames: int | None = None,
               _principal: str = Depends(principal_of)) -> StreamingResponse:
        if camera_id not in hub.deck.ids():
            raise UnknownCamera(f"no camera {camera_id}")
        width, height, _fps = hub.deck.geometry(camera_id)

        def pump():
            session = hub.deck.open_stream(camera_id)
            fresh = threading.Event()
            session.on_offer = fresh.set
            try:
                yield f"STREAM {width} {height}\n".encode("ascii")
                sent = 0
                while frames is None or sent < frames:
                    frame = session.pop()
                    if frame is None:
                        fresh.clear()
                        fresh.wait(timeout=10)
                        continue
                    head = f"FRAME {frame.seq} {frame.at_ms} {len(frame.pixels)}\n"
                    yield head.encode("ascii") + frame.pixels
                    sent += 1
            finally:
                hub.deck.close_stream(session)

        return StreamingResponse(pump(), media_type="application/octet-stream")

    @app.get("/desktop")
    def desktop(_principal: str = Depends(principal_of)) -> dict:
        return hub.desktop_model()

    @app.post("/click")
    def click(body: ClickBody,
              _principal: str = Depends(principal_of)) -> dict:
        outcome = hub.desktop_click(body.x, body.y, body.w, body.h)
        if outcome is None:
            return {"hit": None}
        return {"hit": outcome[0], "outcome": outcome[1]}

    @app.post("/exec")
    def exec_command(body: ExecBody,
                     principal: str = Depends(principal_of)) -> dict:
        return {"output": hub.desktop_exec(principal, body.line)}

    @app.post("/power")
    def power(body: PowerBody,
              principal: str = Depends(principal_of)) -> dict:
        return {"result": hub.desktop_power(principal, body.action)}

    @app.get("/intrusions/{name}")
    def intrusion(name: str,
                  _principal: str = Depends(principal_of)) -> FileResponse:
        if not _IMAGE_NAME.match(name):
            raise BadOp(f"bad image name {name!r}")
        root = (hub.config.data_dir / "intrusions").resolve()
        path = (root / name).resolve()
        if path.parent != root or not path.is_file():
            raise UnknownTarget(f"no stored image {name}")
        return FileResponse(path, media_type="image/x-portable-graymap")

    if panel_dir is not None and Path(panel_dir).is_dir():
        app.mount("/panel", StaticFiles(directory=panel_dir, html=True),
                  name="panel")

    return app


def _sse(ev) -> str:
    return f"id: {ev.seq}\nevent: {ev.topic}\ndata: {ev.line()}\n\n"
