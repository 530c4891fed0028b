"""HTTP/WebSocket service around the control loop, serving the editor.

The control loop runs on its own thread at the configured rate.  Request
handlers never touch loop state directly: mutating calls are queued and
drained once per tick by the loop thread, and their results travel back on
a per-command event.  Snapshots are immutable dicts published to a ring
buffer that WebSocket subscribers replay strictly in tick order.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.concurrency import run_in_threadpool
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .motion_player import (
    MotionError,
    parse_motion,
    serialize_motion,
    validate_against_model,
)
from .robot_model import forward_kinematics
from .runtime import Runtime, RuntimeConfig
from .__init__ import __version__


class SnapshotHub:
    """Ring buffer of snapshots; readers block for the next tick in order."""

    def __init__(self, capacity: int = 4096):
        self.capacity = capacity
        self._items: dict[int, dict] = {}
        self._latest = -1
        self._cond = threading.Condition()

    def publish(self, snapshot: dict) -> None:
        with self._cond:
            tick = snapshot["tick"]
            self._items[tick] = snapshot
            self._latest = tick
            stale = tick - self.capacity
            if stale in self._items:
                del self._items[stale]
            self._cond.notify_all()

    def latest(self) -> dict | None:
        with self._cond:
            return self._items.get(self._latest)

    def wait_next(self, after: int, timeout: float = 1.0) -> dict | None:
        """Next snapshot with tick == after + 1 (skips ahead only if the ring
        already dropped it, which keeps ticks strictly increasing)."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                want = after + 1
                if self._latest >= want:
                    if want in self._items:
                        return self._items[want]
                    oldest = self._latest - len(self._items) + 1
                    return self._items.get(max(want, oldest), self._items[self._latest])
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)


class LoopRunner:
    """Owns the Runtime on a dedicated thread; drains commands once per tick."""

    def __init__(self, runtime: Runtime, realtime: bool = True):
        self.runtime = runtime
        self.realtime = realtime
        self.hub = SnapshotHub()
        self._commands: "queue.Queue[tuple[Callable, dict]]" = queue.Queue()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="control-loop", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)

    def submit(self, fn: Callable, timeout: float = 1.0):
        """Run fn on the loop thread at the next tick boundary."""
        slot: dict = {"event": threading.Event()}
        self._commands.put((fn, slot))
        if not slot["event"].wait(timeout):
            raise TimeoutError("control loop did not pick up the command in time")
        if "error" in slot:
            raise slot["error"]
        return slot.get("result")

    def _drain(self) -> None:
        while True:
            try:
                fn, slot = self._commands.get_nowait()
            except queue.Empty:
                return
            try:
                slot["result"] = fn()
            except BaseException as exc:  # propagated to the submitter
                slot["error"] = exc
            finally:
                slot["event"].set()

    def _run(self) -> None:
        period = self.runtime.cfg.dt
        next_tick = time.perf_counter()
        while not self._stop.is_set():
            self._drain()
            snapshot = self.runtime.tick()
            self.hub.publish(snapshot)
            next_tick += period
            if self.realtime:
                delay = next_tick - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_tick = time.perf_counter()


# ---------------------------------------------------------------------------
# Wire models


class GaitRequest(BaseModel):
    vx: float = Field(0.0, ge=-1.0, le=1.0)
    vy: float = Field(0.0, ge=-1.0, le=1.0)
    omega: float = Field(0.0, ge=-1.0, le=1.0)
    walk: bool = True


class PlayRequest(BaseModel):
    name: str


class FkRequest(BaseModel):
    positions: list[float] = Field(min_length=20, max_length=20)


class LinkPose(BaseModel):
    position: list[float]
    orientation: list[float]  # quaternion, w x y z


class FkResponse(BaseModel):
    links: dict[str, LinkPose]


class MotionList(BaseModel):
    motions: list[str]


class StatusReply(BaseModel):
    ok: bool = True
    behavior: str


def create_app(
    cfg: RuntimeConfig | None = None,
    motion_dir: str | Path | None = None,
    realtime: bool = True,
    editor_dir: str | Path | None = None,
) -> FastAPI:
    """Build the service; the loop thread starts with the app lifespan."""
    cfg = cfg or RuntimeConfig()
    runtime = Runtime(cfg)
    runner = LoopRunner(runtime, realtime=realtime)
    save_dir = Path(motion_dir) if motion_dir else None

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        runner.start()
        try:
            yield
        finally:
            runner.stop()

    app = FastAPI(title="humanoidsim", version=__version__, lifespan=lifespan)
    app.state.runner = runner
    app.state.runtime = runtime

    @app.get("/model")
    def get_model() -> dict:
        return runtime.model.document

    @app.get("/motions", response_model=MotionList)
    def list_motions() -> MotionList:
        return MotionList(motions=sorted(runtime.motions))

    @app.get("/motions/{name}")
    def get_motion(name: str) -> dict:
        motion = runtime.motions.get(name)
        if motion is None:
            raise HTTPException(status_code=404, detail=f"unknown motion '{name}'")
        return json.loads(serialize_motion(motion))

    @app.put("/motions/{name}")
    def put_motion(name: str, doc: dict) -> dict:
        if doc.get("name") != name:
            raise HTTPException(
                status_code=400,
                detail={"error": f"body name {doc.get('name')!r} must match path '{name}'"},
            )
        try:
            motion = parse_motion(doc)
        except MotionError as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)})
        violations = validate_against_model(motion, runtime.model)
        if violations:
            raise HTTPException(status_code=400, detail={"violations": violations})

        def install():
            runtime.motions[name] = motion

        runner.submit(install)
        if save_dir is not None:
            save_dir.mkdir(parents=True, exist_ok=True)
            (save_dir / f"{name}.json").write_text(serialize_motion(motion))
        return {"ok": True, "name": name}

    @app.delete("/motions/{name}")
    def delete_motion(name: str) -> dict:
        if name not in runtime.motions:
            raise HTTPException(status_code=404, detail=f"unknown motion '{name}'")

        def remove():
            runtime.motions.pop(name, None)

        runner.submit(remove)
        if save_dir is not None and (save_dir / f"{name}.json").exists():
            (save_dir / f"{name}.json").unlink()
        return {"ok": True}

    @app.post("/fk", response_model=FkResponse)
    def fk(request: FkRequest) -> FkResponse:
        poses = forward_kinematics(runtime.model, np.asarray(request.positions))
        return FkResponse(
            links={
                name: LinkPose(position=list(pos), orientation=[rot.w, rot.x, rot.y, rot.z])
                for name, (pos, rot) in poses.items()
            }
        )

    @app.post("/play", response_model=StatusReply)
    def play(request: PlayRequest) -> StatusReply:
        try:
            runner.submit(lambda: runtime.command_play(request.name))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return StatusReply(behavior=runtime.behavior)

    @app.post("/stop", response_model=StatusReply)
    def stop() -> StatusReply:
        runner.submit(runtime.command_stop)
        return StatusReply(behavior=runtime.behavior)

    @app.post("/gait", response_model=StatusReply)
    def gait(request: GaitRequest) -> StatusReply:
        try:
            runner.submit(
                lambda: runtime.command_gait(request.vx, request.vy, request.omega, request.walk)
            )
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return StatusReply(behavior=runtime.behavior)

    @app.websocket("/stream")
    async def stream(ws: WebSocket) -> None:
        await ws.accept()
        # Join the live tail; the ring history is for slow readers, not replay.
        latest = runner.hub.latest()
        last = latest["tick"] if latest else -1
        try:
            while True:
                snapshot = await run_in_threadpool(runner.hub.wait_next, last, 1.0)
                if snapshot is None:
                    continue
                await ws.send_text(json.dumps(snapshot, separators=(",", ":")))
                last = snapshot["tick"]
        except WebSocketDisconnect:
            return

    if editor_dir is not None and Path(editor_dir).is_dir():
        app.mount("/editor", StaticFiles(directory=str(editor_dir), html=True), name="editor")

    return app
